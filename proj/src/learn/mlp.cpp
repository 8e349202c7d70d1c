#include "fastdad/learn/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "fastdad/density/adam.hpp"
#include "fastdad/density/mixture.hpp"
#include "fastdad/rng.hpp"
#include "fastdad/simd/kernels.hpp"

namespace fastdad::learn {

void MLPConfig::validate() const {
  for (std::size_t h : hidden) {
    if (h == 0) throw std::invalid_argument("hidden sizes must be positive");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("mlp learning rate must be positive");
  if (batch_size == 0) throw std::invalid_argument("mlp batch size must be positive");
  if (holdout_fraction < 0.0 || holdout_fraction >= 1.0) throw std::invalid_argument("holdout fraction must be in [0, 1)");
}

nlohmann::json MLPConfig::to_json() const {
  return {{"hidden", hidden},         {"learning_rate", learning_rate}, {"batch_size", batch_size},
          {"max_epochs", max_epochs}, {"patience", patience},           {"weight_decay", weight_decay},
          {"holdout_fraction", holdout_fraction}, {"seed", seed}};
}

MLPConfig MLPConfig::from_json(const nlohmann::json& j) {
  MLPConfig c;
  if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.max_epochs = j.value("max_epochs", c.max_epochs);
  c.patience = j.value("patience", c.patience);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.holdout_fraction = j.value("holdout_fraction", c.holdout_fraction);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

void MLP::build_layers(std::size_t inputs, std::size_t outputs) {
  layers_.clear();
  std::size_t offset = 0, in = inputs;
  std::vector<std::size_t> widths = config_.hidden;
  widths.push_back(outputs);
  for (std::size_t w : widths) {
    Layer l{in, w, offset, offset + in * w};
    offset = l.b_offset + w;
    layers_.push_back(l);
    in = w;
  }
  params_.assign(offset, 0.0);
}

std::size_t MLP::input_width() const {
  std::size_t w = 0;
  for (std::size_t c : cardinalities_) w += c == 0 ? 1 : c;
  return w;
}

void MLP::encode(const data::FeatureMatrix& features, std::size_t begin, std::size_t count,
                 std::vector<double>& out) const {
  const std::size_t width = input_width();
  out.assign(count * width, 0.0);
  for (std::size_t b = 0; b < count; ++b) {
    const auto row = features.row(begin + b);
    double* dst = out.data() + b * width;
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (cardinalities_[j] == 0) {
        *dst++ = (row[j] - means_[j]) / stds_[j];
      } else {
        dst[static_cast<std::size_t>(row[j])] = 1.0;
        dst += cardinalities_[j];
      }
    }
  }
}

void MLP::forward(const std::vector<double>& input, std::size_t count,
                  std::vector<std::vector<double>>& acts) const {
  acts.resize(layers_.size() + 1);
  acts[0] = input;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const Layer& L = layers_[l];
    auto& out = acts[l + 1];
    out.resize(count * L.out);
    for (std::size_t b = 0; b < count; ++b) {
      std::copy(params_.begin() + static_cast<std::ptrdiff_t>(L.b_offset),
                params_.begin() + static_cast<std::ptrdiff_t>(L.b_offset + L.out),
                out.begin() + static_cast<std::ptrdiff_t>(b * L.out));
    }
    simd::matmul_acc(acts[l].data(), params_.data() + L.w_offset, out.data(), count, L.in, L.out);
    if (l + 1 < layers_.size()) {
      for (double& v : out) v = v > 0.0 ? v : 0.0;
    }
  }
}

double MLP::batch_loss_grad(const std::vector<double>& input, std::span<const double> targets, std::size_t count,
                            std::vector<double>* grad) const {
  std::vector<std::vector<double>> acts;
  forward(input, count, acts);
  const std::size_t q = outputs();
  std::vector<double> dz(count * q);
  double loss = 0.0;
  const double inv = 1.0 / static_cast<double>(count);
  const auto& z = acts.back();
  for (std::size_t b = 0; b < count; ++b) {
    const double* t = targets.data() + b * q;
    if (task_.kind == data::TaskKind::Kind::Multiclass) {
      std::vector<double> p(z.begin() + static_cast<std::ptrdiff_t>(b * q),
                            z.begin() + static_cast<std::ptrdiff_t>((b + 1) * q));
      softmax_inplace(p);
      loss += soft_cross_entropy(p, std::span<const double>(t, q));
      for (std::size_t c = 0; c < q; ++c) dz[b * q + c] = (p[c] - t[c]) * inv;
    } else if (task_.kind == data::TaskKind::Kind::Binary) {
      const double s = density::sigmoid(z[b]);
      loss += (s - t[0]) * (s - t[0]);
      dz[b] = 2.0 * (s - t[0]) * s * (1.0 - s) * inv;
    } else {
      loss += (z[b] - t[0]) * (z[b] - t[0]);
      dz[b] = 2.0 * (z[b] - t[0]) * inv;
    }
  }
  if (!grad) return loss * inv;

  grad->assign(params_.size(), 0.0);
  std::vector<double> delta = std::move(dz), prev;
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const Layer& L = layers_[l];
    simd::matmul_at_acc(acts[l].data(), delta.data(), grad->data() + L.w_offset, count, L.in, L.out);
    for (std::size_t b = 0; b < count; ++b)
      for (std::size_t o = 0; o < L.out; ++o) (*grad)[L.b_offset + o] += delta[b * L.out + o];
    if (l == 0) break;
    prev.assign(count * L.in, 0.0);
    simd::matmul_bt_acc(delta.data(), params_.data() + L.w_offset, prev.data(), count, L.in, L.out);
    const auto& a = acts[l];
    for (std::size_t k = 0; k < prev.size(); ++k) {
      if (a[k] <= 0.0) prev[k] = 0.0;
    }
    delta.swap(prev);
  }
  return loss * inv;
}

std::shared_ptr<MLP> MLP::fit(const DistillSet& set, const MLPConfig& config) {
  config.validate();
  set.validate();
  const std::size_t n = set.n_rows();
  if (n == 0) throw std::invalid_argument("cannot fit an mlp on empty data");
  auto out = std::make_shared<MLP>();
  MLP& m = *out;
  m.config_ = config;
  m.task_ = set.task;
  m.cardinalities_ = set.features.cardinalities;
  m.n_train_ = n;
  const std::size_t d = set.features.n_cols;
  const std::size_t q = m.outputs();

  std::vector<std::size_t> real;
  for (std::size_t r = 0; r < n; ++r) {
    if (!set.augmented[r]) real.push_back(r);
  }
  m.means_.assign(d, 0.0);
  m.stds_.assign(d, 1.0);
  auto stat_row = [&](std::size_t k) { return real.empty() ? k : real[k]; };
  const std::size_t n_stat = real.empty() ? n : real.size();
  for (std::size_t j = 0; j < d; ++j) {
    if (m.cardinalities_[j] > 0) continue;
    double mean = 0.0, var = 0.0;
    for (std::size_t k = 0; k < n_stat; ++k) mean += set.features.at(stat_row(k), j);
    mean /= static_cast<double>(n_stat);
    for (std::size_t k = 0; k < n_stat; ++k) {
      const double v = set.features.at(stat_row(k), j) - mean;
      var += v * v;
    }
    const double sd = std::sqrt(var / static_cast<double>(n_stat));
    m.means_[j] = mean;
    m.stds_[j] = sd > 0.0 ? sd : 1.0;
  }
  std::vector<double> targets = set.targets.values;
  if (set.task.kind == data::TaskKind::Kind::Regression) {
    double mean = 0.0, var = 0.0;
    for (std::size_t k = 0; k < n_stat; ++k) mean += targets[stat_row(k)];
    mean /= static_cast<double>(n_stat);
    for (std::size_t k = 0; k < n_stat; ++k) var += (targets[stat_row(k)] - mean) * (targets[stat_row(k)] - mean);
    const double sd = std::sqrt(var / static_cast<double>(n_stat));
    m.target_mean_ = mean;
    m.target_std_ = sd > 0.0 ? sd : 1.0;
    for (double& v : targets) v = (v - m.target_mean_) / m.target_std_;
  }

  const std::size_t width = m.input_width();
  m.build_layers(width, q);
  {
    Rng rng = make_stream(config.seed, {0x3177ULL});
    for (std::size_t l = 0; l < m.layers_.size(); ++l) {
      const Layer& L = m.layers_[l];
      const double scale = std::sqrt((l + 1 < m.layers_.size() ? 2.0 : 1.0) / static_cast<double>(L.in));
      for (std::size_t k = 0; k < L.in * L.out; ++k) m.params_[L.w_offset + k] = scale * standard_normal(rng);
    }
  }

  // Early-stopping holdout drawn from the real rows.
  std::vector<std::size_t> holdout, train;
  {
    std::size_t n_hold = 0;
    if (real.size() >= 2 && config.holdout_fraction > 0.0) {
      n_hold = static_cast<std::size_t>(std::llround(config.holdout_fraction * static_cast<double>(real.size())));
      n_hold = std::clamp<std::size_t>(n_hold, 1, real.size() - 1);
    }
    std::vector<std::size_t> shuffled = real;
    Rng rng = make_stream(config.seed, {0x401DULL});
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    holdout.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_hold));
    std::sort(holdout.begin(), holdout.end());
    std::vector<char> is_hold(n, 0);
    for (std::size_t r : holdout) is_hold[r] = 1;
    for (std::size_t r = 0; r < n; ++r) {
      if (!is_hold[r]) train.push_back(r);
    }
  }

  std::vector<double> all_inputs;
  m.encode(set.features, 0, n, all_inputs);
  auto gather = [&](std::span<const std::size_t> rows, std::vector<double>& in, std::vector<double>& tg) {
    in.resize(rows.size() * width);
    tg.resize(rows.size() * q);
    for (std::size_t b = 0; b < rows.size(); ++b) {
      std::copy_n(all_inputs.begin() + static_cast<std::ptrdiff_t>(rows[b] * width), width,
                  in.begin() + static_cast<std::ptrdiff_t>(b * width));
      std::copy_n(targets.begin() + static_cast<std::ptrdiff_t>(rows[b] * q), q,
                  tg.begin() + static_cast<std::ptrdiff_t>(b * q));
    }
  };
  std::vector<double> hold_in, hold_tg;
  gather(holdout, hold_in, hold_tg);

  density::AdamHyper hyper;
  hyper.learning_rate = config.learning_rate;
  hyper.weight_decay = config.weight_decay;
  density::AdamState state(m.params_.size());
  std::vector<double> grad, batch_in, batch_tg, best = m.params_;
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    Rng rng = make_stream(config.seed, {0x5F1EULL, epoch});
    std::shuffle(train.begin(), train.end(), rng);
    for (std::size_t start = 0; start < train.size(); start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, train.size() - start);
      gather(std::span<const std::size_t>(train).subspan(start, len), batch_in, batch_tg);
      m.batch_loss_grad(batch_in, batch_tg, len, &grad);
      density::adam_step(m.params_, grad, state, hyper);
    }
    m.epochs_run_ = epoch + 1;
    if (holdout.empty()) continue;
    const double loss = m.batch_loss_grad(hold_in, hold_tg, holdout.size(), nullptr);
    if (loss < best_loss) {
      best_loss = loss;
      best = m.params_;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  if (!holdout.empty()) m.params_ = std::move(best);
  for (double p : m.params_) {
    if (!std::isfinite(p)) throw std::runtime_error("mlp training diverged");
  }
  return out;
}

double MLP::objective(const DistillSet& set) const {
  check_features(set.features, cardinalities_);
  std::vector<double> in;
  encode(set.features, 0, set.n_rows(), in);
  std::vector<double> targets = set.targets.values;
  if (task_.kind == data::TaskKind::Kind::Regression) {
    for (double& v : targets) v = (v - target_mean_) / target_std_;
  }
  return batch_loss_grad(in, targets, set.n_rows(), nullptr);
}

SoftTargets MLP::predict(const data::FeatureMatrix& features) const {
  check_features(features, cardinalities_);
  SoftTargets out = empty_targets(task_);
  const std::size_t q = outputs();
  out.values.resize(features.n_rows * q);
  constexpr std::size_t kChunk = 256;
  std::vector<double> in;
  std::vector<std::vector<double>> acts;
  for (std::size_t start = 0; start < features.n_rows; start += kChunk) {
    const std::size_t len = std::min(kChunk, features.n_rows - start);
    encode(features, start, len, in);
    forward(in, len, acts);
    std::copy(acts.back().begin(), acts.back().end(), out.values.begin() + static_cast<std::ptrdiff_t>(start * q));
  }
  for (std::size_t r = 0; r < features.n_rows; ++r) {
    auto row = out.mutable_row(r);
    if (task_.kind == data::TaskKind::Kind::Multiclass) {
      softmax_inplace(row);
    } else if (task_.kind == data::TaskKind::Kind::Binary) {
      row[0] = density::sigmoid(row[0]);
    } else {
      row[0] = row[0] * target_std_ + target_mean_;
    }
  }
  return out;
}

nlohmann::json MLP::info() const {
  return {{"type", type_name()}, {"config", config_.to_json()}, {"n_train", n_train_},
          {"epochs_run", epochs_run_}, {"parameters", parameter_count()}};
}

nlohmann::json MLP::to_json() const {
  return {{"format", "fastdad.learner"}, {"version", 1},
          {"type", type_name()},         {"task", task_.name()},
          {"n_classes", task_.n_classes}, {"config", config_.to_json()},
          {"cardinalities", cardinalities_}, {"n_train", n_train_},
          {"epochs_run", epochs_run_},   {"means", means_},
          {"stds", stds_},               {"target_mean", target_mean_},
          {"target_std", target_std_},   {"params", params_}};
}

std::shared_ptr<MLP> MLP::from_json(const nlohmann::json& j) {
  auto out = std::make_shared<MLP>();
  MLP& m = *out;
  m.config_ = MLPConfig::from_json(j.at("config"));
  m.task_ = data::TaskKind::parse(j.at("task"), j.at("n_classes"));
  m.cardinalities_ = j.at("cardinalities").get<std::vector<std::size_t>>();
  m.n_train_ = j.at("n_train");
  m.epochs_run_ = j.value("epochs_run", std::size_t{0});
  m.means_ = j.at("means").get<std::vector<double>>();
  m.stds_ = j.at("stds").get<std::vector<double>>();
  m.target_mean_ = j.at("target_mean");
  m.target_std_ = j.at("target_std");
  m.build_layers(m.input_width(), m.outputs());
  const auto params = j.at("params").get<std::vector<double>>();
  if (params.size() != m.params_.size()) throw std::invalid_argument("mlp checkpoint has the wrong parameter count");
  m.params_ = params;
  return out;
}

}  // namespace fastdad::learn
