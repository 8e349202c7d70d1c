#include "fastdad/density/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "fastdad/density/adam.hpp"

namespace fastdad::density {

std::vector<double> encode_rows(const data::ModelSpace& space, const data::Table& table, Rng& rng) {
  const std::size_t d = space.dim();
  std::vector<double> out(table.n_rows() * d);
  for (std::size_t r = 0; r < table.n_rows(); ++r) space.encode(table, r, rng, {out.data() + r * d, d});
  return out;
}

FitResult fit(const data::Table& train, const data::Table& val, const ModelConfig& config,
              std::uint64_t seed, const FitOptions& options) {
  if (train.n_rows() == 0) throw std::invalid_argument("fit: empty training table");
  if (val.n_rows() == 0) throw std::invalid_argument("fit: empty validation table");
  config.validate();

  data::ModelSpace space(train);
  const std::size_t d = space.dim();
  const std::size_t n = train.n_rows();
  DensityModel model(config, space, seed);

  Rng val_rng = make_stream(seed, {0x7A11ULL});
  const std::vector<double> val_rows = encode_rows(space, val, val_rng);

  AdamHyper hyper;
  hyper.learning_rate = config.learning_rate;
  hyper.weight_decay = config.weight_decay;
  hyper.grad_clip_norm = config.grad_clip_norm;
  AdamState adam(model.n_parameters());

  FitResult result;
  double best_val = -std::numeric_limits<double>::infinity();
  std::vector<double> best_params(model.parameters().begin(), model.parameters().end());
  std::size_t since_best = 0;

  std::vector<double> grad(model.n_parameters());
  std::vector<std::size_t> order(n);
  std::vector<double> batch;
  for (std::size_t epoch = 1; epoch <= options.max_epochs; ++epoch) {
    Rng rng = make_stream(seed, {0xE90C4ULL, epoch});
    const std::vector<double> rows = encode_rows(space, train, rng);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::uniform_int_distribution<std::size_t> pick_feature(0, d - 1);

    double loss_sum = 0.0;
    std::size_t loss_rows = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t m = std::min(config.batch_size, n - start);
      batch.resize(m * d);
      for (std::size_t r = 0; r < m; ++r) {
        std::copy_n(rows.data() + order[start + r] * d, d, batch.data() + r * d);
      }
      const std::size_t masked = pick_feature(rng);
      const double loss = model.loss_and_gradient(batch, masked, grad, &rng);
      for (double g : grad) {
        if (!std::isfinite(g)) throw std::runtime_error("fit: non-finite gradient");
      }
      adam_step(model.mutable_parameters(), grad, adam, hyper);
      loss_sum += loss * static_cast<double>(m);
      loss_rows += m;
    }

    EpochRecord rec{epoch, loss_sum / static_cast<double>(loss_rows), model.mean_pseudolikelihood(val_rows)};
    result.history.push_back(rec);
    if (options.log) {
      *options.log << "epoch " << rec.epoch << " train_loss " << rec.train_loss << " val_pl "
                   << rec.val_pseudolikelihood << '\n';
    }
    if (rec.val_pseudolikelihood > best_val) {
      best_val = rec.val_pseudolikelihood;
      best_params.assign(model.parameters().begin(), model.parameters().end());
      result.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= options.patience) {
      break;
    }
  }

  std::copy(best_params.begin(), best_params.end(), model.mutable_parameters().begin());
  result.model = std::move(model);

  if (options.json_log) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& r : result.history) {
      j.push_back({{"epoch", r.epoch}, {"train_loss", r.train_loss}, {"val_pseudolikelihood", r.val_pseudolikelihood}});
    }
    std::ofstream out(*options.json_log);
    if (!out) throw std::runtime_error("cannot write training log: " + options.json_log->string());
    out << nlohmann::json{{"best_epoch", result.best_epoch}, {"epochs", j}}.dump(2) << '\n';
  }
  return result;
}

}  // namespace fastdad::density
