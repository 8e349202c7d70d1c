#include <doctest.h>

#include <cmath>
#include <numbers>
#include <sstream>

#include "fastdad/density/adam.hpp"
#include "fastdad/density/config.hpp"
#include "fastdad/density/mixture.hpp"
#include "fastdad/density/model.hpp"
#include "fastdad/density/trainer.hpp"
#include "support/fixtures.hpp"
#include "support/reference_forward.hpp"

using namespace fastdad;
using namespace fastdad::density;
using fastdad::testing::randomized_tiny_model;
using fastdad::testing::random_rows;

TEST_CASE("model config defaults and presets") {
  const ModelConfig small = ModelConfig::small();
  CHECK(small.n_layers == 4);
  CHECK(small.n_heads == 8);
  CHECK(small.n_components == 100);
  CHECK(small.dropout == 0.1);
  CHECK(small.learning_rate == 3e-4);
  CHECK(small.weight_decay == 1e-6);
  CHECK(small.grad_clip_norm == 5.0);
  CHECK(small.d_hidden == 32);
  CHECK(small.batch_size == 16);
  const ModelConfig large = ModelConfig::large();
  CHECK(large.d_hidden == 128);
  CHECK(large.batch_size == 256);
  CHECK(ModelConfig::for_rows(14999).size_preset == SizePreset::Small);
  CHECK(ModelConfig::for_rows(15000).size_preset == SizePreset::Large);

  ModelConfig bad = small;
  bad.n_heads = 5;
  CHECK_THROWS(bad.validate());
  bad = small;
  bad.dropout = 1.0;
  CHECK_THROWS(bad.validate());
  CHECK(model_config_from_json(to_json(large)) == large);
}

TEST_CASE("positional encoding") {
  const auto p0 = positional_encoding(8, 0);
  for (std::size_t j = 0; j < 8; ++j) CHECK(p0[j] == (j % 2 == 0 ? 0.0 : 1.0));
  const auto p1 = positional_encoding(4, 1);
  CHECK(p1[0] == doctest::Approx(0.8414709848078965).epsilon(1e-14));
  CHECK(p1[1] == doctest::Approx(0.5403023058681398).epsilon(1e-14));
  CHECK(p1[2] == doctest::Approx(std::sin(0.01)).epsilon(1e-14));
  double max_diff = 0;
  const auto q0 = positional_encoding(4, 0);
  for (std::size_t j = 0; j < 4; ++j) max_diff = std::max(max_diff, std::abs(p1[j] - q0[j]));
  CHECK(max_diff > 0.1);
  CHECK_THROWS(positional_encoding(7, 0));
}

TEST_CASE("mixture log density") {
  const double half_log_2pi = 0.5 * std::log(2 * std::numbers::pi);
  MixtureParams one{{1.0}, {0.0}, {1.0}};
  CHECK(mixture_logpdf(0.0, one) == doctest::Approx(-0.918938533204673).epsilon(1e-14));
  MixtureParams dup{{0.5, 0.5}, {0.3, 0.3}, {0.7, 0.7}};
  MixtureParams single{{1.0}, {0.3}, {0.7}};
  CHECK(mixture_logpdf(1.1, dup) == doctest::Approx(mixture_logpdf(1.1, single)).epsilon(1e-15));
  MixtureParams two{{0.5, 0.5}, {-1.0, 1.0}, {1.0, 1.0}};
  CHECK(mixture_logpdf(0.0, two) == doctest::Approx(std::log(std::exp(-0.5) * 2 * 0.5) - half_log_2pi).epsilon(1e-14));
  CHECK(mixture_logpdf(0.0, two) == doctest::Approx(-1.418938533204673).epsilon(1e-13));

  // log-sum-exp keeps extreme arguments finite
  MixtureParams far{{0.3, 0.7}, {-1e3, 1e3}, {1e-3, 1e-3}};
  for (double v : {-1e6, -1e3, 0.0, 1e3, 1e6}) CHECK(std::isfinite(mixture_logpdf(v, far)));
}

TEST_CASE("mixture head mapping") {
  const std::size_t K = 4;
  std::vector<double> head(3 * K, 0.0);
  const auto p = mixture_from_head(head);
  for (std::size_t k = 0; k < K; ++k) {
    CHECK(p.weights[k] == doctest::Approx(0.25));
    CHECK(p.stds[k] == doctest::Approx(std::log(2.0) + 1e-3).epsilon(1e-14));
  }
  CHECK(p.stds[0] == doctest::Approx(0.69415).epsilon(1e-5));
  CHECK(p.valid());
  std::vector<double> spiky = {50, -50, 0, 0, 1, 2, -80, -80, -80, 400, 400, 400};
  CHECK(mixture_from_head(spiky).valid());
}

TEST_CASE("fresh model emits uniform weights and floored softplus scales") {
  DensityModel m(fastdad::testing::tiny_config(5), fastdad::testing::identity_space(3), 1);
  const auto rows = random_rows(4, 3, 2);
  for (const auto& p : m.forward_conditionals(rows, 1)) {
    CHECK(p.valid());
    for (std::size_t k = 0; k < 5; ++k) {
      CHECK(p.weights[k] == doctest::Approx(0.2).epsilon(1e-15));
      CHECK(p.stds[k] == doctest::Approx(std::log(2.0) + 1e-3).epsilon(1e-14));
    }
  }
}

TEST_CASE("masking: the masked cell never influences its conditional") {
  const auto m = randomized_tiny_model(4, 3, 11);
  auto rows = random_rows(6, 4, 3);
  for (std::size_t i = 0; i < 4; ++i) {
    const auto base = m.forward_head(rows, i);
    auto perturbed = rows;
    for (std::size_t r = 0; r < 6; ++r) perturbed[r * 4 + i] = 123.0 + static_cast<double>(r);
    CHECK(m.forward_head(perturbed, i) == base);
  }
  CHECK_THROWS_AS(m.forward_head(rows, 4), std::out_of_range);
  rows[1] = std::nan("");
  CHECK_THROWS_AS(m.forward_head(rows, 0), std::invalid_argument);
  CHECK_NOTHROW(m.forward_head(rows, 1));  // NaN sits in the masked cell
}

TEST_CASE("batched forward equals single-row forward bit for bit") {
  const auto m = randomized_tiny_model(3, 2, 5);
  const auto rows = random_rows(5, 3, 8);
  const auto batched = m.forward_head(rows, 2);
  for (std::size_t r = 0; r < 5; ++r) {
    const auto single = m.forward_head(std::span<const double>(rows).subspan(r * 3, 3), 2);
    CHECK(std::equal(single.begin(), single.end(), batched.begin() + static_cast<std::ptrdiff_t>(r * 6)));
  }
}

TEST_CASE("pl_loss matches the straight-line reference forward") {
  DensityModel m(fastdad::testing::tiny_config(2), fastdad::testing::identity_space(3), 21);
  {
    Rng rng = make_stream(4, {});
    std::normal_distribution<double> dist(0.0, 0.4);
    for (double& p : m.mutable_parameters()) p = dist(rng);
  }
  const auto rows = random_rows(7, 3, 9);
  for (std::size_t i = 0; i < 3; ++i) {
    double expected = 0;
    for (std::size_t r = 0; r < 7; ++r) {
      expected += fastdad::testing::reference_nll(m, std::span<const double>(rows).subspan(r * 3, 3), i);
    }
    expected /= 7;
    CHECK(std::abs(m.pl_loss(rows, i) - expected) < 1e-10);
  }
  // Singleton batch: the loss is that row's negative log conditional.
  const std::span<const double> first(rows.data(), 3);
  const auto p = m.forward_conditionals(first, 0);
  CHECK(m.pl_loss(first, 0) == doctest::Approx(-mixture_logpdf(first[0], p[0])).epsilon(1e-14));
}

TEST_CASE("backward matches central finite differences") {
  auto m = randomized_tiny_model(3, 3, 17);
  const auto rows = random_rows(4, 3, 12);
  const std::size_t masked = 1;
  std::vector<double> grad(m.n_parameters());
  m.loss_and_gradient(rows, masked, grad);

  Rng pick = make_stream(5, {});
  std::size_t checked = 0;
  double worst = 0;
  for (const auto& t : m.tensors()) {
    std::uniform_int_distribution<std::size_t> idx(0, t.size - 1);
    for (int s = 0; s < 20; ++s) {
      const std::size_t at = t.offset + idx(pick);
      auto params = m.mutable_parameters();
      const double orig = params[at];
      const double h = 1e-5;
      params[at] = orig + h;
      const double up = m.pl_loss(rows, masked);
      params[at] = orig - h;
      const double down = m.pl_loss(rows, masked);
      params[at] = orig;
      const double fd = (up - down) / (2 * h);
      const double rel = std::abs(fd - grad[at]) / std::max(std::abs(grad[at]), 1e-8);
      worst = std::max(worst, rel);
      if (rel >= 1e-4) MESSAGE(t.name << " coord " << at << " analytic " << grad[at] << " fd " << fd);
      CHECK(rel < 1e-4);
      ++checked;
    }
  }
  CHECK(checked >= 20 * m.tensors().size());
  MESSAGE("worst relative gradient error " << worst);
}

TEST_CASE("gradient is zero for the embedding of the masked feature") {
  auto m = randomized_tiny_model(3, 3, 3);
  const auto rows = random_rows(5, 3, 4);
  std::vector<double> grad(m.n_parameters());
  m.loss_and_gradient(rows, 2, grad);
  const auto& w = m.tensor_info("embed.weight");
  const auto& b = m.tensor_info("embed.bias");
  const std::size_t H = m.config().d_hidden;
  for (std::size_t j = 0; j < H; ++j) {
    CHECK(grad[w.offset + 2 * H + j] == 0.0);
    CHECK(grad[b.offset + 2 * H + j] == 0.0);
  }
  double other = 0;
  for (std::size_t j = 0; j < H; ++j) other += std::abs(grad[w.offset + j]);
  CHECK(other > 0.0);
}

TEST_CASE("duplicating the batch leaves the gradient unchanged") {
  auto m = randomized_tiny_model(3, 3, 8);
  const auto rows = random_rows(4, 3, 6);
  auto doubled = rows;
  doubled.insert(doubled.end(), rows.begin(), rows.end());
  std::vector<double> g1(m.n_parameters()), g2(m.n_parameters());
  const double l1 = m.loss_and_gradient(rows, 0, g1);
  const double l2 = m.loss_and_gradient(doubled, 0, g2);
  CHECK(l1 == doctest::Approx(l2).epsilon(1e-13));
  for (std::size_t k = 0; k < g1.size(); ++k) CHECK(std::abs(g1[k] - g2[k]) <= 1e-12 * std::max(1.0, std::abs(g1[k])));
}

TEST_CASE("single-feature model predicts a marginal") {
  DensityModel m(fastdad::testing::tiny_config(2), fastdad::testing::identity_space(1), 3);
  const auto rows = random_rows(3, 1, 1);
  std::vector<double> grad(m.n_parameters());
  CHECK(std::isfinite(m.loss_and_gradient(rows, 0, grad)));
  const auto out = m.forward_conditionals(rows, 0);
  CHECK(out[0].means == out[2].means);
}

TEST_CASE("adam step") {
  AdamHyper hyper;
  hyper.learning_rate = 0.1;
  std::vector<double> p{1.0}, g{1.0};
  AdamState s(1);
  adam_step(p, g, s, hyper);
  CHECK(p[0] - 1.0 == doctest::Approx(-0.1).epsilon(1e-7));
  CHECK(s.step == 1);

  std::vector<double> q{0.5, -2.0}, zero{0.0, 0.0};
  AdamState s2(2);
  hyper.weight_decay = 0.0;
  adam_step(q, zero, s2, hyper);
  CHECK(q == std::vector<double>{0.5, -2.0});

  // Clipping: a norm-50 gradient with clip 5 is scaled by 0.1 before the
  // moments see it.
  hyper.grad_clip_norm = 5.0;
  std::vector<double> r{0.0, 0.0}, big{30.0, 40.0};
  AdamState s3(2);
  CHECK(adam_step(r, big, s3, hyper) == doctest::Approx(50.0));
  CHECK(s3.first_moment[0] == doctest::Approx(0.1 * 3.0));
  CHECK(s3.first_moment[1] == doctest::Approx(0.1 * 4.0));

  std::vector<double> bad{1.0};
  CHECK_THROWS(adam_step(bad, big, s3, hyper));
}

TEST_CASE("checkpoint round trip") {
  const auto m = randomized_tiny_model(3, 2, 1);
  const auto back = DensityModel::from_json(nlohmann::json::parse(m.to_json().dump()));
  CHECK(back == m);
  const auto rows = random_rows(2, 3, 1);
  CHECK(back.forward_head(rows, 0) == m.forward_head(rows, 0));
  auto j = m.to_json();
  j["schema_fingerprint"] = "0000000000000000";
  CHECK_THROWS(DensityModel::from_json(j));
}

namespace {

data::Table duplicated_column_table(std::size_t n, std::uint64_t seed) {
  Rng rng = make_stream(seed, {});
  std::vector<double> a(n);
  for (double& v : a) v = 2.0 * standard_normal(rng) + 1.0;
  return fastdad::testing::numeric_table({a, a});
}

ModelConfig small_test_config() {
  ModelConfig c;
  c.n_layers = 2;
  c.n_heads = 4;
  c.d_hidden = 16;
  c.n_components = 10;
  c.batch_size = 16;
  c.learning_rate = 3e-3;
  c.dropout = 0.0;
  return c;
}

}  // namespace

TEST_CASE("fit learns a duplicated column better than its marginal") {
  const auto train = duplicated_column_table(500, 1);
  const auto val = duplicated_column_table(100, 2);
  const auto test = duplicated_column_table(200, 3);
  FitOptions opts;
  opts.max_epochs = 25;
  opts.patience = 10;
  const auto result = fit(train, val, small_test_config(), 7, opts);

  // Marginal-only baseline: a single Gaussian fit to x2 in model space.
  Rng rng = make_stream(0, {});
  const auto train_rows = encode_rows(result.model.space(), train, rng);
  const auto test_rows = encode_rows(result.model.space(), test, rng);
  double mean = 0, var = 0;
  for (std::size_t r = 0; r < 500; ++r) mean += train_rows[r * 2 + 1];
  mean /= 500;
  for (std::size_t r = 0; r < 500; ++r) var += (train_rows[r * 2 + 1] - mean) * (train_rows[r * 2 + 1] - mean);
  var /= 500;
  double marginal = 0, conditional = 0;
  const auto conds = result.model.forward_conditionals(test_rows, 1);
  for (std::size_t r = 0; r < 200; ++r) {
    const double x = test_rows[r * 2 + 1];
    marginal += -0.5 * std::log(2 * std::numbers::pi * var) - 0.5 * (x - mean) * (x - mean) / var;
    conditional += mixture_logpdf(x, conds[r]);
  }
  MESSAGE("conditional " << conditional / 200 << " marginal " << marginal / 200);
  CHECK(conditional > marginal);

  // Best-checkpoint rule.
  double best = -1e300;
  for (const auto& e : result.history) best = std::max(best, e.val_pseudolikelihood);
  Rng vrng = make_stream(7, {0x7A11ULL});
  const auto val_rows = encode_rows(result.model.space(), val, vrng);
  CHECK(result.model.mean_pseudolikelihood(val_rows) == doctest::Approx(best).epsilon(1e-12));
  for (const auto& e : result.history) CHECK(best >= e.val_pseudolikelihood);
}

TEST_CASE("fit is deterministic per seed") {
  const auto train = duplicated_column_table(60, 4);
  const auto val = duplicated_column_table(20, 5);
  FitOptions opts;
  opts.max_epochs = 3;
  ModelConfig c = small_test_config();
  c.dropout = 0.1;
  std::ostringstream log;
  opts.log = &log;
  const auto a = fit(train, val, c, 99, opts);
  const auto b = fit(train, val, c, 99, opts);
  CHECK(a.model == b.model);
  CHECK(log.str().find("epoch 1 ") != std::string::npos);
  const auto other = fit(train, val, c, 100, opts);
  CHECK(!(other.model == a.model));
  CHECK_THROWS(fit(train.select_rows(std::vector<std::size_t>{}), val, c, 1, opts));
}
