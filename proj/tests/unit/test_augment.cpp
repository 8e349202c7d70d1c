#include <doctest.h>

#include <cmath>
#include <limits>

#include "fastdad/augment/strategies.hpp"
#include "fastdad/data/synthetic.hpp"
#include "fastdad/data/transform.hpp"
#include "fastdad/learn/forest.hpp"
#include "support/oracles.hpp"

using namespace fastdad;
using namespace fastdad::augment;
using learn::SoftTargets;

namespace {

data::Table numeric(std::vector<std::vector<double>> cols) {
  std::vector<data::ColumnSpec> specs;
  for (std::size_t j = 0; j < cols.size(); ++j) specs.push_back({"x" + std::to_string(j), data::ColumnKind::numeric()});
  return data::Table(data::Schema(specs), std::move(cols));
}

// Fixed-output classifier for label tests.
class ConstantTeacher final : public learn::Learner {
 public:
  ConstantTeacher(data::TaskKind task, std::vector<double> row) : task_(task), row_(std::move(row)) {}
  std::string type_name() const override { return "constant"; }
  const data::TaskKind& task() const override { return task_; }
  SoftTargets predict(const data::FeatureMatrix& f) const override {
    SoftTargets out = learn::empty_targets(task_);
    for (std::size_t r = 0; r < f.n_rows; ++r) out.values.insert(out.values.end(), row_.begin(), row_.end());
    return out;
  }
  std::size_t parameter_count() const override { return row_.size(); }
  nlohmann::json info() const override { return {}; }
  nlohmann::json to_json() const override { return {}; }

 private:
  data::TaskKind task_;
  std::vector<double> row_;
};

gibbs::AugmentedSet rows_of(std::size_t n, std::size_t d) {
  gibbs::AugmentedSet a;
  a.features.n_rows = n;
  a.features.n_cols = d;
  a.features.values.assign(n * d, 0.0);
  a.features.cardinalities.assign(d, 0);
  return a;
}

}  // namespace

TEST_CASE("munge grid is exactly the searched set") {
  CHECK(MungeParams::swap_grid() == std::vector<double>{0.1, 0.25, 0.5, 0.75});
  CHECK(MungeParams::variance_grid() == std::vector<double>{0.5, 1.0, 5.0});
  const auto g = MungeParams::grid();
  CHECK(g.size() == 12);
  CHECK(g.front() == MungeParams{0.1, 0.5});
  CHECK(g.back() == MungeParams{0.75, 5.0});
}

TEST_CASE("munge with zero swap probability is the identity") {
  const auto t = data::make_linear(40, 2);
  const auto out = munge(t, {0.0, 1.0}, 3, 9);
  const auto fm = t.features();
  REQUIRE(out.size() == 120);
  for (std::size_t pass = 0; pass < 3; ++pass)
    for (std::size_t r = 0; r < 40; ++r)
      for (std::size_t j = 0; j < fm.n_cols; ++j) CHECK(out.features.at(pass * 40 + r, j) == fm.at(r, j));
}

TEST_CASE("munge with certain swaps and vanishing spread copies the neighbour") {
  const auto t = numeric({{0.0, 10.0}});
  const auto out = munge(t, {1.0, std::numeric_limits<double>::infinity()}, 1, 1);
  CHECK(out.features.values == std::vector<double>{10.0, 0.0});
  CHECK_THROWS(munge(numeric({{1.0}}), {0.5, 1.0}, 1, 1));
}

TEST_CASE("nearest neighbours match brute force") {
  const auto t = numeric({{0.0, 0.1, 5.0}, {0.0, 0.0, 5.0}});
  CHECK(nearest_neighbors(t)[0] == 1);

  Rng rng = make_stream(8, {});
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 9;
    std::vector<double> a(n), b(n), k(n);
    for (std::size_t r = 0; r < n; ++r) {
      a[r] = std::round(3 * standard_normal(rng));
      b[r] = standard_normal(rng);
      k[r] = static_cast<double>(rng() % 2);
    }
    data::Table tab(data::Schema({{"a", data::ColumnKind::numeric()}, {"b", data::ColumnKind::numeric()},
                                  {"k", data::ColumnKind::categorical({"u", "v"})}}),
                    {a, b, k});
    const auto stats = data::fit_standardization(tab);
    const auto nn = nearest_neighbors(tab);
    CHECK(nn == fastdad::testing::brute_force_neighbors(tab));
    for (std::size_t r = 0; r < n; ++r) {
      std::size_t best = r == 0 ? 1 : 0;
      for (std::size_t o = 0; o < n; ++o) {
        if (o != r && munge_distance(tab, stats, r, o) < munge_distance(tab, stats, r, best)) best = o;
      }
      CHECK(nn[r] == best);
    }
  }
}

TEST_CASE("munge is deterministic and keeps codes valid") {
  const auto t = data::make_linear(30, 5);
  const auto a = munge(t, {0.5, 1.0}, 2, 4);
  const auto b = munge(t, {0.5, 1.0}, 2, 4);
  CHECK(a.features.values == b.features.values);
  CHECK_NOTHROW(a.to_table().validate());
}

TEST_CASE("hard labels") {
  const auto aug = rows_of(2, 1);
  ConstantTeacher bin(data::TaskKind::binary(), {0.8});
  CHECK(hunge_labels(bin, aug).values == std::vector<double>{1.0, 1.0});
  ConstantTeacher tie(data::TaskKind::multiclass(3), {0.4, 0.4, 0.2});
  CHECK(hunge_labels(tie, aug).values == std::vector<double>{1, 0, 0, 1, 0, 0});
  CHECK(harden(data::TaskKind::binary(), SoftTargets{SoftTargets::Kind::Scalar, 1, {0.5}}).values[0] == 0.0);
  ConstantTeacher reg(data::TaskKind::regression(), {1.5});
  CHECK_THROWS(hunge_labels(reg, aug));

  // Hard labels are never closer to the teacher in Brier score than the
  // teacher's own probabilities.
  const SoftTargets probs{SoftTargets::Kind::ProbVector, 3, {0.5, 0.3, 0.2, 0.1, 0.1, 0.8, 0.34, 0.33, 0.33}};
  const auto hard = harden(data::TaskKind::multiclass(3), probs);
  double brier_hard = 0, brier_soft = 0;
  for (std::size_t k = 0; k < probs.values.size(); ++k) {
    brier_hard += (hard.values[k] - probs.values[k]) * (hard.values[k] - probs.values[k]);
  }
  CHECK(brier_hard >= brier_soft);
  CHECK(brier_hard > 0);
}

TEST_CASE("know targets") {
  const auto task = data::TaskKind::multiclass(3);
  const SoftTargets probs{SoftTargets::Kind::ProbVector, 3, {0.7, 0.2, 0.1, 0.1, 0.1, 0.8}};
  const std::vector<double> labels{0, 2};
  const auto same = know_targets(task, probs, labels, {1.0, 0.0});
  for (std::size_t k = 0; k < probs.values.size(); ++k) CHECK(same.values[k] == doctest::Approx(probs.values[k]).epsilon(1e-14));
  const auto hard = know_targets(task, probs, labels, {2.0, 1.0});
  CHECK(hard.values == std::vector<double>{1, 0, 0, 0, 0, 1});
  const auto flat = know_targets(task, probs, labels, {1e12, 0.0});
  for (double v : flat.values) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-9));
  CHECK_NOTHROW(know_targets(task, probs, labels, {2.0, 0.25}).validate());

  const SoftTargets bin{SoftTargets::Kind::Scalar, 1, {0.1}};
  const auto b = know_targets(data::TaskKind::binary(), bin, std::vector<double>{1}, {2.0, 0.0});
  const double e0 = std::sqrt(0.9), e1 = std::sqrt(0.1);
  CHECK(b.values[0] == doctest::Approx(e1 / (e0 + e1)).epsilon(1e-14));
  CHECK(1 - b.values[0] == doctest::Approx(0.75).epsilon(0.01));

  CHECK_THROWS(know_targets(task, probs, labels, {0.0, 0.1}));
  CHECK_THROWS(know_targets(task, probs, labels, {1.0, 1.5}));
  const SoftTargets reg{SoftTargets::Kind::Scalar, 1, {2.0}};
  CHECK(know_targets(data::TaskKind::regression(), reg, std::vector<double>{4.0}, {2.0, 0.25}).values[0] == 2.5);
}

TEST_CASE("teacher labels") {
  const auto aug = rows_of(3, 1);
  ConstantTeacher bin(data::TaskKind::binary(), {0.73});
  CHECK(teacher_label(bin, aug, data::TaskKind::binary()).values == std::vector<double>{0.73, 0.73, 0.73});
  CHECK_THROWS(teacher_label(bin, aug, data::TaskKind::multiclass(3)));

  const auto data = data::make_checkerboard(120, 2);
  learn::ForestConfig fc;
  fc.n_trees = 10;
  const auto forest = learn::RandomForest::fit(learn::labeled_set(data), fc);
  const auto self = teacher_label(*forest, gibbs::as_augmented(data), data.schema().task());
  CHECK_NOTHROW(self.validate());
  const double agreement = learn::task_metric(data.schema().task(), self, data.target_values());
  const double train_acc = learn::task_metric(data.schema().task(), forest->predict(data.features()), data.target_values());
  CHECK(agreement == train_acc);
}

TEST_CASE("assemble") {
  const auto train = data::make_checkerboard(2, 1);
  auto empty = gibbs::as_augmented(train.select_rows(std::vector<std::size_t>{}));
  const auto alone = assemble(train, empty, learn::empty_targets(train.schema().task()));
  const auto labeled = learn::labeled_set(train);
  CHECK(alone.features.values == labeled.features.values);
  CHECK(alone.targets == labeled.targets);

  const auto extra = data::make_checkerboard(3, 2);
  const auto aug = gibbs::as_augmented(extra);
  SoftTargets t{SoftTargets::Kind::ProbVector, 3, {0.2, 0.3, 0.5, 1, 0, 0, 0.1, 0.1, 0.8}};
  const auto set = assemble(train, aug, t);
  CHECK(set.n_rows() == 5);
  CHECK(set.augmented == std::vector<bool>{false, false, true, true, true});
  CHECK_NOTHROW(set.targets.validate());
  CHECK_THROWS(assemble(train, aug, SoftTargets{SoftTargets::Kind::Scalar, 1, {0.1, 0.2, 0.3}}));
}
