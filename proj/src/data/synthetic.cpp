#include "fastdad/data/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fastdad/rng.hpp"

namespace fastdad::data {

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

Table make_spiral(std::size_t n, std::uint64_t seed, double noise) {
  Rng rng = make_stream(seed, {0x5917A1ULL});
  std::vector<double> x(n), y(n), arm(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double t = std::sqrt(uniform01(rng)) * 540.0 * 2.0 * kPi / 360.0;
    const double jx = uniform01(rng) * 0.5;
    const double jy = uniform01(rng) * 0.5;
    double px = -std::cos(t) * t + jx;
    double py = std::sin(t) * t + jy;
    const bool flip = r % 2 == 1;
    if (flip) {
      px = -px;
      py = -py;
    }
    x[r] = px / 3.0 + noise * standard_normal(rng);
    y[r] = py / 3.0 + noise * standard_normal(rng);
    arm[r] = flip ? 1.0 : 0.0;
  }
  Schema s({{"x", ColumnKind::numeric()}, {"y", ColumnKind::numeric()},
            {"arm", ColumnKind::categorical({"inner", "outer"})}});
  s.set_target(2, TaskKind::binary());
  return Table(s, {std::move(x), std::move(y), std::move(arm)});
}

Table make_checkerboard(std::size_t n, std::uint64_t seed, double label_noise) {
  Rng rng = make_stream(seed, {0xC4EC6ULL});
  std::vector<double> x(n), y(n), label(n);
  for (std::size_t r = 0; r < n; ++r) {
    const double x1 = uniform01(rng) * 4.0 - 2.0;
    const double shift = (rng() & 1ULL) ? 2.0 : 0.0;
    const double x2 = uniform01(rng) - shift + std::fmod(std::floor(x1) + 4.0, 2.0);
    x[r] = 2.0 * x1;
    y[r] = 2.0 * x2;
    const double angle = std::atan2(y[r], x[r]) + kPi;
    int cls = std::min(2, static_cast<int>(angle / (2.0 * kPi / 3.0)));
    if (uniform01(rng) < label_noise) cls = static_cast<int>(rng() % 3);
    label[r] = cls;
  }
  Schema s({{"x", ColumnKind::numeric()}, {"y", ColumnKind::numeric()},
            {"sector", ColumnKind::categorical({"s0", "s1", "s2"})}});
  s.set_target(2, TaskKind::multiclass(3));
  return Table(s, {std::move(x), std::move(y), std::move(label)});
}

Table make_linear(std::size_t n, std::uint64_t seed, double noise) {
  Rng rng = make_stream(seed, {0x11AEA2ULL});
  const double offsets[3] = {-1.0, 0.5, 2.0};
  std::vector<double> a(n), b(n), c(n), level(n), target(n);
  for (std::size_t r = 0; r < n; ++r) {
    a[r] = standard_normal(rng);
    b[r] = standard_normal(rng);
    c[r] = standard_normal(rng);
    level[r] = static_cast<double>(rng() % 3);
    target[r] = 1.5 * a[r] - 2.0 * b[r] + 0.5 * c[r] + offsets[static_cast<int>(level[r])] +
                noise * standard_normal(rng);
  }
  Schema s({{"a", ColumnKind::numeric()}, {"b", ColumnKind::numeric()}, {"c", ColumnKind::numeric()},
            {"level", ColumnKind::categorical({"low", "mid", "high"})}, {"target", ColumnKind::numeric()}});
  s.set_target(4, TaskKind::regression());
  return Table(s, {std::move(a), std::move(b), std::move(c), std::move(level), std::move(target)});
}

const std::vector<std::string>& builtin_dataset_names() {
  static const std::vector<std::string> names{"spiral", "checkerboard", "linear"};
  return names;
}

Table make_builtin(const std::string& name, std::size_t n, std::uint64_t seed) {
  if (name == "spiral") return make_spiral(n, seed);
  if (name == "checkerboard") return make_checkerboard(n, seed);
  if (name == "linear") return make_linear(n, seed);
  throw std::invalid_argument("unknown built-in dataset: " + name);
}

}  // namespace fastdad::data
