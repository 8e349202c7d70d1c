#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "fastdad/simd/kernels.hpp"

namespace fastdad::simd {

namespace {

struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  double (*squared_distance)(const double*, const double*, std::size_t);
  double (*sum)(const double*, std::size_t);
};

constexpr KernelTable kScalarTable{scalar::dot, scalar::axpy, scalar::squared_distance,
                                   scalar::sum};
constexpr KernelTable kAvx2Table{avx2::dot, avx2::axpy, avx2::squared_distance, avx2::sum};

Isa detect_default() {
  if (const char* env = std::getenv("FASTDAD_SIMD")) {
    if (std::string(env) == "scalar") return Isa::Scalar;
  }
  return isa_supported(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<const KernelTable*>& table() {
  static std::atomic<const KernelTable*> current{detect_default() == Isa::Avx2 ? &kAvx2Table
                                                                               : &kScalarTable};
  return current;
}

inline const KernelTable& kernels() { return *table().load(std::memory_order_relaxed); }

}  // namespace

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

bool isa_supported(Isa isa) {
  if (isa == Isa::Scalar) return true;
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa active_isa() { return &kernels() == &kAvx2Table ? Isa::Avx2 : Isa::Scalar; }

void set_active_isa(Isa isa) {
  if (!isa_supported(isa)) {
    throw std::runtime_error("SIMD variant not supported on this CPU: " + std::string(isa_name(isa)));
  }
  table().store(isa == Isa::Avx2 ? &kAvx2Table : &kScalarTable);
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  return kernels().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("axpy: length mismatch");
  kernels().axpy(alpha, x.data(), y.data(), x.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("squared_distance: length mismatch");
  return kernels().squared_distance(a.data(), b.data(), a.size());
}

double sum(std::span<const double> a) { return kernels().sum(a.data(), a.size()); }

void matmul_acc(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
                std::size_t n) {
  const auto axpy_fn = kernels().axpy;
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* orow = out + i * n;
    for (std::size_t j = 0; j < k; ++j) {
      if (arow[j] != 0.0) axpy_fn(arow[j], b + j * n, orow, n);
    }
  }
}

void matmul_bt_acc(const double* g, const double* b, double* out, std::size_t m, std::size_t k,
                   std::size_t n) {
  const auto dot_fn = kernels().dot;
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    double* orow = out + i * k;
    for (std::size_t j = 0; j < k; ++j) orow[j] += dot_fn(grow, b + j * n, n);
  }
}

void matmul_at_acc(const double* a, const double* g, double* out, std::size_t m, std::size_t k,
                   std::size_t n) {
  const auto axpy_fn = kernels().axpy;
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* grow = g + i * n;
    for (std::size_t j = 0; j < k; ++j) {
      if (arow[j] != 0.0) axpy_fn(arow[j], grow, out + j * n, n);
    }
  }
}

}  // namespace fastdad::simd
