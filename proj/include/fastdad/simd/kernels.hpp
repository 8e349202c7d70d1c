#pragma once

// Dense double-precision inner loops used by the density model, the MLP,
// MMD and nearest-neighbour search. Every kernel has a scalar reference
// implementation and, on x86-64, an AVX2+FMA variant chosen at runtime.

#include <cstddef>
#include <span>
#include <string_view>

namespace fastdad::simd {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

// True when the running CPU can execute the given variant.
bool isa_supported(Isa isa);

// The variant used by the dispatching entry points. Defaults to the best
// supported variant; FASTDAD_SIMD=scalar in the environment forces Scalar.
Isa active_isa();

// Switches the dispatch table. Throws if `isa` is unsupported on this CPU.
void set_active_isa(Isa isa);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
}  // namespace scalar

namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
double sum(const double* a, std::size_t n);
}  // namespace avx2

double dot(std::span<const double> a, std::span<const double> b);
// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y);
double squared_distance(std::span<const double> a, std::span<const double> b);
double sum(std::span<const double> a);

// Row-major dense products built on the kernels above.
//   out[m x n] += a[m x k] * b[k x n]
void matmul_acc(const double* a, const double* b, double* out, std::size_t m, std::size_t k,
                std::size_t n);
//   out[m x k] += g[m x n] * b[k x n]^T
void matmul_bt_acc(const double* g, const double* b, double* out, std::size_t m, std::size_t k,
                   std::size_t n);
//   out[k x n] += a[m x k]^T * g[m x n]
void matmul_at_acc(const double* a, const double* g, double* out, std::size_t m, std::size_t k,
                   std::size_t n);

}  // namespace fastdad::simd
