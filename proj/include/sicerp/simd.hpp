#pragma once

#include <cstddef>
#include <span>
#include <string_view>

// Reduction kernels used by the hot loops (Frobenius distances, Gram-block
// contractions, lasso coordinate updates). A scalar reference and, on x86-64,
// an AVX2+FMA variant exist; the variant is picked once per process.
namespace sicerp::simd {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
};

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace scalar


bool cpu_has_avx2();

// Table for a specific ISA; falls back to scalar when unavailable.
const KernelTable& table_for(Isa isa);

// Process-wide table. SICERP_SIMD=scalar in the environment forces the
// scalar path.
const KernelTable& active();
Isa active_isa();
std::string_view isa_name(Isa isa);

inline double dot(std::span<const double> a, std::span<const double> b) {
  return active().dot(a.data(), b.data(), a.size());
}
inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  return active().squared_distance(a.data(), b.data(), a.size());
}
inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  active().axpy(alpha, x.data(), y.data(), x.size());
}

}  // namespace sicerp::simd
