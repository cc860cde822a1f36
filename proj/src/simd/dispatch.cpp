#include <cstdlib>
#include <cstring>

#include "sicerp/simd.hpp"

namespace sicerp::simd {

#if defined(SICERP_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double squared_distance(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
}  // namespace avx2
#endif

namespace {

constexpr KernelTable kScalarTable{&scalar::dot, &scalar::squared_distance, &scalar::axpy};
#if defined(SICERP_HAVE_AVX2)
constexpr KernelTable kAvx2Table{&avx2::dot, &avx2::squared_distance, &avx2::axpy};
#endif

Isa detect() {
  const char* forced = std::getenv("SICERP_SIMD");
  if (forced != nullptr && std::strcmp(forced, "scalar") == 0) return Isa::Scalar;
  return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
}

}  // namespace

bool cpu_has_avx2() {
#if defined(SICERP_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& table_for(Isa isa) {
#if defined(SICERP_HAVE_AVX2)
  if (isa == Isa::Avx2 && cpu_has_avx2()) return kAvx2Table;
#else
  (void)isa;
#endif
  return kScalarTable;
}

Isa active_isa() {
  static const Isa isa = detect();
  return isa;
}

const KernelTable& active() {
  static const KernelTable& table = table_for(active_isa());
  return table;
}

std::string_view isa_name(Isa isa) {
  return isa == Isa::Avx2 ? "avx2" : "scalar";
}

}  // namespace sicerp::simd
