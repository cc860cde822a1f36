#include <random>
#include <vector>

#include "doctest.h"
#include "sicerp/simd.hpp"

using namespace sicerp::simd;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

double naive_dot(const std::vector<double>& a, const std::vector<double>& b) {
  long double acc = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<long double>(a[i]) * b[i];
  return static_cast<double>(acc);
}

}  // namespace

TEST_CASE("scalar kernels match long-double references") {
  std::mt19937_64 rng(7);
  for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 17u, 400u, 1023u}) {
    const auto a = random_vector(rng, n);
    const auto b = random_vector(rng, n);
    const double ref = naive_dot(a, b);
    CHECK(scalar::dot(a.data(), b.data(), n) == doctest::Approx(ref).epsilon(1e-12));

    std::vector<double> diff(n);
    for (std::size_t i = 0; i < n; ++i) diff[i] = a[i] - b[i];
    CHECK(scalar::squared_distance(a.data(), b.data(), n) ==
          doctest::Approx(naive_dot(diff, diff)).epsilon(1e-12));
  }
}

TEST_CASE("avx2 kernels are equivalent to the scalar reference") {
  if (!cpu_has_avx2()) {
    MESSAGE("AVX2 not available; skipping equivalence check");
    return;
  }
  const KernelTable& fast = table_for(Isa::Avx2);
  const KernelTable& ref = table_for(Isa::Scalar);
  REQUIRE(fast.dot != ref.dot);

  std::mt19937_64 rng(11);
  for (std::size_t n = 0; n < 300; n += 7) {
    const auto a = random_vector(rng, n);
    const auto b = random_vector(rng, n);
    const double scale = std::max(1.0, naive_dot(a, a) + naive_dot(b, b));
    CHECK(std::abs(fast.dot(a.data(), b.data(), n) - ref.dot(a.data(), b.data(), n)) <= 1e-14 * scale);
    CHECK(std::abs(fast.squared_distance(a.data(), b.data(), n) -
                   ref.squared_distance(a.data(), b.data(), n)) <= 1e-14 * scale);

    auto y1 = random_vector(rng, n);
    auto y2 = y1;
    fast.axpy(0.37, a.data(), y1.data(), n);
    ref.axpy(0.37, a.data(), y2.data(), n);
    for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-15));
  }
}

TEST_CASE("dispatch is stable and named") {
  CHECK(&active() == &active());
  const auto name = isa_name(active_isa());
  CHECK((name == "scalar" || name == "avx2"));
}
