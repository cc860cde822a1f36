#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "sicerp/glasso.hpp"

using namespace sicerp;

namespace {

Eigen::MatrixXd mat2(double a, double b, double c, double d) {
  Eigen::MatrixXd m(2, 2);
  m << a, b, c, d;
  return m;
}

std::vector<double> log_grid(double lambda_max, int t, double ratio) {
  std::vector<double> out;
  for (int i = 0; i < t; ++i) {
    const double frac = t == 1 ? 1.0 : static_cast<double>(i) / (t - 1);
    out.push_back(lambda_max * std::pow(ratio, 1.0 - frac));
  }
  return out;
}

double max_off_diagonal(const Eigen::MatrixXd& s) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index j = 0; j < s.cols(); ++j)
      if (i != j) m = std::max(m, std::abs(s(i, j)));
  return m;
}

}  // namespace

TEST_CASE("sice_objective examples") {
  const SampleCovariance eye(Eigen::MatrixXd::Identity(2, 2));
  CHECK(sice_objective(eye, 0.0, SpdMatrix::identity(2)) == doctest::Approx(-2.0));

  std::mt19937_64 rng(1);
  const Eigen::MatrixXd sig = oracle::random_spd(rng, 3);
  const SampleCovariance sigma(sig);
  CHECK(sice_objective(sigma, 0.0, SpdMatrix(sig.inverse())) ==
        doctest::Approx(-oracle::log_det(sig) - 3.0).epsilon(1e-12));

  const SampleCovariance d12(mat2(1, 0, 0, 2));
  const double expected = std::log(2.0 / 3) + std::log(2.0 / 5) - (2.0 / 3 + 4.0 / 5) -
                          0.5 * (2.0 / 3 + 2.0 / 5);
  CHECK(sice_objective(d12, 0.5, SpdMatrix(mat2(2.0 / 3, 0, 0, 2.0 / 5))) ==
        doctest::Approx(expected).epsilon(1e-14));

  try {
    sice_objective(d12, 0.5, SpdMatrix::identity(3));
    FAIL("expected DimensionError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionError);
  }
}

TEST_CASE("kkt_residual examples") {
  const SampleCovariance s21(mat2(2, 1, 1, 2));
  CHECK(kkt_residual(s21, 0.0, SpdMatrix(mat2(2.0 / 3, -1.0 / 3, -1.0 / 3, 2.0 / 3))) <= 1e-10);

  const SampleCovariance d12(mat2(1, 0, 0, 2));
  CHECK(kkt_residual(d12, 0.5, SpdMatrix(mat2(1 / 1.5, 0, 0, 1 / 2.5))) <= 1e-10);

  // W = I: off-diagonal |0 - 1| - 0.1 = 0.9; diagonal |1 - 2 - 0.1| = 1.1 dominates.
  const double r = kkt_residual(s21, 0.1, SpdMatrix::identity(2));
  CHECK(r >= 0.9);
  CHECK(r == doctest::Approx(1.1));
}

TEST_CASE("glasso_solve closed forms") {
  const auto s0 = glasso_solve(SampleCovariance(mat2(2, 1, 1, 2)), 0.0);
  CHECK(s0.estimate(0, 0) == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(s0.estimate(0, 1) == doctest::Approx(-1.0 / 3).epsilon(1e-12));
  CHECK(s0.kkt_residual <= 1e-10);

  const auto diag = glasso_solve(SampleCovariance(mat2(1, 0, 0, 2)), 0.5);
  CHECK(diag.estimate(0, 0) == doctest::Approx(1 / 1.5).epsilon(1e-10));
  CHECK(diag.estimate(1, 1) == doctest::Approx(0.4).epsilon(1e-10));
  CHECK(diag.estimate(0, 1) == 0.0);

  const auto sparse = glasso_solve(SampleCovariance(mat2(1, 0.3, 0.3, 1)), 0.5);
  CHECK(sparse.estimate(0, 0) == doctest::Approx(1 / 1.5).epsilon(1e-10));
  CHECK(sparse.estimate(1, 1) == doctest::Approx(1 / 1.5).epsilon(1e-10));
  CHECK(std::abs(sparse.estimate(0, 1)) < 1e-9);
  CHECK(sparse.kkt_residual <= 1e-6);
}

TEST_CASE("glasso_solve error paths") {
  const SampleCovariance singular(mat2(1, 1, 1, 1));
  try {
    glasso_solve(singular, 0.0);
    FAIL("expected SingularityError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularityError);
  }
  // Positive penalty handles the singular input.
  const auto sol = glasso_solve(singular, 0.1);
  CHECK(sol.kkt_residual <= 1e-6);

  std::mt19937_64 rng(4);
  const SampleCovariance sigma(oracle::random_sample_covariance(rng, 8, 5));
  try {
    glasso_solve(sigma, 0.01, GlassoOptions{1e-14, 1});
    FAIL("expected NotConverged");
  } catch (const NotConvergedError& e) {
    CHECK(e.kind() == ErrorKind::NotConverged);
    CHECK(e.residual > 1e-14);
    CHECK(e.best_iterate.rows() == 8);
  }
  CHECK_THROWS_AS(glasso_solve(sigma, -1.0), Error);
}

TEST_CASE("glasso_solve matches the smoothed-objective oracle on a 3x3 instance") {
  std::mt19937_64 rng(2024);
  const Eigen::MatrixXd sig = oracle::random_sample_covariance(rng, 3, 6);
  const auto sol = glasso_solve(SampleCovariance(sig), 0.2);
  const Eigen::MatrixXd ref = oracle::smoothed_sice(sig, 0.2, 1000000);
  CHECK((sol.estimate.matrix() - ref).cwiseAbs().maxCoeff() <= 1e-3);
  CHECK(sol.objective >= oracle::sice_objective(sig, 0.2, ref) - 1e-6);
}

TEST_CASE("glasso_solve certificates on random instances") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index d = 3 + trial % 2;
    const Eigen::MatrixXd sig = oracle::random_sample_covariance(rng, d, 2 * d);
    for (double lambda : {0.05, 0.2}) {
      const auto sol = glasso_solve(SampleCovariance(sig), lambda);
      CHECK(min_eigenvalue(sol.estimate.matrix()) > 0.0);
      CHECK(sol.kkt_residual <= 1e-6);
      CHECK(sol.kkt_residual == doctest::Approx(kkt_residual(SampleCovariance(sig), lambda, sol.estimate)));
      const Eigen::MatrixXd ref = oracle::smoothed_sice(sig, lambda, 20000);
      CHECK(sol.objective >= oracle::sice_objective(sig, lambda, ref) - 1e-6);
      // Dual iterates never lose log-determinant.
      for (std::size_t k = 1; k < sol.dual_trace.size(); ++k) {
        CHECK(sol.dual_trace[k] >= sol.dual_trace[k - 1] - 1e-10);
      }
    }
  }
}

TEST_CASE("glasso_solve handles d = 100 quickly") {
  std::mt19937_64 rng(100);
  const Eigen::MatrixXd sig = oracle::random_sample_covariance(rng, 100, 150);
  const auto sol = glasso_solve(SampleCovariance(sig), 0.1);
  CHECK(sol.kkt_residual <= 1e-6);
}

TEST_CASE("glasso_path examples") {
  std::mt19937_64 rng(12);
  const Eigen::MatrixXd sig = oracle::random_sample_covariance(rng, 5, 12);
  const SampleCovariance sigma(sig);

  const double one[] = {0.1};
  const auto single = glasso_path(sigma, one);
  REQUIRE(single.solutions.size() == 1);
  CHECK(single.solutions[0].estimate.matrix().isApprox(glasso_solve(sigma, 0.1).estimate.matrix(), 1e-12));

  const double dg[] = {1.0, 2.0, 0.5};
  const SampleCovariance diag(SymMatrix::diagonal(dg));
  const double grid[] = {0.01, 0.1, 1.0};
  const auto dpath = glasso_path(diag, grid);
  for (std::size_t t = 0; t < 3; ++t) {
    const Eigen::MatrixXd& s = dpath.solutions[t].estimate.matrix();
    CHECK(max_off_diagonal(s) == 0.0);
    for (int i = 0; i < 3; ++i) {
      CHECK(s(i, i) == doctest::Approx(1.0 / (dg[i] + grid[t])).epsilon(1e-10));
      if (t > 0) CHECK(s(i, i) < dpath.solutions[t - 1].estimate(i, i));
    }
  }

  const double bad[] = {0.2, 0.1};
  CHECK_THROWS_AS(glasso_path(sigma, bad), Error);
  const double zero[] = {0.0, 0.1};
  CHECK_THROWS_AS(glasso_path(sigma, zero), Error);
}

TEST_CASE("glasso_path reports support growth as warnings") {
  // The exact L1 path is not nested on every instance: small-sample 10x10
  // problems regularly have entries entering the support as lambda grows.
  // Those are reported, never thrown.
  std::mt19937_64 rng(31);
  int instances_with_growth = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd sig = oracle::random_sample_covariance(rng, 10, 8);
    const auto grid = log_grid(max_off_diagonal(sig), 10, 0.01);
    const auto path = glasso_path(SampleCovariance(sig), grid);
    std::size_t levels_with_growth = 0;
    for (std::size_t t = 1; t < grid.size(); ++t) {
      if (support_violations(path.solutions[t - 1].estimate.matrix(),
                             path.solutions[t].estimate.matrix()) > 0) {
        ++levels_with_growth;
      }
      CHECK(path.solutions[t].kkt_residual <= 1e-6);
    }
    CHECK(path.warnings.size() == levels_with_growth);
    if (levels_with_growth > 0) ++instances_with_growth;
    // lambda_max = max |sigma_ij| makes the sparsest level diagonal.
    CHECK(off_diagonal_nonzeros(path.solutions.back().estimate.matrix()) == 0);
    CHECK(off_diagonal_nonzeros(path.solutions.front().estimate.matrix()) >=
          off_diagonal_nonzeros(path.solutions.back().estimate.matrix()));
  }
  MESSAGE(instances_with_growth << " of 10 instances show support growth");
}

TEST_CASE("glasso_path is nested on a chain-structured covariance") {
  // Inverse of a tridiagonal precision: supports shrink monotonically here.
  const int d = 6;
  Eigen::MatrixXd prec = Eigen::MatrixXd::Identity(d, d) * 2.0;
  for (int i = 0; i + 1 < d; ++i) prec(i, i + 1) = prec(i + 1, i) = -0.8;
  const Eigen::MatrixXd sig = prec.inverse();
  const auto grid = log_grid(max_off_diagonal(sig), 10, 0.01);
  const auto path = glasso_path(SampleCovariance(sig), grid);
  CHECK(path.warnings.empty());
  for (std::size_t t = 1; t < grid.size(); ++t) {
    CHECK(off_diagonal_nonzeros(path.solutions[t].estimate.matrix()) <=
          off_diagonal_nonzeros(path.solutions[t - 1].estimate.matrix()));
  }
}

TEST_CASE("warm-started path agrees with cold per-level solves") {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd sig = oracle::random_sample_covariance(rng, 8, 10);
    const auto grid = log_grid(max_off_diagonal(sig), 6, 0.05);
    const SampleCovariance sigma(sig);
    const auto path = glasso_path(sigma, grid);
    for (std::size_t t = 0; t < grid.size(); ++t) {
      const auto cold = glasso_solve(sigma, grid[t]);
      CHECK((cold.estimate.matrix() - path.solutions[t].estimate.matrix()).cwiseAbs().maxCoeff() <= 1e-6);
    }
  }
}
