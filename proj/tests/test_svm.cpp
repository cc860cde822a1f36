#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "toy.hpp"
#include "sicerp/svm.hpp"

using namespace sicerp;
using toy::Toy;
using toy::make_toy;

namespace {

Eigen::MatrixXd two_point(double diag, double off) {
  Eigen::MatrixXd k(2, 2);
  k << diag, off, off, diag;
  return k;
}

Eigen::VectorXd pm(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Eigen::MatrixXd random_gram(std::mt19937_64& rng, Eigen::Index n, Eigen::Index features) {
  const Eigen::MatrixXd x = oracle::random_matrix(rng, n, features);
  return x * x.transpose();
}

Eigen::VectorXd alternating_labels(Eigen::Index n) {
  Eigen::VectorXd l(n);
  for (Eigen::Index i = 0; i < n; ++i) l(i) = i % 2 == 0 ? 1.0 : -1.0;
  return l;
}

std::vector<BinaryProblem> binary_problems(const Toy& toy) {
  BinaryProblem p;
  for (std::size_t i = 0; i < toy.samples.size(); ++i) {
    p.subset.push_back(i);
  }
  p.labels.resize(static_cast<Eigen::Index>(p.subset.size()));
  for (std::size_t i = 0; i < p.subset.size(); ++i) {
    p.labels(static_cast<Eigen::Index>(i)) = toy.labels[i] == "class0" ? 1.0 : -1.0;
  }
  return {p};
}

// J computed straight from an effective weight matrix, without simplex checks.
double j_of_effective(const BlockCache& cache, const std::vector<BinaryProblem>& problems,
                      const Eigen::MatrixXd& eff, double c) {
  double j = 0.0;
  for (const auto& p : problems) {
    const Eigen::MatrixXd k = cache.gram_effective(eff, p.subset);
    const auto r = solve_radius(k);
    const auto s = solve_svm_l2({k, p.labels, c});
    j += r.r_squared * s.w_norm_squared;
  }
  return j;
}

bool gradient_close(const Eigen::VectorXd& analytic, const Eigen::VectorXd& numeric) {
  const double floor = 1e-2 * analytic.cwiseAbs().maxCoeff();
  for (Eigen::Index i = 0; i < analytic.size(); ++i) {
    const double scale = std::max({std::abs(analytic(i)), std::abs(numeric(i)), floor});
    if (std::abs(analytic(i) - numeric(i)) > 1e-4 * scale) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("radius: two unit points at squared distance one") {
  const auto r = solve_radius(two_point(1.0, 0.5));
  CHECK(r.alpha(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.alpha(1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.r_squared == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("radius: identical points have zero radius") {
  const Eigen::MatrixXd k = Eigen::MatrixXd::Constant(5, 5, 0.7);
  const auto r = solve_radius(k);
  CHECK(r.r_squared == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(r.alpha.sum() == doctest::Approx(1.0));
}

TEST_CASE("radius: matches a grid search oracle") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 3; ++trial) {
    const Eigen::MatrixXd k = random_gram(rng, 6, 3);
    const auto r = solve_radius(k);
    const double expected = oracle::radius_grid_search(k, 40);
    CHECK(std::abs(r.r_squared - expected) <= 1e-4);
    CHECK(radius_kkt_violation(k, r) <= 1e-6);
  }
}

TEST_CASE("radius: indefinite Gram is rejected") {
  Eigen::MatrixXd k(2, 2);
  k << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(solve_radius(k), Error);
  try {
    solve_radius(k);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::IndefiniteKernel);
  }
  CHECK(psd_shift(k) == doctest::Approx(1.0 + 1e-10));
  CHECK(psd_shift(two_point(1.0, 0.5)) == 0.0);
}

TEST_CASE("svm: two point closed form") {
  const double c = 1e12;
  const Eigen::MatrixXd k = two_point(1.0 - 1.0 / c, 0.5);
  const auto s = solve_svm_l2({k, pm({1.0, -1.0}), c});
  CHECK(s.eta(0) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(s.eta(1) == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(s.w_norm_squared == doctest::Approx(4.0).epsilon(1e-9));
  CHECK(s.bias == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("radius-margin: two point composition gives J = 1") {
  const BlockCache cache(2, 1, {1.0, 0.5, 1.0});
  const std::vector<BinaryProblem> problems{{{0, 1}, pm({1.0, -1.0})}};
  const auto e = radius_margin_objective(HierarchyWeights::uniform(Integrator::Beta, 1), cache, problems, 1e12);
  CHECK(e.j == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(e.pairs.at(0).radius.r_squared == doctest::Approx(0.25));
}

TEST_CASE("svm: duplicating every point keeps ||w||^2") {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd x = oracle::random_matrix(rng, 6, 3);
  const Eigen::VectorXd l = alternating_labels(6);
  Eigen::MatrixXd x2(12, 3);
  Eigen::VectorXd l2(12);
  x2 << x, x;
  l2 << l, l;
  // Without the ridge the duplicated problem is the same hard-margin problem.
  const double c = 1e9;
  const auto a = solve_svm_l2({x * x.transpose(), l, c});
  const auto b = solve_svm_l2({x2 * x2.transpose(), l2, c});
  CHECK(std::abs(a.w_norm_squared - b.w_norm_squared) <= 1e-6 * std::max(1.0, a.w_norm_squared));
}

TEST_CASE("svm: matches a projected gradient oracle") {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd k = random_gram(rng, 8, 3);
  const Eigen::VectorXd l = alternating_labels(8);
  const double c = 2.0;
  const auto s = solve_svm_l2({k, l, c});
  Eigen::MatrixXd kt = k;
  kt.diagonal().array() += 1.0 / c;
  const double expected = oracle::svm_l2_projected_gradient(kt, l, 1000000);
  CHECK(std::abs(0.5 * s.w_norm_squared - expected) <= 1e-5);
}

TEST_CASE("svm: KKT holds and the margin objective grows with C") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::mt19937_64 rng(seed);
    const Eigen::MatrixXd k = random_gram(rng, 12, 2);
    const Eigen::VectorXd l = alternating_labels(12);
    double previous = 0.0;
    for (double c : {0.1, 1.0, 10.0, 100.0}) {
      const LabeledKernelSet set{k, l, c};
      const auto s = solve_svm_l2(set);
      CHECK(svm_kkt_violation(set, s) <= 1e-6);
      CHECK(std::abs(s.eta.dot(l)) <= 1e-8);
      CHECK(s.eta.minCoeff() >= 0.0);
      CHECK(s.w_norm_squared >= previous - 1e-9);
      previous = s.w_norm_squared;
    }
    const auto r = solve_radius(k);
    CHECK(radius_kkt_violation(k, r) <= 1e-6);
  }
}

TEST_CASE("svm: single class input is rejected") {
  try {
    solve_svm_l2({two_point(1.0, 0.5), pm({1.0, 1.0}), 1.0});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateLabels);
  }
}

TEST_CASE("project_simplex examples") {
  const Eigen::VectorXd a = project_simplex(pm({0.6, 0.6}));
  CHECK(a(0) == doctest::Approx(0.5));
  CHECK(a(1) == doctest::Approx(0.5));
  const Eigen::VectorXd b = project_simplex(pm({1.2, -0.2}));
  CHECK(b(0) == doctest::Approx(1.0));
  CHECK(b(1) == 0.0);
  const Eigen::VectorXd feasible = pm({0.2, 0.3, 0.5});
  CHECK((project_simplex(feasible) - feasible).cwiseAbs().maxCoeff() <= 1e-15);

  Eigen::MatrixXd m(2, 2);
  m << 0.5, 0.3, 0.1, 0.4;
  const Eigen::MatrixXd pmtx = project_simplex(m);
  CHECK(pmtx.sum() == doctest::Approx(1.0));
  CHECK(pmtx.minCoeff() >= 0.0);
  CHECK((pmtx - pmtx.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((project_simplex(pmtx) - pmtx).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("gradient: uniform beta on identical levels has equal components") {
  // Every block is constant across levels, so all levels are interchangeable.
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd k = random_gram(rng, 6, 6);
  const std::size_t t = 3;
  std::vector<double> raw;
  for (Eigen::Index i = 0; i < 6; ++i)
    for (Eigen::Index j = i; j < 6; ++j)
      for (std::size_t e = 0; e < t * t; ++e) raw.push_back(k(i, j));
  const BlockCache cache(6, t, raw);
  const std::vector<BinaryProblem> problems{{{0, 1, 2, 3, 4, 5}, alternating_labels(6)}};
  const auto w = HierarchyWeights::uniform(Integrator::Beta, 3);
  const auto e = radius_margin_objective(w, cache, problems, 1.0);
  const Eigen::VectorXd g = gradient_weights(w, cache, problems, e);
  REQUIRE(g.size() == 3);
  CHECK(g(1) == doctest::Approx(g(0)).epsilon(1e-12));
  CHECK(g(2) == doctest::Approx(g(0)).epsilon(1e-12));
}

TEST_CASE("gradient: beta and M match central finite differences") {
  const double h = 1e-5;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Toy toy = make_toy(100 + seed, 5, 2, 3);
    const auto problems = binary_problems(toy);
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> ex(1.0);

    for (int point = 0; point < 4; ++point) {
      Eigen::VectorXd beta(3);
      for (Eigen::Index i = 0; i < 3; ++i) beta(i) = ex(rng) + 0.1;
      beta /= beta.sum();
      HierarchyWeights wb = HierarchyWeights::uniform(Integrator::Beta, 3);
      wb.beta = beta;
      const double c = 1.0;
      const auto e = radius_margin_objective(wb, toy.cache, problems, c);
      const Eigen::VectorXd g = gradient_weights(wb, toy.cache, problems, e);
      Eigen::VectorXd fd(3);
      for (Eigen::Index i = 0; i < 3; ++i) {
        Eigen::VectorXd up = beta, down = beta;
        up(i) += h;
        down(i) -= h;
        fd(i) = (j_of_effective(toy.cache, problems, up * up.transpose(), c) -
                 j_of_effective(toy.cache, problems, down * down.transpose(), c)) / (2 * h);
      }
      CHECK(gradient_close(g, fd));

      HierarchyWeights wm = HierarchyWeights::uniform(Integrator::M, 3);
      wm.m = beta * beta.transpose();
      const auto em = radius_margin_objective(wm, toy.cache, problems, c);
      const Eigen::VectorXd gm = gradient_weights(wm, toy.cache, problems, em);
      REQUIRE(gm.size() == 9);
      Eigen::VectorXd fdm(9);
      for (Eigen::Index i = 0; i < 9; ++i) {
        Eigen::MatrixXd up = wm.m, down = wm.m;
        up.data()[i] += h;
        down.data()[i] -= h;
        fdm(i) = (j_of_effective(toy.cache, problems, up, c) - j_of_effective(toy.cache, problems, down, c)) /
                 (2 * h);
      }
      CHECK(gradient_close(gm, fdm));

      // Chain rule: dJ/dbeta = (G + G^T) beta with G the M gradient at outer(beta, beta).
      const Eigen::MatrixXd gmat = Eigen::Map<const Eigen::MatrixXd>(gm.data(), 3, 3);
      const Eigen::VectorXd chained = (gmat + gmat.transpose()) * beta;
      CHECK((chained - g).cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, g.cwiseAbs().maxCoeff()));

      // k_beta and k_M agree on the rank-one weights.
      const Eigen::MatrixXd kb = toy.cache.gram(wb);
      const Eigen::MatrixXd km = toy.cache.gram(wm);
      CHECK((kb - km).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("gradient: infeasible duals are stale") {
  const BlockCache cache(2, 1, {1.0, 0.5, 1.0});
  const std::vector<BinaryProblem> problems{{{0, 1}, pm({1.0, -1.0})}};
  const auto w = HierarchyWeights::uniform(Integrator::Beta, 1);
  auto e = radius_margin_objective(w, cache, problems, 1.0);
  e.pairs[0].dual.eta(0) += 0.1;
  try {
    gradient_weights(w, cache, problems, e);
    FAIL("expected an error");
  } catch (const Error& err) {
    CHECK(err.kind() == ErrorKind::StaleDuals);
  }
}

TEST_CASE("radius-margin: scaling blocks keeps the argmin over candidates") {
  const Toy toy = make_toy(21, 5, 2, 2);
  const auto problems = binary_problems(toy);
  std::vector<double> scaled = toy.cache.raw();
  for (double& v : scaled) v *= 3.5;
  const BlockCache big(toy.cache.size(), toy.cache.levels(), scaled);

  auto argmin = [&](const BlockCache& cache, double c) {
    std::size_t best = 0;
    double best_j = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k <= 10; ++k) {
      HierarchyWeights w = HierarchyWeights::uniform(Integrator::Beta, 2);
      w.beta << k / 10.0, 1.0 - k / 10.0;
      const double j = radius_margin_objective(w, cache, problems, c).j;
      CHECK(j >= 0.0);
      if (j < best_j) {
        best_j = j;
        best = k;
      }
    }
    return best;
  };
  // The ridge scales with the kernel so the product stays scale-free.
  CHECK(argmin(toy.cache, 1.0) == argmin(big, 1.0 / 3.5));

  const auto w = HierarchyWeights::uniform(Integrator::Beta, 2);
  const auto small_eval = radius_margin_objective(w, toy.cache, problems, 1.0);
  const auto big_eval = radius_margin_objective(w, big, problems, 1.0 / 3.5);
  CHECK(big_eval.pairs[0].radius.r_squared ==
        doctest::Approx(3.5 * small_eval.pairs[0].radius.r_squared).epsilon(1e-8));
}

TEST_CASE("optimize: defaults") {
  const OptimizeOptions o;
  CHECK(o.max_iter == 100);
  CHECK(o.tau == 1e-5);
}

TEST_CASE("optimize: one level is returned immediately") {
  const Toy toy = make_toy(4, 4, 2, 1);
  const auto problems = binary_problems(toy);
  const auto res = optimize_weights(Integrator::Beta, toy.cache, problems, 1.0);
  CHECK(res.weights.beta.size() == 1);
  CHECK(res.weights.beta(0) == 1.0);
  CHECK(res.iterations == 0);
  const auto single = radius_margin_objective(HierarchyWeights::single(1, 0), toy.cache, problems, 1.0);
  CHECK(res.final_eval.j == single.j);
}

TEST_CASE("optimize: monotone trace and better than uniform and one-hot") {
  for (std::uint64_t seed : {31, 32, 33}) {
    const Toy toy = make_toy(seed, 6, 2, 3);
    const auto problems = binary_problems(toy);
    for (Integrator kind : {Integrator::Beta, Integrator::M, Integrator::Mkl}) {
      const auto res = optimize_weights(kind, toy.cache, problems, 1.0);
      for (std::size_t i = 1; i < res.j_trace.size(); ++i) {
        CHECK(res.j_trace[i] <= res.j_trace[i - 1] + 1e-12);
      }
      CHECK(res.j_trace.front() ==
            radius_margin_objective(HierarchyWeights::uniform(kind, 3), toy.cache, problems, 1.0).j);
      CHECK(res.final_eval.j <= res.j_trace.front());
      if (kind == Integrator::Beta) {
        for (Eigen::Index t = 0; t < 3; ++t) {
          const double one_hot = radius_margin_objective(HierarchyWeights::single(3, t), toy.cache, problems, 1.0).j;
          CHECK(res.final_eval.j <= one_hot + 1e-9);
        }
      }
      res.weights.validate(3);
    }
  }
}

TEST_CASE("multiclass: pairs, separability and relabeling") {
  const Toy toy = make_toy(77, 6, 3, 3, 4, 0.5);
  TrainConfig cfg;
  cfg.c = 100.0;
  const TrainingData data{&toy.cache, toy.samples, toy.labels};
  const auto model = train_multiclass(data, cfg, toy.cfg);
  CHECK(model.pairs.size() == 3);
  CHECK(model.classes == std::vector<std::string>{"class0", "class1", "class2"});
  for (std::size_t i = 0; i < toy.samples.size(); ++i) {
    CHECK(predict(model, toy.samples[i]).label == toy.labels[i]);
  }

  // Rename classes so that their sorted order is reversed.
  std::vector<std::string> renamed;
  for (const auto& l : toy.labels) renamed.push_back(l == "class0" ? "z" : l == "class1" ? "y" : "x");
  const TrainingData data2{&toy.cache, toy.samples, renamed};
  const auto model2 = train_multiclass(data2, cfg, toy.cfg);
  const Toy probe = make_toy(78, 4, 3, 3, 4, 0.5);
  for (const auto& s : probe.samples) {
    const auto a = predict(model, s).label;
    const auto b = predict(model2, s).label;
    CHECK(b == (a == "class0" ? "z" : a == "class1" ? "y" : "x"));
  }

  // Determinism, including on a copy of a support sample.
  const SiceHierarchy copy = model.support.front();
  const auto p1 = predict(model, copy);
  const auto p2 = predict(model, model.support.front());
  CHECK(p1.label == p2.label);
  CHECK(p1.decision_values == p2.decision_values);
}

TEST_CASE("multiclass: two classes reduce to the binary path") {
  const Toy toy = make_toy(5, 5, 2, 2);
  TrainConfig cfg;
  const TrainingData data{&toy.cache, toy.samples, toy.labels};
  const auto model = train_multiclass(data, cfg, toy.cfg);
  REQUIRE(model.pairs.size() == 1);
  const auto problems = binary_problems(toy);
  const auto res = optimize_weights(Integrator::Beta, toy.cache, problems, 1.0);
  CHECK((model.weights.beta - res.weights.beta).cwiseAbs().maxCoeff() == 0.0);
  for (const auto& s : toy.samples) {
    const auto p = predict(model, s);
    CHECK(p.label == (p.decision_values[0] > 0 ? "class0" : "class1"));
  }
}

TEST_CASE("multiclass: errors") {
  const Toy toy = make_toy(6, 3, 2, 2);
  std::vector<std::string> labels = toy.labels;
  labels[3] = "lonely";
  labels[4] = "class0";
  labels[5] = "class0";
  const TrainingData data{&toy.cache, toy.samples, labels};
  try {
    train_multiclass(data, TrainConfig{}, toy.cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InsufficientClass);
  }

  const TrainingData ok{&toy.cache, toy.samples, toy.labels};
  const auto model = train_multiclass(ok, TrainConfig{}, toy.cfg);
  const Toy other = make_toy(7, 1, 1, 3);
  try {
    predict(model, other.samples[0]);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ModelMismatch);
  }
}
