#include "lateiv/kernels.hpp"
#include "lateiv/models.hpp"
#include "lateiv/numopt.hpp"
#include "lateiv/simulation.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <random>

using namespace lateiv;

TEST_CASE("links and slopes") {
  CHECK(expit(0.0) == 0.5);
  CHECK(expit(-800.0) >= 0.0);
  CHECK(expit(800.0) == 1.0);
  CHECK(logit(expit(1.3)) == doctest::Approx(1.3));
  for (Link l : {Link::Tanh, Link::Exp, Link::Expit, Link::Linear}) {
    const double eta = 0.37, h = 1e-6;
    const double fd = (apply_link(l, eta + h) - apply_link(l, eta - h)) / (2 * h);
    CHECK(link_slope(l, apply_link(l, eta)) == doctest::Approx(fd).epsilon(1e-8));
  }
}

TEST_CASE("free coefficient layout round-trips") {
  DgpSpec spec;
  spec.n = 10;
  const Dataset data = generate_dataset(spec);
  for (bool one_sided : {false, true}) {
    ModelSet ms = ModelSet::zeros(Scale::Additive, full_design(data), one_sided);
    const Index k = data.k();
    CHECK(ms.free_size() == (one_sided ? 4 : 6) * k);
    Vector v = Vector::LinSpaced(ms.free_size(), -1.0, 1.0);
    ms.set_free_coefficients(v);
    CHECK(ms.free_coefficients() == v);
    CHECK(ms.theta.coef == v.head(k));
    CHECK(ms.op.coef == v.tail(k));
    if (one_sided) {
      const StructuralPoint sp = eval_structural(ms, row_of(data, 0));
      CHECK(sp.phi2 == 0.0);
      CHECK(sp.phi4 == 0.0);
    }
  }
}

TEST_CASE("model validation") {
  DgpSpec spec;
  spec.n = 5;
  const Dataset data = generate_dataset(spec);
  ModelSet ms = ModelSet::zeros(Scale::Multiplicative, full_design(data));
  CHECK_NOTHROW(ms.validate());
  ms.theta.link = Link::Tanh;
  CHECK_THROWS_AS(ms.validate(), DomainError);
  ms = ModelSet::zeros(Scale::Additive, full_design(data));
  ms.phi3.coef.resize(1);
  CHECK_THROWS_AS(ms.validate(), DomainError);
}

TEST_CASE("theta gradient matches central differences") {
  DgpSpec spec;
  spec.n = 20;
  const Dataset data = generate_dataset(spec);
  for (Scale scale : {Scale::Additive, Scale::Multiplicative}) {
    ModelSet ms = ModelSet::zeros(scale, full_design(data));
    ms.theta.coef = Vector::LinSpaced(data.k(), -0.3, 0.4);
    for (Index i = 0; i < data.n(); ++i) {
      const auto row = row_of(data, i);
      const Vector g = theta_gradient(ms, row);
      const Vector fd = finite_difference_gradient(
          [&](const Vector& c) {
            ModelSet m = ms;
            m.theta.coef = c;
            return eval_structural(m, row).theta;
          },
          ms.theta.coef);
      CHECK((g - fd).lpNorm<Eigen::Infinity>() <= 1e-7 * std::max(1.0, fd.lpNorm<Eigen::Infinity>()));
    }
  }
}

TEST_CASE("least squares agrees with the normal equations") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  Matrix x(200, 3);
  Vector y(200);
  for (Index i = 0; i < 200; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = nd(rng);
    x(i, 2) = nd(rng);
    y[i] = 1 - 2 * x(i, 1) + 0.5 * x(i, 2) + nd(rng);
  }
  const SolveReport r = fit_least_squares(y, x);
  CHECK(r.converged);
  CHECK((r.solution - oracle::normal_equations(x, y)).norm() < 1e-10);
  Matrix collinear = x;
  collinear.col(2) = 2.0 * collinear.col(1);
  CHECK_THROWS_AS(fit_least_squares(y, collinear), RankDeficient);
  const Vector fit = consumed_fit(x, Vector::Constant(3, -1.0), true, 0.01);
  CHECK(fit.minCoeff() >= 0.01);
}

TEST_CASE("logistic regression") {
  DgpSpec spec;
  spec.n = 4000;
  spec.seed = 5;
  const Dataset data = generate_dataset(spec);
  const Matrix x = design_matrix(data, data.select({"intercept", "x"}));
  OptimConfig cfg;
  const SolveReport r = fit_logistic(data.z, x, cfg);
  REQUIRE(r.converged);
  CHECK_FALSE(r.warning);
  // Score is zero at the MLE and the instrument coefficients are recovered.
  Vector g;
  logistic_nll(data.z, x, r.solution, &g);
  CHECK(g.lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK(std::abs(r.solution[0] - 0.1) < 0.15);
  CHECK(std::abs(r.solution[1] + 1.0) < 0.15);
  // Gradient against central differences.
  const Vector c = Eigen::Vector2d(0.3, -0.2);
  logistic_nll(data.y, x, c, &g);
  const Vector fd = finite_difference_gradient([&](const Vector& v) { return logistic_nll(data.y, x, v, nullptr); }, c);
  CHECK((g - fd).norm() < 1e-8);
}

TEST_CASE("logistic fit flags separation") {
  Matrix x(6, 2);
  Vector y(6);
  for (Index i = 0; i < 6; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = static_cast<double>(i) - 2.5;
    y[i] = i >= 3 ? 1.0 : 0.0;
  }
  const SolveReport r = fit_logistic(y, x, OptimConfig{});
  CHECK(r.warning);
  CHECK_FALSE(r.converged);
  CHECK(r.solution.lpNorm<Eigen::Infinity>() > kSeparationCap);
}

TEST_CASE("BFGS minimizes a smooth function") {
  // Rosenbrock
  SmoothObjective f = [](const Vector& x, Vector& g) {
    g.resize(2);
    g[0] = -2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] * x[0]);
    g[1] = 200 * (x[1] - x[0] * x[0]);
    return (1 - x[0]) * (1 - x[0]) + 100 * (x[1] - x[0] * x[0]) * (x[1] - x[0] * x[0]);
  };
  OptimConfig cfg;
  cfg.max_iter = 2000;
  const SolveReport r = minimize_smooth(f, Eigen::Vector2d(-1.2, 1.0), cfg);
  CHECK(r.converged);
  CHECK(r.solution[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.solution[1] == doctest::Approx(1.0).epsilon(1e-6));
  SmoothObjective bad = [](const Vector&, Vector& g) {
    g = Vector::Zero(1);
    return std::numeric_limits<double>::quiet_NaN();
  };
  CHECK_FALSE(minimize_smooth(bad, Vector::Zero(1), cfg).converged);
}

TEST_CASE("moment solver finds roots and reports failure") {
  MomentFunction m = [](const Vector& a) {
    Vector r(2);
    r[0] = std::tanh(a[0]) - 0.5;
    r[1] = a[0] * a[1] - 1.0;
    return r;
  };
  const SolveReport r = solve_moment(m, Vector::Zero(2), OptimConfig{});
  CHECK(r.converged);
  CHECK(r.solution[0] == doctest::Approx(std::atanh(0.5)));
  CHECK(r.solution[1] == doctest::Approx(1.0 / std::atanh(0.5)));
  MomentFunction none = [](const Vector& a) { return Vector::Constant(1, a[0] * a[0] + 1.0); };
  CHECK_FALSE(solve_moment(none, Vector::Zero(1), OptimConfig{}).converged);
}

TEST_CASE("chunked reduction does not depend on the thread count") {
  const int saved = worker_threads();
  const Index n = 10 * kChunkRows + 17;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = std::sin(0.001 * i) * 1e3 + 1e-7 * i;
  auto sum_with = [&](int threads, Execution ex) {
    set_worker_threads(threads);
    return chunked_reduce(
        n, 0.0,
        [&](Index b, Index e, double& acc) {
          for (Index i = b; i < e; ++i) acc += v[i];
        },
        ex);
  };
  const double serial = sum_with(1, Execution::Serial);
  CHECK(sum_with(1, Execution::Parallel) == serial);
  CHECK(sum_with(3, Execution::Parallel) == serial);
  CHECK(sum_with(4, Execution::Parallel) == serial);
  CHECK(serial == doctest::Approx(v.sum()));
  set_worker_threads(saved);
  CHECK(chunked_reduce(0, 5.0, [](Index, Index, double& a) { a += 1.0; }) == 5.0);
}
