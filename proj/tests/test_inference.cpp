#include "lateiv/inference.hpp"
#include "lateiv/kernels.hpp"
#include "lateiv/proposed.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <random>

using namespace lateiv;

TEST_CASE("quantile is type 7") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  for (int n : {1, 2, 7, 100, 513}) {
    std::vector<double> v(static_cast<std::size_t>(n));
    for (auto& x : v) x = nd(rng);
    for (double p : {0.0, 0.025, 0.3, 0.5, 0.975, 1.0})
      CHECK(quantile(v, p) == doctest::Approx(oracle::sorted_quantile(v, p)).epsilon(1e-15));
  }
  CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
  CHECK(std::isnan(quantile({}, 0.5)));
  CHECK_THROWS(quantile({1.0}, 1.5));
}

TEST_CASE("interval from replicates") {
  std::vector<Vector> est;
  for (int b = 0; b < 40; ++b) est.push_back(Eigen::Vector2d(b, 3.0));
  const BootstrapInterval ci = interval_from_replicates(est, 3, 0.9);
  std::vector<double> col(40);
  for (int b = 0; b < 40; ++b) col[static_cast<std::size_t>(b)] = b;
  CHECK(ci.lower[0] == doctest::Approx(oracle::sorted_quantile(col, 0.05)));
  CHECK(ci.upper[0] == doctest::Approx(oracle::sorted_quantile(col, 0.95)));
  // Constant replicates give a degenerate interval.
  CHECK(ci.lower[1] == 3.0);
  CHECK(ci.upper[1] == 3.0);
  CHECK(ci.replicates == 43);
  CHECK_FALSE(ci.unreliable);
  CHECK(interval_from_replicates({Eigen::Vector2d(0, 0)}, 2, 0.9).unreliable);
}

TEST_CASE("estimator registry") {
  CHECK(estimator_tags().size() == 11);
  CHECK_FALSE(estimator_admits("mle.wang", Scale::Multiplicative, Scenario::Bth));
  CHECK(estimator_admits("mle.wang", Scale::Additive, Scenario::Bad));
  CHECK_FALSE(estimator_admits("ls.abadie", Scale::Additive, Scenario::Psc));
  CHECK(estimator_admits("ls.abadie", Scale::Multiplicative, Scenario::Bad));
  CHECK_FALSE(estimator_admits("mle.crude", Scale::Additive, Scenario::Opc));
  CHECK_FALSE(estimator_admits("nope", Scale::Additive, Scenario::Bth));
  CHECK_THROWS(EstimatorBundle({"nope"}, EstimatorOptions{}, scenario_rule(Scenario::Bth)));
  EstimatorOptions mult;
  mult.scale = Scale::Multiplicative;
  CHECK_THROWS(EstimatorBundle({"dru.wang"}, mult, scenario_rule(Scenario::Bth)));
}

TEST_CASE("bundle shares the likelihood fit and matches standalone fits") {
  DgpSpec spec;
  spec.n = 1500;
  spec.seed = 4;
  const Dataset data = generate_dataset(spec);
  const EstimatorBundle bundle({"mle", "dru", "drw", "dru.simple"}, EstimatorOptions{}, scenario_rule(Scenario::Bth));
  const auto fits = bundle.fit(data);
  REQUIRE(fits.size() == 4);
  const ModelSet init = ModelSet::zeros(Scale::Additive, build_scenario_design(data, Scenario::Bth));
  const FitResult dru = fit_dr(init, data, OptimConfig{}, WeightMode::Identity);
  CHECK((fits[1].alpha - dru.alpha).norm() < 1e-8);
  for (const auto& f : fits) CHECK(f.converged);
  // Warm starts land on the same solutions.
  std::map<std::string, FitResult> warm;
  for (const auto& f : fits) warm[f.estimator_tag] = f;
  const auto again = bundle.fit(data, &warm);
  for (std::size_t t = 0; t < fits.size(); ++t) CHECK((again[t].alpha - fits[t].alpha).norm() < 1e-6);
}

TEST_CASE("bootstrap is reproducible and thread-count invariant") {
  DgpSpec spec;
  spec.n = 600;
  spec.seed = 10;
  const Dataset data = generate_dataset(spec);
  const EstimatorBundle bundle({"mle", "dru.simple"}, EstimatorOptions{}, scenario_rule(Scenario::Bth));
  const int saved = worker_threads();
  set_worker_threads(1);
  const auto a = bootstrap_ci(data, bundle, 20, 0.9, 99);
  set_worker_threads(3);
  const auto b = bootstrap_ci(data, bundle, 20, 0.9, 99);
  set_worker_threads(saved);
  REQUIRE(a.size() == 2);
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK(a[t].estimates == b[t].estimates);
    CHECK(a[t].lower == b[t].lower);
    CHECK(a[t].replicates == 20);
    CHECK((a[t].lower.array() <= a[t].upper.array()).all());
  }
  CHECK_THROWS(bootstrap_ci(data, bundle, 1, 0.9, 1));
}

TEST_CASE("Monte Carlo summaries") {
  McConfig cfg;
  cfg.runs = 6;
  cfg.n = 400;
  cfg.estimators = {"mle", "dru.simple", "ls.abadie"};
  cfg.scenarios = {Scenario::Bth, Scenario::Psc};
  cfg.seed = 3;
  const int saved = worker_threads();
  set_worker_threads(1);
  const McReport serial = monte_carlo_study(cfg);
  set_worker_threads(4);
  const McReport parallel = monte_carlo_study(cfg);
  set_worker_threads(saved);

  // ls.abadie is not admitted under psc.
  CHECK(serial.records.size() == 6u * (3 + 2));
  REQUIRE(serial.records.size() == parallel.records.size());
  for (std::size_t k = 0; k < serial.records.size(); ++k) {
    CHECK(serial.records[k].run == parallel.records[k].run);
    CHECK(serial.records[k].estimate == parallel.records[k].estimate);
  }
  // Aggregates are a pure function of the raw records.
  const auto again = summarize(serial.records, serial.truth);
  REQUIRE(again.size() == serial.cells.size());
  for (std::size_t k = 0; k < again.size(); ++k) {
    CHECK(again[k].bias == serial.cells[k].bias);
    CHECK(again[k].sd == serial.cells[k].sd);
  }
  const McCell& c = serial.cell("mle", Scenario::Bth, 1);
  double sum = 0;
  int used = 0;
  for (const auto& r : serial.records)
    if (r.estimator == "mle" && r.scenario == Scenario::Bth && r.converged) {
      sum += r.estimate[1] - serial.truth[1];
      ++used;
    }
  CHECK(c.used == used);
  CHECK(c.bias == doctest::Approx(sum / used));
  CHECK(*c.mc_se == doctest::Approx(*c.sd / std::sqrt(double(used))));
  CHECK_FALSE(c.coverage.has_value());
  CHECK_THROWS(serial.cell("drw", Scenario::Bth, 0));
}

TEST_CASE("a single run has no standard error") {
  McConfig cfg;
  cfg.runs = 1;
  cfg.n = 500;
  cfg.estimators = {"mle"};
  const McReport r = monte_carlo_study(cfg);
  const McCell& c = r.cell("mle", Scenario::Bth, 0);
  CHECK(c.bias == doctest::Approx(r.records[0].estimate[0] - r.truth[0]));
  CHECK_FALSE(c.sd.has_value());
  CHECK_FALSE(c.mc_se.has_value());
}

TEST_CASE("coverage bookkeeping") {
  std::vector<McRecord> recs;
  for (int run = 0; run < 4; ++run) {
    McRecord r;
    r.run = run;
    r.estimator = "mle";
    r.converged = run != 3;
    r.estimate = Eigen::Vector2d(0.1 * run, -1.0);
    r.has_ci = true;
    r.ci_unreliable = run == 2;
    r.lower = Eigen::Vector2d(run == 1 ? 0.5 : -1.0, -2.0);
    r.upper = Eigen::Vector2d(1.0, 0.0);
    recs.push_back(r);
  }
  const auto cells = summarize(recs, Eigen::Vector2d(0.0, -1.0));
  CHECK(cells[0].failures == 1);
  CHECK(cells[0].used == 3);
  CHECK(cells[0].ci_unreliable == 1);
  CHECK(cells[0].ci_runs == 2);
  CHECK(*cells[0].coverage == 0.5);
  CHECK(*cells[1].coverage == 1.0);
  CHECK(*cells[0].mean_width == doctest::Approx((2.0 + 0.5) / 2));
}
