#include "lateiv/io.hpp"
#include "lateiv/simulation.hpp"

#include "doctest.h"

#include <sstream>

using namespace lateiv;

TEST_CASE("generation is deterministic in the seed") {
  DgpSpec spec;
  spec.n = 500;
  spec.seed = 5;
  std::ostringstream a, b, c;
  write_csv(a, generate_dataset(spec));
  write_csv(b, generate_dataset(spec));
  spec.seed = 6;
  write_csv(c, generate_dataset(spec));
  CHECK(a.str() == b.str());
  CHECK(a.str() != c.str());
}

TEST_CASE("auxiliary covariates") {
  DgpSpec spec;
  spec.n = 25;
  const Dataset d = generate_dataset(spec);
  CHECK(d.columns == simulation_columns());
  for (Index i = 0; i < d.n(); ++i) {
    CHECK(d.x(i, d.column("xp1")) == (i < 12 ? 1.0 : 0.0));
    CHECK(d.x(i, d.column("xp2")) == (i < 2 ? 0.0 : 1.0));
    CHECK(std::abs(d.x(i, d.column("x"))) <= 1.0);
    CHECK(std::abs(d.x(i, d.column("xdag"))) <= 1.0);
  }
}

TEST_CASE("scenario designs") {
  DgpSpec spec;
  spec.n = 10;
  const Dataset d = generate_dataset(spec);
  const Selector x = d.select({"intercept", "x"}), xd = d.select({"intercept", "xdag"}), xp = d.select({"xp1", "xp2"});
  const Design bth = build_scenario_design(d, Scenario::Bth);
  CHECK((bth.instrument == x && bth.nuisance == x && bth.theta == x));
  const Design psc = build_scenario_design(d, Scenario::Psc);
  CHECK((psc.instrument == x && psc.nuisance == xp));
  const Design opc = build_scenario_design(d, Scenario::Opc);
  CHECK((opc.instrument == xd && opc.nuisance == x));
  const Design bad = build_scenario_design(d, Scenario::Bad);
  CHECK((bad.instrument == xd && bad.nuisance == xp && bad.theta == x));
  const Design ab = build_scenario_design(d, Scenario::Bad, true);
  CHECK((ab.instrument == xd && ab.nuisance == x));
  CHECK_THROWS(build_scenario_design(d, Scenario::Psc, true));
  CHECK(parse_scenario("opc") == Scenario::Opc);
  CHECK_THROWS(parse_scenario("both"));
}

TEST_CASE("instrument strength") {
  // E expit(-0.4 + 0.8 U), U ~ Unif(-1, 1), integrated in closed form.
  CHECK(instrument_strength(DgpSpec{}) == doctest::Approx(0.4060829906637008).epsilon(1e-9));
  DgpSpec flat;
  flat.beta1 = Eigen::Vector2d(0.0, 0.0);
  CHECK(instrument_strength(flat) == doctest::Approx(0.5));
  flat.beta1 = Eigen::Vector2d(-800.0, 0.0);
  CHECK(instrument_strength(flat) == doctest::Approx(0.0));
  DgpSpec spec;
  spec.n = 200000;
  spec.seed = 8;
  const Dataset d = generate_dataset(spec);
  CHECK(instrument_strength(d, d.select({"intercept", "x"})) == doctest::Approx(0.406).epsilon(0.03));
}

TEST_CASE("all-zero coefficients") {
  DgpSpec spec;
  for (Vector* v : {&spec.alpha, &spec.beta1, &spec.beta2, &spec.beta3, &spec.beta4, &spec.eta, &spec.gamma})
    v->setZero();
  spec.n = 100000;
  spec.seed = 3;
  const Dataset d = generate_dataset(spec);
  CHECK(d.z.mean() == doctest::Approx(0.5).epsilon(0.02));
  const CellProbs cp = inverse_map(StructuralPoint{0, 0.5, 0.5, 0.5, 0.5, 1.0}, Scale::Additive);
  for (int z = 0; z < 2; ++z)
    for (int dd = 0; dd < 2; ++dd)
      for (int y = 0; y < 2; ++y) {
        double hits = 0, nz = 0;
        for (Index i = 0; i < d.n(); ++i)
          if (d.z[i] == z) {
            ++nz;
            hits += d.d[i] == dd && d.y[i] == y;
          }
        CHECK(hits / nz == doctest::Approx(cp(dd, y, z)).epsilon(0.05));
      }
}

TEST_CASE("binned cell frequencies match the model") {
  for (Scale scale : {Scale::Additive, Scale::Multiplicative}) {
    DgpSpec spec;
    spec.scale = scale;
    spec.n = 400000;
    spec.seed = 14;
    const Dataset d = generate_dataset(spec);
    const auto sp = true_structural(spec, d);
    constexpr int kBins = 10;
    // Expected and observed counts per (bin, z, d, y).
    double expected[kBins][2][2][2] = {}, observed[kBins][2][2][2] = {};
    for (Index i = 0; i < d.n(); ++i) {
      const int bin = std::min(kBins - 1, static_cast<int>((d.x(i, 1) + 1.0) / 2.0 * kBins));
      const int z = static_cast<int>(d.z[i]);
      const CellProbs cp = inverse_map(sp[static_cast<std::size_t>(i)], scale);
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) expected[bin][z][a][b] += cp(a, b, z);
      observed[bin][z][static_cast<int>(d.d[i])][static_cast<int>(d.y[i])] += 1;
    }
    int within = 0, total = 0;
    for (int b = 0; b < kBins; ++b) {
      CellProbs emp;
      for (int z = 0; z < 2; ++z) {
        double nz = 0;
        for (int a = 0; a < 2; ++a)
          for (int c = 0; c < 2; ++c) nz += observed[b][z][a][c];
        for (int a = 0; a < 2; ++a)
          for (int c = 0; c < 2; ++c) {
            const double p = expected[b][z][a][c] / nz;
            const double se = std::sqrt(p * (1 - p) / nz);
            emp(a, c, z) = observed[b][z][a][c] / nz;
            within += std::abs(emp(a, c, z) - p) <= 4 * se;
            ++total;
          }
      }
      CHECK(check_delta(emp, 0.02).member);
    }
    CHECK(within >= 0.95 * total);
  }
}
