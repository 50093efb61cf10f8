#include "lateiv/param.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <random>

using namespace lateiv;

namespace {

StructuralPoint draw(std::mt19937_64& rng, Scale scale) {
  std::uniform_real_distribution<double> u(0.01, 0.99), t(-0.98, 0.98), lg(-3.0, 3.0);
  StructuralPoint sp;
  sp.theta = scale == Scale::Additive ? t(rng) : std::exp(lg(rng));
  sp.phi1 = u(rng);
  sp.phi2 = u(rng);
  sp.phi3 = u(rng);
  sp.phi4 = u(rng);
  sp.opco = std::exp(lg(rng));
  return sp;
}

}  // namespace

TEST_CASE("complier risks at hand-solved points") {
  // Quadratics solved by hand: f0^2 - 3.7 f0 + 1.4 = 0 and 4 f0^2 - 9 f0 + 3 = 0.
  const ComplierRisks a = solve_complier_risks(0.3, 2.0, Scale::Additive);
  CHECK(a.f0 == doctest::Approx(0.427853734667210910).epsilon(1e-14));
  CHECK(a.f1 == doctest::Approx(0.727853734667210910).epsilon(1e-14));
  const ComplierRisks m = solve_complier_risks(2.0, 3.0, Scale::Multiplicative);
  CHECK(m.f0 == doctest::Approx(0.406929669182746417).epsilon(1e-14));
  CHECK(m.f1 == doctest::Approx(0.813859338365492835).epsilon(1e-14));
}

TEST_CASE("complier risks match bisection, including near op = 1") {
  for (Scale scale : {Scale::Additive, Scale::Multiplicative}) {
    for (double theta : scale == Scale::Additive ? std::vector<double>{-0.9, -0.2, 0.0, 0.4, 0.95}
                                                 : std::vector<double>{0.05, 0.7, 1.0, 1.8, 12.0}) {
      for (double op : {1e-3, 0.5, 1.0 - 1e-9, 1.0, 1.0 + 1e-9, 1.0 + 1e-7, 4.0, 300.0}) {
        const ComplierRisks r = solve_complier_risks(theta, op, scale);
        const double f0 = oracle::complier_f0(theta, op, scale);
        CHECK(r.f0 == doctest::Approx(f0).epsilon(1e-11));
        CHECK(r.f0 >= 0.0);
        CHECK(r.f1 <= 1.0);
      }
    }
  }
}

TEST_CASE("op = 1 gives independent potential outcomes") {
  // f0 (1 - f1) = f1 (1 - f0) ... with op = 1 the additive solution is f0 = (1 - theta) / 2.
  const ComplierRisks r = solve_complier_risks(0.2, 1.0, Scale::Additive);
  CHECK(r.f0 == doctest::Approx(0.4));
  // multiplicative: f0 = 1 / (1 + theta)
  const ComplierRisks m = solve_complier_risks(3.0, 1.0, Scale::Multiplicative);
  CHECK(m.f0 == doctest::Approx(0.25));
}

TEST_CASE("complier risk derivatives match central differences") {
  for (Scale scale : {Scale::Additive, Scale::Multiplicative}) {
    for (double theta : scale == Scale::Additive ? std::vector<double>{-0.5, 0.1, 0.7}
                                                 : std::vector<double>{0.4, 1.0, 2.5}) {
      for (double op : {0.3, 1.0, 5.0}) {
        const ComplierRiskJet j = complier_risk_jet(theta, op, scale);
        const double h = 1e-6;
        const auto tp = solve_complier_risks(theta + h, op, scale), tm = solve_complier_risks(theta - h, op, scale);
        const auto op_p = solve_complier_risks(theta, op + h, scale), op_m = solve_complier_risks(theta, op - h, scale);
        CHECK(j.df0_dtheta == doctest::Approx((tp.f0 - tm.f0) / (2 * h)).epsilon(1e-6));
        CHECK(j.df1_dtheta == doctest::Approx((tp.f1 - tm.f1) / (2 * h)).epsilon(1e-6));
        CHECK(j.df0_dop == doctest::Approx((op_p.f0 - op_m.f0) / (2 * h)).epsilon(1e-6));
        CHECK(j.df1_dop == doctest::Approx((op_p.f1 - op_m.f1) / (2 * h)).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("theta domain") {
  CHECK_THROWS_AS(solve_complier_risks(1.01, 1.0, Scale::Additive), DomainError);
  CHECK_THROWS_AS(solve_complier_risks(-1.2, 1.0, Scale::Additive), DomainError);
  CHECK_THROWS_AS(solve_complier_risks(0.0, 1.0, Scale::Multiplicative), DomainError);
  CHECK_THROWS_AS(solve_complier_risks(0.5, -0.1, Scale::Additive), DomainError);
  CHECK_NOTHROW(solve_complier_risks(0.5, 0.0, Scale::Additive));
  CHECK_NOTHROW(solve_complier_risks(-1.0, 1.0, Scale::Additive));
  CHECK_THROWS_AS(solve_complier_risks(0.5, -1.0, Scale::Multiplicative), DomainError);
  CHECK_NOTHROW(solve_complier_risks(0.999, 1.0, Scale::Additive));
}

TEST_CASE("forward and inverse maps are inverse to each other") {
  std::mt19937_64 rng(3);
  for (Scale scale : {Scale::Additive, Scale::Multiplicative}) {
    for (int k = 0; k < 2000; ++k) {
      const StructuralPoint sp = draw(rng, scale);
      const CellProbs cp = inverse_map(sp, scale);
      const DeltaReport rep = check_delta(cp);
      REQUIRE(rep.member);
      const StructuralPoint back = forward_map(cp, scale);
      CHECK(back.theta == doctest::Approx(sp.theta).epsilon(1e-10));
      CHECK(back.phi1 == doctest::Approx(sp.phi1).epsilon(1e-10));
      CHECK(back.phi2 == doctest::Approx(sp.phi2).epsilon(1e-10));
      CHECK(back.phi3 == doctest::Approx(sp.phi3).epsilon(1e-10));
      CHECK(back.phi4 == doctest::Approx(sp.phi4).epsilon(1e-10));
      CHECK(back.opco == doctest::Approx(sp.opco).epsilon(1e-9));
      // inverse(forward(p)) = p on the polytope interior
      const CellProbs again = inverse_map(back, scale);
      for (int d = 0; d < 2; ++d)
        for (int y = 0; y < 2; ++y)
          for (int z = 0; z < 2; ++z) CHECK(again(d, y, z) == doctest::Approx(cp(d, y, z)).epsilon(1e-12));
    }
  }
}

TEST_CASE("identification formulas on the cells") {
  StructuralPoint sp{0.25, 0.4, 0.3, 0.6, 0.2, 2.0};
  const CellProbs cp = inverse_map(sp, Scale::Additive);
  const ConditionalMargins m = conditional_margins(cp);
  // Wald ratio and first stage reproduce theta and the complier share.
  CHECK(m.pd[1] - m.pd[0] == doctest::Approx(sp.phi1));
  CHECK((m.py[1] - m.py[0]) / (m.pd[1] - m.pd[0]) == doctest::Approx(sp.theta));
  // Always-takers only appear treated under z = 0.
  CHECK(m.pd[0] == doctest::Approx((1 - sp.phi1) * sp.phi2));
}

TEST_CASE("check_delta") {
  CHECK(check_delta(CellProbs::uniform()).member);
  CellProbs bad = CellProbs::uniform();
  // Move mass so that p(1,1|1) < p(1,1|0) while keeping normalization.
  bad(1, 1, 1) -= 0.1;
  bad(0, 0, 1) += 0.1;
  const DeltaReport r = check_delta(bad);
  CHECK_FALSE(r.member);
  CHECK(r.slack[1] == doctest::Approx(-0.1));
  CHECK(r.min_slack() == doctest::Approx(-0.1));
  CellProbs unnorm = CellProbs::uniform();
  unnorm(0, 0, 0) += 0.01;
  CHECK_FALSE(check_delta(unnorm).member);
  CHECK(check_delta(unnorm).normalization_residual[0] == doctest::Approx(0.01));
}

TEST_CASE("forward map errors on degenerate cells") {
  // No compliers: both arms identical.
  CHECK_THROWS_AS(forward_map(CellProbs::uniform(), Scale::Additive), InstrumentIrrelevant);
  // No never-takers or always-takers: phi2 undefined.
  CellProbs cp{};
  cp(1, 1, 1) = 0.5;
  cp(1, 0, 1) = 0.5;
  cp(0, 1, 0) = 0.5;
  cp(0, 0, 0) = 0.5;
  CHECK_THROWS_AS(forward_map(cp, Scale::Additive), DegenerateStratum);
  CellProbs outside = CellProbs::uniform();
  outside(1, 1, 1) -= 0.2;
  outside(0, 0, 1) += 0.2;
  CHECK_THROWS_AS(forward_map(outside, Scale::Additive), DomainError);
}

TEST_CASE("validate rejects out-of-range points") {
  StructuralPoint sp;
  CHECK_NOTHROW(validate(sp, Scale::Additive));
  sp.phi1 = 1.2;
  CHECK_THROWS_AS(validate(sp, Scale::Additive), DomainError);
  sp.phi1 = 0.5;
  sp.opco = -0.1;
  CHECK_THROWS_AS(validate(sp, Scale::Additive), DomainError);
  sp.opco = 1.0;
  sp.theta = -0.5;
  CHECK_THROWS_AS(validate(sp, Scale::Multiplicative), DomainError);
}

TEST_CASE("feasible contrast range matches vertex enumeration") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(1e-4, 1 - 1e-4);
  for (int k = 0; k < 2000; ++k) {
    const double mean = u(rng), pi = u(rng);
    const Interval r = feasible_contrast_range(mean, pi);
    const auto [lo, hi] = oracle::contrast_range(mean, pi);
    CHECK(r.lo == doctest::Approx(lo).epsilon(1e-12));
    CHECK(r.hi == doctest::Approx(hi).epsilon(1e-12));
    CHECK(r.lo <= 0.0);
    CHECK(r.hi >= 0.0);
  }
  CHECK_THROWS_AS(feasible_contrast_range(0.0, 0.5), DomainError);
}

TEST_CASE("scale names") {
  CHECK(parse_scale(to_string(Scale::Multiplicative)) == Scale::Multiplicative);
  CHECK(parse_scale("additive") == Scale::Additive);
  CHECK_THROWS(parse_scale("ratio"));
}
