#pragma once

// Observed-data polytope and the variation-independent parameterization of
// the binary instrumental variable model.
//
// A CellProbs holds p(d, y | z) at one covariate value. A StructuralPoint
// holds (theta, phi1..phi4, opco): the treatment effect among compliers,
// the complier share, the always-taker share among non-compliers, the
// never-taker and always-taker outcome risks, and the complier odds product.
// inverse_map and forward_map are exact inverses of each other on the
// interior of the polytope.

#include <array>
#include <stdexcept>
#include <string>

namespace lateiv {

enum class Scale { Additive, Multiplicative };

/// Multiplicative effects at or below this value are rejected.
inline constexpr double kThetaFloor = 1e-10;
/// Default tolerance for polytope membership of exact-arithmetic inputs.
inline constexpr double kDeltaTol = 1e-9;

std::string to_string(Scale s);
Scale parse_scale(const std::string& s);

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The complier share is zero: the effect is not identified.
class InstrumentIrrelevant : public std::runtime_error {
 public:
  InstrumentIrrelevant() : std::runtime_error("instrument irrelevant: complier share is zero") {}
};

/// A zero denominator in one of the forward-map ratios.
class DegenerateStratum : public std::runtime_error {
 public:
  explicit DegenerateStratum(std::string component)
      : std::runtime_error("degenerate stratum: zero denominator in " + component),
        component_(std::move(component)) {}
  const std::string& component() const noexcept { return component_; }

 private:
  std::string component_;
};

struct CellProbs {
  // p[d][y][z]
  std::array<std::array<std::array<double, 2>, 2>, 2> p{};

  double operator()(int d, int y, int z) const { return p[d][y][z]; }
  double& operator()(int d, int y, int z) { return p[d][y][z]; }

  static CellProbs uniform();
};

struct StructuralPoint {
  double theta = 0.0;
  double phi1 = 0.5;
  double phi2 = 0.5;
  double phi3 = 0.5;
  double phi4 = 0.5;
  double opco = 1.0;
};

struct ComplierRisks {
  double f0 = 0.0;  // E{Y(0) | complier}
  double f1 = 0.0;  // E{Y(1) | complier}
};

/// Complier risks together with their partial derivatives in (theta, opco).
struct ComplierRiskJet {
  double f0 = 0.0, f1 = 0.0;
  double df0_dtheta = 0.0, df0_dop = 0.0;
  double df1_dtheta = 0.0, df1_dop = 0.0;
};

namespace detail {

// Root of the complier quadratic in conjugate form. The textbook closed form
// is 0/0 at opco = 1; this one is smooth there and equal to it elsewhere.
// No domain checks: callers on hot paths validate once.
ComplierRisks complier_risks_unchecked(double theta, double opco, Scale scale) noexcept;
ComplierRiskJet complier_risk_jet_unchecked(double theta, double opco, Scale scale) noexcept;

}  // namespace detail

void check_theta_domain(double theta, Scale scale);

/// Solves f1 - f0 = theta (or f1 / f0 = theta) and
/// f0 f1 / ((1 - f0)(1 - f1)) = opco for the complier risks.
ComplierRisks solve_complier_risks(double theta, double opco, Scale scale);
ComplierRiskJet complier_risk_jet(double theta, double opco, Scale scale);

void validate(const StructuralPoint& sp, Scale scale);

CellProbs inverse_map(const StructuralPoint& sp, Scale scale);
namespace detail {
CellProbs inverse_map_unchecked(const StructuralPoint& sp, Scale scale) noexcept;
}
StructuralPoint forward_map(const CellProbs& cp, Scale scale);

struct DeltaReport {
  bool member = false;
  std::array<double, 2> normalization_residual{};  // indexed by z
  // p(1,0|1)-p(1,0|0), p(1,1|1)-p(1,1|0), p(0,0|0)-p(0,0|1), p(0,1|0)-p(0,1|1)
  std::array<double, 4> slack{};
  bool entries_in_unit_interval = true;

  double min_slack() const;
};

DeltaReport check_delta(const CellProbs& cp, double tol = kDeltaTol);

struct ConditionalMargins {
  std::array<double, 2> py{};   // P(Y=1 | z)
  std::array<double, 2> pd{};   // P(D=1 | z)
  std::array<double, 2> pdy{};  // P(DY=1 | z)
};

ConditionalMargins conditional_margins(const CellProbs& cp);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Range of E(W|Z=1) - E(W|Z=0) for a binary W with marginal mean `mean`
/// when P(Z=1) = pi.
Interval feasible_contrast_range(double mean, double pi);

}  // namespace lateiv
