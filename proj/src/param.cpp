#include "lateiv/param.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lateiv {

std::string to_string(Scale s) { return s == Scale::Additive ? "additive" : "multiplicative"; }

Scale parse_scale(const std::string& s) {
  if (s == "additive" || s == "add") return Scale::Additive;
  if (s == "multiplicative" || s == "mult") return Scale::Multiplicative;
  throw std::invalid_argument("unknown scale '" + s + "'");
}

CellProbs CellProbs::uniform() {
  CellProbs cp;
  for (auto& a : cp.p)
    for (auto& b : a) b = {0.25, 0.25};
  return cp;
}

namespace detail {

ComplierRisks complier_risks_unchecked(double theta, double op, Scale scale) noexcept {
  ComplierRisks r;
  if (scale == Scale::Additive) {
    // (1 - op) f0^2 + b f0 - op (1 - theta) = 0
    const double b = theta + op * (2.0 - theta);
    const double s = std::sqrt(theta * theta * (op - 1.0) * (op - 1.0) + 4.0 * op);
    double f0;
    if (b >= 0.0) {
      const double den = b + s;
      f0 = den > 0.0 ? 2.0 * op * (1.0 - theta) / den : 0.0;
    } else {
      f0 = (s - b) / (2.0 * (1.0 - op));
    }
    f0 = std::clamp(f0, std::max(0.0, -theta), std::min(1.0, 1.0 - theta));
    r.f0 = f0;
    r.f1 = f0 + theta;
  } else {
    // theta (1 - op) f0^2 + op (theta + 1) f0 - op = 0
    const double b = op * (theta + 1.0);
    const double s = std::sqrt(op * op * (theta - 1.0) * (theta - 1.0) + 4.0 * theta * op);
    const double den = b + s;
    double f0 = den > 0.0 ? 2.0 * op / den : 0.0;
    f0 = std::clamp(f0, 0.0, std::min(1.0, 1.0 / theta));
    r.f0 = f0;
    r.f1 = std::min(1.0, theta * f0);
  }
  return r;
}

ComplierRiskJet complier_risk_jet_unchecked(double theta, double op, Scale scale) noexcept {
  const ComplierRisks r = complier_risks_unchecked(theta, op, scale);
  ComplierRiskJet j;
  j.f0 = r.f0;
  j.f1 = r.f1;
  const double f0 = r.f0, f1 = r.f1;
  // Implicit differentiation of g(f0; theta, op) = f0 f1 - op (1-f0)(1-f1) = 0.
  const double g_op = -(1.0 - f0) * (1.0 - f1);
  double g_f, g_theta;
  if (scale == Scale::Additive) {
    g_f = f0 + f1 + op * ((1.0 - f1) + (1.0 - f0));
    g_theta = f0 + op * (1.0 - f0);
  } else {
    g_f = 2.0 * f1 + op * ((1.0 - f1) + theta * (1.0 - f0));
    g_theta = f0 * f0 + op * (1.0 - f0) * f0;
  }
  if (g_f > 0.0) {
    j.df0_dtheta = -g_theta / g_f;
    j.df0_dop = -g_op / g_f;
  }
  if (scale == Scale::Additive) {
    j.df1_dtheta = j.df0_dtheta + 1.0;
    j.df1_dop = j.df0_dop;
  } else {
    j.df1_dtheta = f0 + theta * j.df0_dtheta;
    j.df1_dop = theta * j.df0_dop;
  }
  return j;
}

}  // namespace detail

void check_theta_domain(double theta, Scale scale) {
  if (!std::isfinite(theta)) throw DomainError("theta is not finite");
  if (scale == Scale::Additive) {
    if (theta < -1.0 || theta > 1.0) throw DomainError("additive theta outside [-1, 1]");
  } else if (theta <= kThetaFloor) {
    throw DomainError("multiplicative theta must exceed the positivity floor");
  }
}

static void check_op_domain(double op) {
  if (!(op >= 0.0) || !std::isfinite(op)) throw DomainError("odds product must be finite and non-negative");
}

ComplierRisks solve_complier_risks(double theta, double opco, Scale scale) {
  check_theta_domain(theta, scale);
  check_op_domain(opco);
  return detail::complier_risks_unchecked(theta, opco, scale);
}

ComplierRiskJet complier_risk_jet(double theta, double opco, Scale scale) {
  check_theta_domain(theta, scale);
  check_op_domain(opco);
  return detail::complier_risk_jet_unchecked(theta, opco, scale);
}

void validate(const StructuralPoint& sp, Scale scale) {
  check_theta_domain(sp.theta, scale);
  check_op_domain(sp.opco);
  for (double phi : {sp.phi1, sp.phi2, sp.phi3, sp.phi4})
    if (!(phi >= 0.0 && phi <= 1.0)) throw DomainError("phi component outside [0, 1]");
}

CellProbs inverse_map(const StructuralPoint& sp, Scale scale) {
  validate(sp, scale);
  return detail::inverse_map_unchecked(sp, scale);
}

CellProbs detail::inverse_map_unchecked(const StructuralPoint& sp, Scale scale) noexcept {
  const ComplierRisks f = detail::complier_risks_unchecked(sp.theta, sp.opco, scale);
  const double nt = (1.0 - sp.phi1) * (1.0 - sp.phi2);
  const double at = (1.0 - sp.phi1) * sp.phi2;
  CellProbs cp;
  cp(0, 1, 1) = nt * sp.phi3;
  cp(0, 0, 1) = nt * (1.0 - sp.phi3);
  cp(1, 1, 0) = at * sp.phi4;
  cp(1, 0, 0) = at * (1.0 - sp.phi4);
  cp(1, 1, 1) = f.f1 * sp.phi1 + cp(1, 1, 0);
  cp(1, 0, 1) = (1.0 - f.f1) * sp.phi1 + cp(1, 0, 0);
  cp(0, 1, 0) = f.f0 * sp.phi1 + cp(0, 1, 1);
  cp(0, 0, 0) = (1.0 - f.f0) * sp.phi1 + cp(0, 0, 1);
  return cp;
}

StructuralPoint forward_map(const CellProbs& cp, Scale scale) {
  const DeltaReport report = check_delta(cp);
  if (!report.member) throw DomainError("cell probabilities lie outside the IV polytope");

  const double nt = cp(0, 0, 1) + cp(0, 1, 1);
  const double at = cp(1, 0, 0) + cp(1, 1, 0);
  StructuralPoint sp;
  sp.phi1 = 1.0 - nt - at;
  if (!(sp.phi1 > 0.0)) throw InstrumentIrrelevant();

  if (!(nt + at > 0.0)) throw DegenerateStratum("phi2");
  sp.phi2 = at / (nt + at);
  if (!(nt > 0.0)) throw DegenerateStratum("phi3");
  sp.phi3 = cp(0, 1, 1) / nt;
  if (!(at > 0.0)) throw DegenerateStratum("phi4");
  sp.phi4 = cp(1, 1, 0) / at;

  const double co_y1 = cp(1, 1, 1) - cp(1, 1, 0);  // P(Y(1)=1, CO)
  const double co_y0 = cp(0, 1, 0) - cp(0, 1, 1);  // P(Y(0)=1, CO)
  const double co_n1 = cp(1, 0, 1) - cp(1, 0, 0);  // P(Y(1)=0, CO)
  const double co_n0 = cp(0, 0, 0) - cp(0, 0, 1);  // P(Y(0)=0, CO)
  if (!(co_n1 * co_n0 != 0.0)) throw DegenerateStratum("opco");
  sp.opco = co_y1 * co_y0 / (co_n1 * co_n0);

  if (scale == Scale::Additive) {
    const double dy = (cp(0, 1, 1) + cp(1, 1, 1)) - (cp(0, 1, 0) + cp(1, 1, 0));
    sp.theta = dy / sp.phi1;
  } else {
    if (!(co_y0 != 0.0)) throw DegenerateStratum("theta");
    sp.theta = co_y1 / co_y0;
  }
  return sp;
}

double DeltaReport::min_slack() const { return *std::min_element(slack.begin(), slack.end()); }

DeltaReport check_delta(const CellProbs& cp, double tol) {
  DeltaReport r;
  for (int z = 0; z < 2; ++z) {
    double sum = 0.0;
    for (int d = 0; d < 2; ++d)
      for (int y = 0; y < 2; ++y) {
        const double v = cp(d, y, z);
        sum += v;
        if (!(v >= -tol && v <= 1.0 + tol)) r.entries_in_unit_interval = false;
      }
    r.normalization_residual[z] = sum - 1.0;
  }
  r.slack[0] = cp(1, 0, 1) - cp(1, 0, 0);
  r.slack[1] = cp(1, 1, 1) - cp(1, 1, 0);
  r.slack[2] = cp(0, 0, 0) - cp(0, 0, 1);
  r.slack[3] = cp(0, 1, 0) - cp(0, 1, 1);
  r.member = r.entries_in_unit_interval;
  for (double res : r.normalization_residual)
    if (!(std::abs(res) <= tol)) r.member = false;
  for (double s : r.slack)
    if (!(s >= -tol)) r.member = false;
  return r;
}

ConditionalMargins conditional_margins(const CellProbs& cp) {
  ConditionalMargins m;
  for (int z = 0; z < 2; ++z) {
    m.py[z] = cp(0, 1, z) + cp(1, 1, z);
    m.pd[z] = cp(1, 0, z) + cp(1, 1, z);
    m.pdy[z] = cp(1, 1, z);
  }
  return m;
}

Interval feasible_contrast_range(double mean, double pi) {
  if (!(mean > 0.0 && mean < 1.0 && pi > 0.0 && pi < 1.0))
    throw DomainError("feasible_contrast_range requires mean and pi in (0, 1)");
  return {std::max(-mean / (1.0 - pi), -(1.0 - mean) / pi),
          std::min((1.0 - mean) / (1.0 - pi), mean / pi)};
}

}  // namespace lateiv
