#include "lateiv/comparators.hpp"

#include "lateiv/moment.hpp"
#include "lateiv/numopt.hpp"
#include "lateiv/proposed.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace lateiv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Link theta_link(Scale s) { return s == Scale::Additive ? Link::Tanh : Link::Exp; }

void flag(FitResult& out, const std::string& what, const SolveReport& rep) {
  if (rep.converged) return;
  out.converged = false;
  ++out.warnings;
  out.message = what + ": " + rep.message;
}

// Mean-NLL minimization with jittered restarts only after a failed start.
SolveReport minimize_with_restarts(const SmoothObjective& obj, const Vector& x0, const OptimConfig& cfg) {
  SolveReport best = minimize_smooth(obj, x0, cfg);
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> jitter(0.0, 0.5);
  for (int k = 0; k < cfg.restarts && !best.converged; ++k) {
    Vector start = x0;
    for (Index j = 0; j < start.size(); ++j) start[j] += jitter(rng);
    SolveReport rep = minimize_smooth(obj, start, cfg);
    if (rep.converged || !(best.objective_or_residual <= rep.objective_or_residual)) best = rep;
  }
  return best;
}

Vector expit_fit(const Matrix& x, const Vector& coef) {
  Vector v = x * coef;
  for (Index i = 0; i < v.size(); ++i) v[i] = expit(v[i]);
  return v;
}

Vector logistic_block(const Vector& target, const Matrix& x, const OptimConfig& cfg, const std::string& label,
                      FitResult& out) {
  const SolveReport rep = fit_logistic(target, x, cfg);
  out.nuisance[label] = rep.solution;
  flag(out, label + " model", rep);
  return expit_fit(x, rep.solution);
}

Vector theta_values(const Matrix& xt, const Vector& alpha, Scale scale) {
  Vector th = xt * alpha;
  for (Index i = 0; i < th.size(); ++i) th[i] = apply_link(theta_link(scale), th[i]);
  return th;
}

double h_value(double y, double d, double th, Scale scale) {
  return scale == Scale::Additive ? y - d * th : (d != 0.0 ? y / th : y);
}

}  // namespace

double rdlink_nll(const Vector& outcome, const Vector& regressor, const Matrix& contrast_design,
                  const Matrix& op_design, Link contrast_link, const Vector* multiplier, const Vector& coefs,
                  Vector* grad) {
  const Index n = outcome.size();
  const Index pc = contrast_design.cols();
  const Index po = op_design.cols();
  const Scale scale = contrast_link == Link::Tanh ? Scale::Additive : Scale::Multiplicative;
  const Vector ec = contrast_design * coefs.head(pc);
  const Vector eo = op_design * coefs.tail(po);
  Vector sc(n), so(n);
  double nll = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double base = apply_link(contrast_link, ec[i]);
    const double mult = multiplier ? (*multiplier)[i] : 1.0;
    const double c = base * mult;
    if (scale == Scale::Multiplicative && !(c > kThetaFloor && std::isfinite(c))) return kInf;
    const double op = std::exp(eo[i]);
    if (!std::isfinite(op)) return kInf;
    const ComplierRiskJet j = detail::complier_risk_jet_unchecked(c, op, scale);
    const bool v1 = regressor[i] != 0.0;
    const double p = v1 ? j.f1 : j.f0;
    const double dp_dc = v1 ? j.df1_dtheta : j.df0_dtheta;
    const double dp_dop = v1 ? j.df1_dop : j.df0_dop;
    double dl_dp;
    if (outcome[i] != 0.0) {
      if (!(p > 0.0)) return kInf;
      nll -= std::log(p);
      dl_dp = -1.0 / p;
    } else {
      if (!(p < 1.0)) return kInf;
      nll -= std::log1p(-p);
      dl_dp = 1.0 / (1.0 - p);
    }
    sc[i] = dl_dp * dp_dc * mult * link_slope(contrast_link, base);
    so[i] = dl_dp * dp_dop * op;
  }
  const double nd = static_cast<double>(n);
  if (grad) {
    grad->resize(pc + po);
    grad->head(pc) = contrast_design.transpose() * sc / nd;
    grad->tail(po) = op_design.transpose() * so / nd;
  }
  return nll / nd;
}

FitResult fit_rdlink(const Vector& outcome, const Vector& regressor, const Matrix& contrast_design,
                     const Matrix& op_design, const RdLinkSpec& spec, const OptimConfig& cfg) {
  if (spec.contrast_link != Link::Tanh && spec.contrast_link != Link::Exp)
    throw std::invalid_argument("contrast link must be tanh or exp");
  if (spec.contrast_multiplier && spec.contrast_link != Link::Tanh)
    throw std::invalid_argument("contrast multiplier is defined for the additive contrast only");
  const Index pc = contrast_design.cols();
  const Index po = op_design.cols();
  Vector x0 = Vector::Zero(pc + po);
  if (spec.contrast_coefs.size() == pc) x0.head(pc) = spec.contrast_coefs;
  if (spec.op_coefs.size() == po) x0.tail(po) = spec.op_coefs;
  const SmoothObjective obj = [&](const Vector& x, Vector& g) {
    return rdlink_nll(outcome, regressor, contrast_design, op_design, spec.contrast_link, spec.contrast_multiplier,
                      x, &g);
  };
  const SolveReport rep = minimize_with_restarts(obj, x0, cfg);
  FitResult out;
  out.estimator_tag = "rdlink";
  out.scale = spec.contrast_link == Link::Tanh ? Scale::Additive : Scale::Multiplicative;
  out.alpha = rep.solution.head(pc);
  out.nuisance["op"] = rep.solution.tail(po);
  out.converged = rep.converged;
  out.loglik_or_residual = -rep.objective_or_residual * static_cast<double>(outcome.size());
  out.message = rep.message;
  return out;
}

Matrix power_basis(const Dataset& data, const Selector& sel, int degree) {
  Matrix base = design_matrix(data, sel);
  if (base.cols() == 0 || degree < 2) return base;
  const Vector last = base.col(base.cols() - 1);
  bool binary = true;
  for (Index i = 0; i < last.size() && binary; ++i) binary = last[i] == 0.0 || last[i] == 1.0;
  if (binary) return base;
  Matrix out(base.rows(), base.cols() + degree - 1);
  out.leftCols(base.cols()) = base;
  Vector pw = last;
  for (int k = 2; k <= degree; ++k) {
    pw = pw.cwiseProduct(last);
    out.col(base.cols() + k - 2) = pw;
  }
  return out;
}

namespace {

// Outcome-regression fit shared by the three estimators of this family.
struct OgburnRegression {
  Matrix basis;   // E(H|X) working basis
  Matrix xt;      // target design
  Vector xi;
  Vector alpha;
  SolveReport report;

  Vector expected_h(Scale scale) const {
    Vector e = basis * xi;
    if (scale == Scale::Multiplicative) e = e.array().exp().matrix();
    return e;
  }
};

Vector ogburn_moment(const Dataset& data, const Matrix& basis, const Matrix& xt, Scale scale, const Vector& xi,
                     const Vector& alpha, bool xi_block_only) {
  const Index q = basis.cols();
  const Index p = xt.cols();
  const Index n = data.n();
  const Vector th = theta_values(xt, alpha, scale);
  Vector eh = basis * xi;
  if (scale == Scale::Multiplicative) eh = eh.array().exp().matrix();
  Vector m = Vector::Zero(xi_block_only ? q : q + p);
  for (Index i = 0; i < n; ++i) {
    if (scale == Scale::Multiplicative && !(th[i] > kThetaFloor && std::isfinite(th[i])))
      return Vector::Constant(m.size(), kNaN);
    const double r = h_value(data.y[i], data.d[i], th[i], scale) - eh[i];
    const double wx = scale == Scale::Additive ? r : eh[i] * r;
    m.head(q) += basis.row(i).transpose() * wx;
    if (!xi_block_only && data.z[i] != 0.0) {
      const double dt = scale == Scale::Additive ? 1.0 - th[i] * th[i] : th[i];
      m.tail(p) += xt.row(i).transpose() * (dt * r);
    }
  }
  return m / static_cast<double>(n);
}

OgburnRegression ogburn_regression(const Dataset& data, const Design& design, Scale scale, const OptimConfig& cfg) {
  OgburnRegression reg;
  reg.basis = power_basis(data, design.nuisance, scale == Scale::Additive ? 3 : 2);
  reg.xt = design_matrix(data, design.theta);
  require_full_rank(reg.basis);
  const Index q = reg.basis.cols();
  const Index p = reg.xt.cols();
  const Vector alpha0 = Vector::Zero(p);
  // Working-model block at alpha = 0 first, then the stacked system.
  const SolveReport init = solve_moment(
      [&](const Vector& xi) { return ogburn_moment(data, reg.basis, reg.xt, scale, xi, alpha0, true); },
      Vector::Zero(q), cfg);
  Vector start(q + p);
  start << init.solution, alpha0;
  reg.report = solve_moment(
      [&](const Vector& v) { return ogburn_moment(data, reg.basis, reg.xt, scale, v.head(q), v.tail(p), false); },
      start, cfg);
  reg.xi = reg.report.solution.head(q);
  reg.alpha = reg.report.solution.tail(p);
  return reg;
}

FitResult ogburn_result(const std::string& tag, Scale scale, const OgburnRegression& reg) {
  FitResult out;
  out.estimator_tag = tag;
  out.scale = scale;
  out.converged = true;
  out.nuisance["xi"] = reg.xi;
  flag(out, "outcome regression", reg.report);
  return out;
}

// Ogburn doubly robust stage with E(H|X) frozen at the regression fit.
FitResult ogburn_dr(const std::string& tag, const Dataset& data, const Design& design, Scale scale,
                    const OptimConfig& cfg, const OgburnRegression& reg, FitResult out, const Vector& pi,
                    const Matrix* weights) {
  const Vector eh = reg.expected_h(scale);
  const Vector zero = Vector::Zero(data.n());
  const DrMoment moment = scale == Scale::Additive
                              ? DrMoment::affine(data, design.theta, scale, eh, zero, pi, weights)
                              : DrMoment::affine(data, design.theta, scale, zero, eh, pi, weights);
  const SolveReport rep = solve_moment([&](const Vector& a) { return moment.mean(a); }, reg.alpha, cfg);
  out.estimator_tag = tag;
  out.alpha = rep.solution;
  out.loglik_or_residual = rep.objective_or_residual;
  flag(out, "moment equation", rep);
  if (out.message.empty()) out.message = rep.message;
  return out;
}

}  // namespace

FitResult fit_reg_ogburn(const Dataset& data, const Design& design, Scale scale, const OptimConfig& cfg) {
  const OgburnRegression reg = ogburn_regression(data, design, scale, cfg);
  FitResult out = ogburn_result("reg.ogburn", scale, reg);
  out.alpha = reg.alpha;
  out.loglik_or_residual = reg.report.objective_or_residual;
  if (out.message.empty()) out.message = reg.report.message;
  return out;
}

FitResult fit_dru_ogburn(const Dataset& data, const Design& design, Scale scale, const OptimConfig& cfg) {
  const OgburnRegression reg = ogburn_regression(data, design, scale, cfg);
  FitResult out = ogburn_result("dru.ogburn", scale, reg);
  const Vector pi = fit_instrument(data, design.instrument, cfg, out);
  return ogburn_dr("dru.ogburn", data, design, scale, cfg, reg, std::move(out), pi, nullptr);
}

FitResult fit_drw_ogburn(const Dataset& data, const Design& design, Scale scale, const OptimConfig& cfg,
                         bool identity_weight) {
  const OgburnRegression reg = ogburn_regression(data, design, scale, cfg);
  FitResult out = ogburn_result("drw.ogburn", scale, reg);
  const Vector pi = fit_instrument(data, design.instrument, cfg, out);
  if (identity_weight) {
    const Matrix w = reg.xt;
    return ogburn_dr("drw.ogburn", data, design, scale, cfg, reg, std::move(out), pi, &w);
  }

  const Index n = data.n();
  const Vector th = theta_values(reg.xt, reg.alpha, scale);
  const Vector eh = reg.expected_h(scale);

  // Variance model for {H - E(H|X)}^2 / f^2(Z|X).
  Vector target(n);
  for (Index i = 0; i < n; ++i) {
    const double f = data.z[i] != 0.0 ? pi[i] : 1.0 - pi[i];
    const double r = h_value(data.y[i], data.d[i], th[i], scale) - eh[i];
    target[i] = r * r / (f * f);
  }
  const Matrix vbasis = power_basis(data, design.nuisance, 2);
  Vector v;
  if (scale == Scale::Additive) {
    const SolveReport ls = fit_least_squares(target, vbasis);
    out.nuisance["zeta"] = ls.solution;
    v = consumed_fit(vbasis, ls.solution, true);
  } else {
    require_full_rank(vbasis);
    const double nd = static_cast<double>(n);
    const SmoothObjective obj = [&](const Vector& zeta, Vector& g) {
      const Vector fit = (vbasis * zeta).array().exp().matrix();
      const Vector r = target - fit;
      g = -2.0 * vbasis.transpose() * r.cwiseProduct(fit) / nd;
      return r.squaredNorm() / nd;
    };
    // Start at the constant fit exp(log mean).
    const Vector z0 =
        fit_least_squares(Vector::Constant(n, std::log(std::max(target.mean(), 1e-3))), vbasis).solution;
    const SolveReport rep = minimize_with_restarts(obj, z0, cfg);
    out.nuisance["zeta"] = rep.solution;
    flag(out, "variance model", rep);
    v = consumed_fit(vbasis, rep.solution, false).array().exp().matrix();
  }
  int floored = 0;
  for (Index i = 0; i < n; ++i)
    if (!(v[i] > kVarianceFloor)) {
      v[i] = kVarianceFloor;
      ++floored;
    }
  if (floored > 0) ++out.warnings;

  // Treatment-side factor of the weight.
  Vector factor(n);
  const Matrix xn = design_matrix(data, design.nuisance);
  if (scale == Scale::Additive) {
    RdLinkSpec spec;
    const FitResult dd = fit_rdlink(data.d, data.z, xn, xn, spec, cfg);
    out.nuisance["psi"] = dd.alpha;
    out.nuisance["tau"] = dd.nuisance.at("op");
    if (!dd.converged) {
      out.converged = false;
      ++out.warnings;
      out.message = "compliance model: " + dd.message;
    }
    const Vector delta = theta_values(xn, dd.alpha, Scale::Additive);
    for (Index i = 0; i < n; ++i) factor[i] = (1.0 - th[i] * th[i]) * delta[i] / v[i];
  } else {
    Matrix xzn(n, xn.cols() + 1);
    xzn.col(0) = data.z;
    xzn.rightCols(xn.cols()) = xn;
    const Vector dy = data.d.cwiseProduct(data.y);
    logistic_block(dy, xzn, cfg, "psi", out);
    const Vector& psi = out.nuisance["psi"];
    const Vector base = xn * psi.tail(xn.cols());
    for (Index i = 0; i < n; ++i) factor[i] = (expit(psi[0] + base[i]) - expit(base[i])) / (th[i] * v[i]);
  }
  Matrix w(n, reg.xt.cols());
  for (Index i = 0; i < n; ++i) w.row(i) = -factor[i] * reg.xt.row(i);
  return ogburn_dr("drw.ogburn", data, design, scale, cfg, reg, std::move(out), pi, &w);
}

namespace {

struct WangFit {
  FitResult result;
  Vector delta_d;  // tanh(lambda'X)
  Vector op_d;
  Vector op_y;
};

WangFit wang_mle(const Dataset& data, const Design& design, const OptimConfig& cfg) {
  WangFit w;
  FitResult& out = w.result;
  out.estimator_tag = "mle.wang";
  out.scale = Scale::Additive;
  out.converged = true;
  const Matrix xn = design_matrix(data, design.nuisance);
  const Matrix xt = design_matrix(data, design.theta);

  const FitResult dd = fit_rdlink(data.d, data.z, xn, xn, RdLinkSpec{}, cfg);
  out.nuisance["lambda"] = dd.alpha;
  out.nuisance["tau"] = dd.nuisance.at("op");
  if (!dd.converged) {
    out.converged = false;
    ++out.warnings;
    out.message = "compliance model: " + dd.message;
  }
  w.delta_d = theta_values(xn, dd.alpha, Scale::Additive);
  w.op_d = (xn * dd.nuisance.at("op")).array().exp().matrix();

  RdLinkSpec spec;
  spec.contrast_multiplier = &w.delta_d;
  const FitResult yy = fit_rdlink(data.y, data.z, xt, xn, spec, cfg);
  out.alpha = yy.alpha;
  out.nuisance["kappa"] = yy.nuisance.at("op");
  out.loglik_or_residual = yy.loglik_or_residual;
  if (!yy.converged) {
    out.converged = false;
    ++out.warnings;
    out.message = "outcome model: " + yy.message;
  }
  if (out.message.empty()) out.message = yy.message;
  w.op_y = (xn * yy.nuisance.at("op")).array().exp().matrix();
  return w;
}

}  // namespace

FitResult fit_mle_wang(const Dataset& data, const Design& design, const OptimConfig& cfg) {
  return wang_mle(data, design, cfg).result;
}

FitResult fit_dru_wang(const Dataset& data, const Design& design, const OptimConfig& cfg) {
  WangFit w = wang_mle(data, design, cfg);
  FitResult out = w.result;
  out.estimator_tag = "dru.wang";
  const Vector pi = fit_instrument(data, design.instrument, cfg, out);
  const Matrix xt = design_matrix(data, design.theta);
  const Vector th = theta_values(xt, w.result.alpha, Scale::Additive);
  const Index n = data.n();
  Vector ey0(n), ed0(n);
  for (Index i = 0; i < n; ++i) {
    ed0[i] = detail::complier_risks_unchecked(w.delta_d[i], w.op_d[i], Scale::Additive).f0;
    ey0[i] = detail::complier_risks_unchecked(th[i] * w.delta_d[i], w.op_y[i], Scale::Additive).f0;
  }
  const DrMoment moment = DrMoment::affine(data, design.theta, Scale::Additive, ey0, ed0, pi);
  const SolveReport rep = solve_moment([&](const Vector& a) { return moment.mean(a); }, w.result.alpha, cfg);
  out.alpha = rep.solution;
  out.loglik_or_residual = rep.objective_or_residual;
  flag(out, "moment equation", rep);
  if (out.converged) out.message = rep.message;
  return out;
}

double complier_weight(double d, double z, double pi) {
  return 1.0 - d * (1.0 - z) / (1.0 - pi) - (1.0 - d) * z / pi;
}

double abadie_objective(const Vector& y, const Vector& d, const Vector& w, const Matrix& theta_design,
                        const Matrix& outcome_design, Scale scale, const Vector& coefs, Vector* grad) {
  const Index p = theta_design.cols();
  const Index q = outcome_design.cols();
  const Index n = y.size();
  const Vector et = theta_design * coefs.head(p);
  const Vector eo = outcome_design * coefs.tail(q);
  Vector gt(n), go(n);
  double obj = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double base = expit(eo[i]);
    const double dbase = base * expit(-eo[i]);
    double m, dm_t, dm_o;
    if (scale == Scale::Additive) {
      const double th = std::tanh(et[i]);
      m = d[i] * th + base;
      dm_t = d[i] * (1.0 - th * th);
      dm_o = dbase;
    } else {
      const double tpow = d[i] != 0.0 ? std::exp(et[i]) : 1.0;
      m = tpow * base;
      dm_t = d[i] * m;
      dm_o = tpow * dbase;
    }
    const double r = y[i] - m;
    obj += w[i] * r * r;
    gt[i] = -2.0 * w[i] * r * dm_t;
    go[i] = -2.0 * w[i] * r * dm_o;
  }
  const double nd = static_cast<double>(n);
  if (grad) {
    grad->resize(p + q);
    grad->head(p) = theta_design.transpose() * gt / nd;
    grad->tail(q) = outcome_design.transpose() * go / nd;
  }
  return obj / nd;
}

FitResult fit_ls_abadie(const Dataset& data, const Design& design, Scale scale, const OptimConfig& cfg) {
  FitResult out;
  out.estimator_tag = "ls.abadie";
  out.scale = scale;
  out.converged = true;
  Vector pi = fit_instrument(data, design.instrument, cfg, out);
  int clipped = 0;
  for (Index i = 0; i < pi.size(); ++i) {
    const double c = std::clamp(pi[i], kPiClip, 1.0 - kPiClip);
    if (c != pi[i]) ++clipped;
    pi[i] = c;
  }
  if (clipped > 0) ++out.warnings;
  Vector w(data.n());
  for (Index i = 0; i < data.n(); ++i) w[i] = complier_weight(data.d[i], data.z[i], pi[i]);
  const Matrix xt = design_matrix(data, design.theta);
  const Matrix xo = design_matrix(data, design.nuisance);
  const SmoothObjective obj = [&](const Vector& x, Vector& g) {
    return abadie_objective(data.y, data.d, w, xt, xo, scale, x, &g);
  };
  const SolveReport rep = minimize_with_restarts(obj, Vector::Zero(xt.cols() + xo.cols()), cfg);
  out.alpha = rep.solution.head(xt.cols());
  out.nuisance["varphi"] = rep.solution.tail(xo.cols());
  out.loglik_or_residual = rep.objective_or_residual;
  flag(out, "weighted least squares", rep);
  if (out.converged) out.message = rep.message;
  return out;
}

FitResult fit_mle_crude(const Dataset& data, const Design& design, Scale scale, const OptimConfig& cfg) {
  const Matrix xt = design_matrix(data, design.theta);
  const Matrix xn = design_matrix(data, design.nuisance);
  RdLinkSpec spec;
  spec.contrast_link = theta_link(scale);
  const FitResult yd = fit_rdlink(data.y, data.d, xt, xn, spec, cfg);
  FitResult out;
  out.estimator_tag = "mle.crude";
  out.scale = scale;
  out.alpha = yd.alpha;
  out.nuisance["rho"] = yd.nuisance.at("op");
  out.converged = yd.converged;
  out.loglik_or_residual = yd.loglik_or_residual;
  out.message = yd.message;
  logistic_block(data.d, xn, cfg, "upsilon", out);
  return out;
}

}  // namespace lateiv
