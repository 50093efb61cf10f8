#include "lateiv/proposed.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace lateiv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum Slot { kTheta, kPhi1, kPhi2, kPhi3, kPhi4, kOp, kSlots };

std::vector<const CurveModel*> free_curves(const ModelSet& ms) {
  std::vector<const CurveModel*> out{&ms.theta, &ms.phi1};
  if (!ms.one_sided) out.push_back(&ms.phi2);
  out.push_back(&ms.phi3);
  if (!ms.one_sided) out.push_back(&ms.phi4);
  out.push_back(&ms.op);
  return out;
}

// Position of each slot in the free-curve list, -1 when fixed.
std::array<int, kSlots> slot_positions(bool one_sided) {
  if (one_sided) return {0, 1, -1, 2, -1, 3};
  return {0, 1, 2, 3, 4, 5};
}

}  // namespace

JointLikelihood::JointLikelihood(const ModelSet& layout, const Dataset& data) : layout_(layout), n_(data.n()) {
  layout_.validate();
  Index at = 0;
  for (const CurveModel* c : free_curves(layout_)) {
    designs_.push_back(design_matrix(data, c->selector));
    offsets_.push_back(at);
    at += static_cast<Index>(c->selector.size());
  }
  offsets_.push_back(at);
  cell_.resize(static_cast<std::size_t>(n_));
  for (Index i = 0; i < n_; ++i)
    cell_[static_cast<std::size_t>(i)] =
        static_cast<unsigned char>(4 * (data.d[i] != 0.0) + 2 * (data.y[i] != 0.0) + (data.z[i] != 0.0));
}

void JointLikelihood::accumulate(const Vector& free, Index begin, Index end, ValueGrad& acc) const {
  const Index m = end - begin;
  const auto curves = designs_.size();
  Matrix eta(m, static_cast<Index>(curves));
  for (std::size_t k = 0; k < curves; ++k) {
    const Index len = offsets_[k + 1] - offsets_[k];
    eta.col(static_cast<Index>(k)).noalias() = designs_[k].middleRows(begin, m) * free.segment(offsets_[k], len);
  }
  const auto pos = slot_positions(layout_.one_sided);
  const Scale scale = layout_.scale;
  Matrix score(m, static_cast<Index>(curves));  // d NLL / d eta
  double nll = 0.0;

  for (Index r = 0; r < m; ++r) {
    const double th = apply_link(layout_.theta.link, eta(r, pos[kTheta]));
    if (scale == Scale::Multiplicative && !(th > kThetaFloor && std::isfinite(th))) {
      acc.value = kInf;
      return;
    }
    const double op = std::exp(eta(r, pos[kOp]));
    const double e1 = eta(r, pos[kPhi1]);
    const double phi1 = expit(e1), q1 = expit(-e1);
    double phi2 = 0.0, q2 = 1.0, phi4 = 0.0, q4 = 1.0;
    if (pos[kPhi2] >= 0) {
      phi2 = expit(eta(r, pos[kPhi2]));
      q2 = expit(-eta(r, pos[kPhi2]));
      phi4 = expit(eta(r, pos[kPhi4]));
      q4 = expit(-eta(r, pos[kPhi4]));
    }
    const double phi3 = expit(eta(r, pos[kPhi3])), q3 = expit(-eta(r, pos[kPhi3]));
    const ComplierRiskJet jet = detail::complier_risk_jet_unchecked(th, op, scale);

    const unsigned c = cell_[static_cast<std::size_t>(begin + r)];
    const int d = (c >> 2) & 1, y = (c >> 1) & 1, z = c & 1;
    const double sy = y ? 1.0 : -1.0;
    const double r3 = y ? phi3 : q3;
    const double r4 = y ? phi4 : q4;
    const double nt = q1 * q2, at = q1 * phi2;

    double p = 0.0;
    double dth = 0.0, dop = 0.0, d1 = 0.0, d2 = 0.0, d3 = 0.0, d4 = 0.0;
    if (d == 0 && z == 1) {
      p = nt * r3;
      d1 = -q2 * r3;
      d2 = -q1 * r3;
      d3 = nt * sy;
    } else if (d == 1 && z == 0) {
      p = at * r4;
      d1 = -phi2 * r4;
      d2 = q1 * r4;
      d4 = at * sy;
    } else if (d == 1) {
      const double cf = y ? jet.f1 : 1.0 - jet.f1;
      p = cf * phi1 + at * r4;
      dth = sy * jet.df1_dtheta * phi1;
      dop = sy * jet.df1_dop * phi1;
      d1 = cf - phi2 * r4;
      d2 = q1 * r4;
      d4 = at * sy;
    } else {
      const double cf = y ? jet.f0 : 1.0 - jet.f0;
      p = cf * phi1 + nt * r3;
      dth = sy * jet.df0_dtheta * phi1;
      dop = sy * jet.df0_dop * phi1;
      d1 = cf - q2 * r3;
      d2 = -q1 * r3;
      d3 = nt * sy;
    }
    if (!(p > 0.0)) {
      acc.value = kInf;
      return;
    }
    nll -= std::log(p);
    const double inv = -1.0 / p;
    score(r, pos[kTheta]) = inv * dth * link_slope(layout_.theta.link, th);
    score(r, pos[kOp]) = inv * dop * op;
    score(r, pos[kPhi1]) = inv * d1 * phi1 * q1;
    score(r, pos[kPhi3]) = inv * d3 * phi3 * q3;
    if (pos[kPhi2] >= 0) {
      score(r, pos[kPhi2]) = inv * d2 * phi2 * q2;
      score(r, pos[kPhi4]) = inv * d4 * phi4 * q4;
    }
  }
  acc.value += nll;
  for (std::size_t k = 0; k < curves; ++k) {
    const Index len = offsets_[k + 1] - offsets_[k];
    acc.grad.segment(offsets_[k], len).noalias() +=
        designs_[k].middleRows(begin, m).transpose() * score.col(static_cast<Index>(k));
  }
}

double JointLikelihood::value(const Vector& free, Vector* grad, Execution exec) const {
  if (free.size() != size()) throw std::invalid_argument("coefficient vector has wrong length");
  const ValueGrad zero{0.0, Vector::Zero(size())};
  const ValueGrad total = chunked_reduce(
      n_, zero, [&](Index b, Index e, ValueGrad& acc) {
        if (std::isfinite(acc.value)) accumulate(free, b, e, acc);
      },
      exec);
  if (grad) *grad = total.grad;
  return total.value;
}

NllResult joint_nll(const ModelSet& ms, const Dataset& data) {
  const JointLikelihood lik(ms, data);
  NllResult r;
  r.value = lik.value(ms.free_coefficients(), &r.grad);
  r.finite = std::isfinite(r.value);
  return r;
}

double joint_nll_reference(const ModelSet& ms, const Dataset& data) {
  ms.validate();
  double nll = 0.0;
  for (Index i = 0; i < data.n(); ++i) {
    CellProbs cp;
    try {
      cp = inverse_map(eval_structural(ms, row_of(data, i)), ms.scale);
    } catch (const DomainError&) {
      return kInf;
    }
    const double p = cp(data.d[i] != 0.0, data.y[i] != 0.0, data.z[i] != 0.0);
    if (!(p > 0.0)) return kInf;
    nll -= std::log(p);
  }
  return nll;
}

namespace {

void put_mle_nuisance(const ModelSet& ms, FitResult& out) {
  out.nuisance["beta1"] = ms.phi1.coef;
  if (!ms.one_sided) out.nuisance["beta2"] = ms.phi2.coef;
  out.nuisance["beta3"] = ms.phi3.coef;
  if (!ms.one_sided) out.nuisance["beta4"] = ms.phi4.coef;
  out.nuisance["eta"] = ms.op.coef;
}

}  // namespace

FitResult fit_mle(const ModelSet& ms_init, const Dataset& data, const OptimConfig& cfg) {
  const JointLikelihood lik(ms_init, data);
  const double n = static_cast<double>(data.n());
  const SmoothObjective obj = [&](const Vector& x, Vector& g) {
    const double v = lik.value(x, &g);
    g /= n;
    return v / n;
  };
  const Vector x0 = ms_init.free_coefficients();
  SolveReport best = minimize_smooth(obj, x0, cfg);
  if (!best.converged) {
    std::mt19937_64 rng(cfg.seed);
    std::normal_distribution<double> jitter(0.0, 0.5);
    for (int k = 0; k < cfg.restarts && !best.converged; ++k) {
      Vector start = x0;
      for (Index j = 0; j < start.size(); ++j) start[j] += jitter(rng);
      SolveReport rep = minimize_smooth(obj, start, cfg);
      if (rep.converged || !(best.objective_or_residual <= rep.objective_or_residual)) best = rep;
    }
  }
  ModelSet ms = ms_init;
  ms.set_free_coefficients(best.solution);
  FitResult out;
  out.estimator_tag = "mle";
  out.scale = ms.scale;
  out.alpha = ms.theta.coef;
  put_mle_nuisance(ms, out);
  out.converged = best.converged;
  out.loglik_or_residual = -best.objective_or_residual * n;
  out.message = best.message;
  return out;
}

ModelSet fitted_models(const ModelSet& layout, const FitResult& mle) {
  ModelSet ms = layout;
  ms.theta.coef = mle.alpha;
  ms.phi1.coef = mle.nuisance.at("beta1");
  if (!ms.one_sided) {
    ms.phi2.coef = mle.nuisance.at("beta2");
    ms.phi4.coef = mle.nuisance.at("beta4");
  }
  ms.phi3.coef = mle.nuisance.at("beta3");
  ms.op.coef = mle.nuisance.at("eta");
  return ms;
}

Vector fit_instrument(const Dataset& data, const Selector& sel, const OptimConfig& cfg, FitResult& out) {
  const Matrix design = design_matrix(data, sel);
  const SolveReport rep = fit_logistic(data.z, design, cfg);
  out.nuisance["gamma"] = rep.solution;
  if (!rep.converged) {
    out.converged = false;
    ++out.warnings;
    out.message = "instrument model: " + rep.message;
  }
  Vector pi = design * rep.solution;
  for (Index i = 0; i < pi.size(); ++i) pi[i] = expit(pi[i]);
  return pi;
}

namespace {

void finish_moment_fit(const SolveReport& rep, FitResult& out) {
  out.alpha = rep.solution;
  out.loglik_or_residual = rep.objective_or_residual;
  if (!rep.converged) {
    out.converged = false;
    out.message = "moment equation: " + rep.message;
  } else if (out.message.empty()) {
    out.message = rep.message;
  }
}

}  // namespace

FitResult fit_dr_stage2(const ModelSet& fitted, const Dataset& data, const OptimConfig& cfg, WeightMode mode,
                        bool stage1_converged) {
  FitResult out;
  out.estimator_tag = mode == WeightMode::Optimal ? "drw" : "dru";
  out.scale = fitted.scale;
  out.converged = stage1_converged;
  if (!stage1_converged) out.message = "stage-1 likelihood did not converge";
  put_mle_nuisance(fitted, out);
  Vector pi = fit_instrument(data, fitted.instrument.selector, cfg, out);

  std::vector<StructuralPoint> nuis(static_cast<std::size_t>(data.n()));
  for (Index i = 0; i < data.n(); ++i) nuis[static_cast<std::size_t>(i)] = eval_structural(fitted, row_of(data, i));
  Matrix w;
  if (mode == WeightMode::Optimal) {
    // Weights are frozen at the stage-1 theta. Refreshing them with alpha
    // admits spurious roots where the link saturates and the weight vanishes.
    Index floored = 0;
    w = DrMoment::structural(data, fitted.theta.selector, fitted.scale, nuis, pi, WeightMode::Optimal)
            .optimal_weights(fitted.theta.coef, &floored);
    out.warnings += static_cast<int>(floored > 0);
  }
  const bool fixed = mode == WeightMode::Optimal;
  const DrMoment moment = DrMoment::structural(data, fitted.theta.selector, fitted.scale, std::move(nuis),
                                               std::move(pi), fixed ? WeightMode::Fixed : mode, fixed ? &w : nullptr);
  const SolveReport rep = solve_moment([&](const Vector& a) { return moment.mean(a); }, fitted.theta.coef, cfg);
  finish_moment_fit(rep, out);
  return out;
}

FitResult fit_dr(const ModelSet& ms_init, const Dataset& data, const OptimConfig& cfg, WeightMode mode) {
  const FitResult mle = fit_mle(ms_init, data, cfg);
  return fit_dr_stage2(fitted_models(ms_init, mle), data, cfg, mode, mle.converged);
}

FitResult fit_dr_simple(const Dataset& data, const Design& design, Scale scale, const OptimConfig& cfg) {
  FitResult out;
  out.estimator_tag = "dru.simple";
  out.scale = scale;
  out.converged = true;
  Vector pi = fit_instrument(data, design.instrument, cfg, out);
  const Matrix xn = design_matrix(data, design.nuisance);
  const Index n = data.n();

  auto logistic = [&](const Vector& target, const Matrix& x, const char* label) {
    const SolveReport rep = fit_logistic(target, x, cfg);
    out.nuisance[label] = rep.solution;
    if (!rep.converged) {
      out.converged = false;
      ++out.warnings;
      out.message = std::string(label) + " model: " + rep.message;
    }
    Vector fit = x * rep.solution;
    for (Index i = 0; i < n; ++i) fit[i] = expit(fit[i]);
    return fit;
  };

  const Vector pd = logistic(data.d, xn, "vartheta");
  Vector a(n), b(n);
  if (scale == Scale::Additive) {
    a = logistic(data.y, xn, "varsigma");
    b = pd;
  } else {
    Matrix xdy(n, xn.cols() + 1);
    xdy.col(0) = data.d;
    xdy.rightCols(xn.cols()) = xn;
    logistic(data.y, xdy, "varpi");
    const Vector& w = out.nuisance["varpi"];
    const Vector base = xn * w.tail(xn.cols());
    for (Index i = 0; i < n; ++i) {
      a[i] = pd[i] * expit(w[0] + base[i]);
      b[i] = (1.0 - pd[i]) * expit(base[i]);
    }
  }
  const DrMoment moment = DrMoment::affine(data, design.theta, scale, std::move(a), std::move(b), std::move(pi));
  const SolveReport rep =
      solve_moment([&](const Vector& al) { return moment.mean(al); }, Vector::Zero(moment.dim()), cfg);
  finish_moment_fit(rep, out);
  return out;
}

}  // namespace lateiv
