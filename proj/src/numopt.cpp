#include "lateiv/numopt.hpp"

#include "lateiv/models.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace lateiv {

namespace {

constexpr double kArmijo = 1e-4;

double sup_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

bool finite(const Vector& v) { return v.allFinite(); }

}  // namespace

SolveReport minimize_smooth(const SmoothObjective& objective, const Vector& x0, const OptimConfig& cfg) {
  SolveReport rep;
  const Index p = x0.size();
  Vector x = x0;
  Vector g(p);
  double f = objective(x, g);
  rep.solution = x;
  rep.objective_or_residual = f;
  if (!std::isfinite(f) || !finite(g)) {
    rep.message = "objective not finite at starting point";
    return rep;
  }

  Matrix h = Matrix::Identity(p, p);
  bool scaled = false;
  Vector g_new(p);
  for (int it = 0; it < cfg.max_iter; ++it) {
    rep.iterations = it;
    if (sup_norm(g) <= cfg.grad_tol) {
      rep.converged = true;
      break;
    }
    Vector dir = -h * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      h.setIdentity();
      dir = -g;
      slope = -g.squaredNorm();
    }
    // Armijo backtracking with a rounding allowance near the optimum.
    const double slack = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(f);
    double t = 1.0;
    double f_new = 0.0;
    Vector x_new;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + t * dir;
      f_new = objective(x_new, g_new);
      if (std::isfinite(f_new) && finite(g_new) && f_new <= f + kArmijo * t * slope + slack) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      rep.message = "line search failed";
      break;
    }
    const Vector s = x_new - x;
    const Vector yv = g_new - g;
    x = x_new;
    f = f_new;
    g = g_new;
    if (sup_norm(s) <= cfg.step_tol * (1.0 + sup_norm(x))) {
      rep.converged = sup_norm(g) <= cfg.grad_tol;
      rep.message = "step below tolerance";
      break;
    }
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      if (!scaled) {
        h *= sy / yv.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Vector hy = h * yv;
      // (I - rho s y') H (I - rho y s') + rho s s'
      h += rho * ((1.0 + rho * yv.dot(hy)) * (s * s.transpose()) - hy * s.transpose() - s * hy.transpose());
    }
    rep.iterations = it + 1;
  }
  if (!rep.converged && sup_norm(g) <= cfg.grad_tol) rep.converged = true;
  if (rep.converged) rep.message = "converged";
  else if (rep.message.empty()) rep.message = "iteration limit reached";
  rep.solution = x;
  rep.objective_or_residual = f;
  return rep;
}

Matrix finite_difference_jacobian(const MomentFunction& f, const Vector& x, double rel_step) {
  const Vector f0 = f(x);
  Matrix jac(f0.size(), x.size());
  Vector xp = x;
  for (Index j = 0; j < x.size(); ++j) {
    const double h = rel_step * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + h;
    const Vector fp = f(xp);
    xp[j] = x[j] - h;
    const Vector fm = f(xp);
    xp[j] = x[j];
    jac.col(j) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                                  double rel_step) {
  Vector g(x.size());
  Vector xp = x;
  for (Index j = 0; j < x.size(); ++j) {
    const double h = rel_step * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + h;
    const double fp = f(xp);
    xp[j] = x[j] - h;
    const double fm = f(xp);
    xp[j] = x[j];
    g[j] = (fp - fm) / (2.0 * h);
  }
  return g;
}

namespace {

SolveReport levenberg_marquardt(const MomentFunction& moment, const Vector& x0, const OptimConfig& cfg) {
  SolveReport rep;
  Vector x = x0;
  Vector r = moment(x);
  rep.solution = x;
  rep.objective_or_residual = finite(r) ? sup_norm(r) : std::numeric_limits<double>::infinity();
  if (!finite(r)) {
    rep.message = "moment not finite at starting point";
    return rep;
  }
  if (r.size() != x.size()) throw std::invalid_argument("moment dimension differs from parameter dimension");

  double lambda = 1e-3;
  const Index p = x.size();
  for (int it = 0; it < cfg.max_iter; ++it) {
    rep.iterations = it;
    if (sup_norm(r) <= cfg.grad_tol) {
      rep.converged = true;
      break;
    }
    const Matrix jac = finite_difference_jacobian(moment, x);
    if (!jac.allFinite()) {
      rep.message = "jacobian not finite";
      break;
    }
    const Matrix a = jac.transpose() * jac;
    const Vector g = jac.transpose() * r;
    const double base = r.squaredNorm();
    bool accepted = false;
    while (lambda < 1e14) {
      Matrix damped = a;
      for (Index j = 0; j < p; ++j) damped(j, j) += lambda * std::max(a(j, j), 1e-12);
      const Vector step = damped.ldlt().solve(-g);
      const Vector x_new = x + step;
      const Vector r_new = moment(x_new);
      if (finite(step) && finite(r_new) && r_new.squaredNorm() < base) {
        const bool tiny = sup_norm(step) <= cfg.step_tol * (1.0 + sup_norm(x));
        x = x_new;
        r = r_new;
        lambda = std::max(lambda * 0.1, 1e-12);
        accepted = true;
        if (tiny) it = cfg.max_iter;  // no further progress possible
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) {
      rep.message = "no descent step (possible local minimum of ||m||)";
      break;
    }
    rep.iterations = it + 1;
  }
  if (sup_norm(r) <= cfg.grad_tol) rep.converged = true;
  rep.solution = x;
  rep.objective_or_residual = sup_norm(r);
  rep.message = rep.converged ? "converged" : (rep.message.empty() ? "iteration limit reached" : rep.message);
  return rep;
}

}  // namespace

SolveReport solve_moment(const MomentFunction& moment, const Vector& x0, const OptimConfig& cfg) {
  SolveReport best = levenberg_marquardt(moment, x0, cfg);
  if (best.converged) return best;
  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> jitter(0.0, 0.5);
  for (int k = 1; k <= cfg.restarts; ++k) {
    Vector start = x0;
    for (Index j = 0; j < start.size(); ++j) start[j] += jitter(rng);
    SolveReport rep = levenberg_marquardt(moment, start, cfg);
    if (rep.objective_or_residual < best.objective_or_residual) best = rep;
    if (best.converged) break;
  }
  return best;
}

void require_full_rank(const Matrix& design) {
  if (design.rows() < design.cols()) throw RankDeficient();
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  if (qr.rank() < design.cols()) throw RankDeficient();
}

double logistic_nll(const Vector& y, const Matrix& design, const Vector& coef, Vector* grad) {
  const Vector eta = design * coef;
  double nll = 0.0;
  Vector resid(eta.size());
  for (Index i = 0; i < eta.size(); ++i) {
    const double e = eta[i];
    // log(1 + exp(e)) - y e, evaluated without overflow
    const double softplus = e > 0.0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
    nll += softplus - y[i] * e;
    resid[i] = expit(e) - y[i];
  }
  const double n = static_cast<double>(eta.size());
  if (grad) *grad = design.transpose() * resid / n;
  return nll / n;
}

SolveReport fit_logistic(const Vector& y, const Matrix& design, const OptimConfig& cfg, const Vector* weights) {
  require_full_rank(design);
  const Index n = design.rows();
  const Index p = design.cols();
  Vector w = weights ? *weights : Vector::Ones(n);
  const double wsum = w.sum();

  auto objective = [&](const Vector& b, Vector* grad, Matrix* hess) {
    const Vector eta = design * b;
    double nll = 0.0;
    Vector resid(n), curv(n);
    for (Index i = 0; i < n; ++i) {
      const double e = eta[i];
      const double softplus = e > 0.0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
      nll += w[i] * (softplus - y[i] * e);
      const double pr = expit(e);
      resid[i] = w[i] * (pr - y[i]);
      curv[i] = w[i] * pr * (1.0 - pr);
    }
    if (grad) *grad = design.transpose() * resid / wsum;
    if (hess) *hess = design.transpose() * curv.asDiagonal() * design / wsum;
    return nll / wsum;
  };

  SolveReport rep;
  Vector b = Vector::Zero(p);
  Vector g;
  Matrix h;
  double f = objective(b, &g, &h);
  for (int it = 0; it < cfg.max_iter; ++it) {
    rep.iterations = it;
    if (sup_norm(g) <= cfg.grad_tol) {
      rep.converged = true;
      break;
    }
    if (sup_norm(b) > kSeparationCap) {
      rep.warning = true;
      rep.message = "separation: coefficient norm exceeds cap";
      break;
    }
    Vector step = h.ldlt().solve(g);
    if (!finite(step)) step = g;
    double t = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      const Vector bn = b - t * step;
      Vector gn;
      Matrix hn;
      const double fn = objective(bn, &gn, &hn);
      if (std::isfinite(fn) && fn <= f + 1e-14 * std::abs(f)) {
        b = bn;
        f = fn;
        g = gn;
        h = hn;
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      rep.converged = sup_norm(g) <= cfg.grad_tol;
      rep.message = "step halving failed";
      break;
    }
    rep.iterations = it + 1;
  }
  if (!rep.warning && sup_norm(b) > kSeparationCap) {
    rep.warning = true;
    rep.message = "separation: coefficient norm exceeds cap";
  }
  if (rep.warning) rep.converged = false;
  if (rep.message.empty()) rep.message = rep.converged ? "converged" : "iteration limit reached";
  rep.solution = b;
  rep.objective_or_residual = f;
  return rep;
}

SolveReport fit_least_squares(const Vector& targets, const Matrix& design) {
  Eigen::ColPivHouseholderQR<Matrix> qr(design);
  if (design.rows() < design.cols() || qr.rank() < design.cols()) throw RankDeficient();
  SolveReport rep;
  rep.solution = qr.solve(targets);
  rep.objective_or_residual = (design * rep.solution - targets).squaredNorm();
  rep.converged = true;
  rep.message = "converged";
  return rep;
}

Vector consumed_fit(const Matrix& design, const Vector& coef, bool positivity, double floor) {
  Vector fit = design * coef;
  if (positivity) fit = fit.cwiseMax(floor);
  return fit;
}

}  // namespace lateiv
