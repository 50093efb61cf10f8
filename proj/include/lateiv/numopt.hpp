#pragma once

// Optimizers and regression fits shared by all estimators.

#include "lateiv/data.hpp"

#include <cstdint>
#include <functional>
#include <string>

namespace lateiv {

struct OptimConfig {
  int max_iter = 500;
  double grad_tol = 1e-8;
  double step_tol = 1e-14;
  int restarts = 3;
  std::uint64_t seed = 20240101;
};

struct SolveReport {
  Vector solution;
  double objective_or_residual = 0.0;
  bool converged = false;
  int iterations = 0;
  std::string message;
  bool warning = false;  // e.g. separation in a logistic fit
};

/// Objective returning f(x) and writing its gradient into `grad`.
using SmoothObjective = std::function<double(const Vector& x, Vector& grad)>;
/// Vector-valued moment m(alpha) with dim m == dim alpha.
using MomentFunction = std::function<Vector(const Vector& alpha)>;

/// BFGS with Armijo backtracking. Converged iff the gradient sup-norm is at
/// most cfg.grad_tol. Non-finite objectives yield a failed report.
SolveReport minimize_smooth(const SmoothObjective& objective, const Vector& x0, const OptimConfig& cfg);

/// Levenberg-Marquardt on ||m||^2 with a central-difference Jacobian.
/// Jittered restarts are tried only while no start has converged; the
/// returned solution is the one with the smallest residual sup-norm.
SolveReport solve_moment(const MomentFunction& moment, const Vector& x0, const OptimConfig& cfg);

/// Central-difference Jacobian of a vector function.
Matrix finite_difference_jacobian(const MomentFunction& f, const Vector& x, double rel_step = 1e-6);

/// Central-difference gradient of a scalar function.
Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                                  double rel_step = 1e-6);

class RankDeficient : public std::runtime_error {
 public:
  RankDeficient() : std::runtime_error("design matrix is not of full column rank") {}
};

/// Coefficient sup-norm above which a logistic fit reports separation.
inline constexpr double kSeparationCap = 30.0;

/// Mean Bernoulli negative log-likelihood with expit link, and its gradient.
double logistic_nll(const Vector& y, const Matrix& design, const Vector& coef, Vector* grad);

/// Newton-Raphson / IRLS maximum likelihood for an expit regression.
/// Throws RankDeficient. report.warning flags separation.
SolveReport fit_logistic(const Vector& y, const Matrix& design, const OptimConfig& cfg,
                         const Vector* weights = nullptr);

inline constexpr double kVarianceFloor = 1e-6;

/// Ordinary least squares. Throws RankDeficient.
SolveReport fit_least_squares(const Vector& targets, const Matrix& design);

/// Fitted values design * coef, floored at `floor` when positivity is requested.
Vector consumed_fit(const Matrix& design, const Vector& coef, bool positivity, double floor = kVarianceFloor);

void require_full_rank(const Matrix& design);

}  // namespace lateiv
