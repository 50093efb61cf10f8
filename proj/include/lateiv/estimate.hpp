#pragma once

#include "lateiv/data.hpp"
#include "lateiv/numopt.hpp"
#include "lateiv/param.hpp"

#include <map>
#include <string>

namespace lateiv {

/// Outcome of one estimator run. `alpha` holds the target-model coefficients;
/// every other fitted block goes into `nuisance` under its coefficient label
/// (beta1..beta4, eta, gamma, xi, psi, zeta, lambda, tau, kappa, varsigma,
/// vartheta, varpi, varphi, rho, upsilon).
struct FitResult {
  std::string estimator_tag;
  Scale scale = Scale::Additive;
  Vector alpha;
  std::map<std::string, Vector> nuisance;
  bool converged = false;
  double loglik_or_residual = 0.0;
  std::string message;
  int warnings = 0;
};

}  // namespace lateiv
