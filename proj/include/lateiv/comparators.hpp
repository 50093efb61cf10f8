#pragma once

// Benchmark estimators: outcome-regression and doubly robust g-estimators
// with variation-dependent working models, the bounded-contrast likelihood
// and its doubly robust companion (additive only), the complier weighted
// least squares estimator, and the crude treatment-outcome association.

#include "lateiv/estimate.hpp"
#include "lateiv/models.hpp"

namespace lateiv {

/// Binary regression of W on a binary V parameterized by a bounded contrast
/// between the two arms and their odds product:
///   P(W=1|V=1,X) - P(W=1|V=0,X) = c(X)   (or the ratio for Exp)
///   odds product                = exp(op' X).
/// The arms come from solve_complier_risks on (c, odds product).
struct RdLinkSpec {
  Link contrast_link = Link::Tanh;  // Tanh or Exp
  Vector contrast_coefs;            // starting values (zeros if empty)
  Vector op_coefs;
  /// Optional per-row factor applied to the contrast (additive only).
  const Vector* contrast_multiplier = nullptr;
};

/// `alpha` holds the contrast coefficients, nuisance["op"] the odds-product ones.
FitResult fit_rdlink(const Vector& outcome, const Vector& regressor, const Matrix& contrast_design,
                     const Matrix& op_design, const RdLinkSpec& spec, const OptimConfig& cfg);

/// Mean NLL of the model above with its gradient over (contrast, op) coefficients.
double rdlink_nll(const Vector& outcome, const Vector& regressor, const Matrix& contrast_design,
                  const Matrix& op_design, Link contrast_link, const Vector* multiplier, const Vector& coefs,
                  Vector* grad);

/// Working basis for E(H|X): the nuisance columns plus powers 2..degree of
/// the last one (powers are skipped when that column is binary).
Matrix power_basis(const Dataset& data, const Selector& sel, int degree);

FitResult fit_reg_ogburn(const Dataset& data, const Design& design, Scale scale, const OptimConfig& cfg);
FitResult fit_dru_ogburn(const Dataset& data, const Design& design, Scale scale, const OptimConfig& cfg);
/// With `identity_weight` the estimated optimal weight is replaced by the
/// identity weight, which reproduces fit_dru_ogburn.
FitResult fit_drw_ogburn(const Dataset& data, const Design& design, Scale scale, const OptimConfig& cfg,
                         bool identity_weight = false);

/// Additive scale only.
FitResult fit_mle_wang(const Dataset& data, const Design& design, const OptimConfig& cfg);
FitResult fit_dru_wang(const Dataset& data, const Design& design, const OptimConfig& cfg);

/// Instrument probabilities outside (kPiClip, 1 - kPiClip) are clipped.
inline constexpr double kPiClip = 1e-4;

/// Complier weight 1 - D(1-Z)/(1-pi) - (1-D)Z/pi.
double complier_weight(double d, double z, double pi);

FitResult fit_ls_abadie(const Dataset& data, const Design& design, Scale scale, const OptimConfig& cfg);

/// Weighted least squares objective of fit_ls_abadie over (alpha, varphi).
double abadie_objective(const Vector& y, const Vector& d, const Vector& w, const Matrix& theta_design,
                        const Matrix& outcome_design, Scale scale, const Vector& coefs, Vector* grad);

FitResult fit_mle_crude(const Dataset& data, const Design& design, Scale scale, const OptimConfig& cfg);

}  // namespace lateiv
