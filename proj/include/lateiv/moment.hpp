#pragma once

// The doubly robust estimating function
//
//   m(alpha) = P_n  w(X) (2Z - 1) / f(Z | X) [ H(Y, D, X; alpha) - E{H | X}(alpha) ]
//
// with H = Y - D theta (additive) or Y theta^{-D} (multiplicative). The
// conditional mean E{H | X} comes either from the structural nuisance curves
// (phi1..phi4, opco) with theta refreshed at alpha, or from an affine form
//   additive:        a - theta b
//   multiplicative:  a / theta + b
// which covers the simple, Wang and Ogburn plug-ins.

#include "lateiv/data.hpp"
#include "lateiv/kernels.hpp"
#include "lateiv/models.hpp"
#include "lateiv/param.hpp"

#include <vector>

namespace lateiv {

enum class WeightMode { Identity, Optimal, Fixed };

double compute_H(double y, double d, double theta, Scale scale);

/// E{H | X} implied by the structural point (theta taken from sp).
double expected_H_given_X(const StructuralPoint& sp, Scale scale);

struct OmegaResult {
  Vector omega;
  double variance = 0.0;  // V(X) after flooring
  bool floored = false;
};

/// Variance-minimizing weight at one covariate value. V(X) below
/// kVarianceFloor is floored and reported.
OmegaResult optimal_omega(const StructuralPoint& sp, double pi_x, const Vector& grad_theta, Scale scale);

/// V(X) = sum_z {E(H^2 | z, X) - E(H | Z=0, X)^2} / f(z | X).
double omega_variance(const StructuralPoint& sp, double pi_x, Scale scale);

class DrMoment {
 public:
  /// E{H|X} from per-row structural nuisances (their theta field is ignored).
  /// Fixed mode requires an n x dim(alpha) `weights` matrix.
  static DrMoment structural(const Dataset& data, const Selector& theta_sel, Scale scale,
                             std::vector<StructuralPoint> nuisance, Vector pi, WeightMode mode,
                             const Matrix* weights = nullptr);
  /// E{H|X} from the affine form; identity weights unless `weights` (n x p) is given.
  static DrMoment affine(const Dataset& data, const Selector& theta_sel, Scale scale, Vector a, Vector b,
                         Vector pi, const Matrix* weights = nullptr);

  Index dim() const { return theta_design_.cols(); }
  Index rows() const { return theta_design_.rows(); }

  /// P_n of the summand.
  Vector mean(const Vector& alpha, Execution exec = Execution::Parallel) const;
  /// Per-row summands (n x p), serial.
  Matrix summands(const Vector& alpha) const;
  /// Rows whose optimal-weight variance hit the floor at alpha.
  Index floored_rows(const Vector& alpha) const;
  /// Per-row optimal weights (n x p) with theta at alpha; structural moments only.
  Matrix optimal_weights(const Vector& alpha, Index* floored = nullptr) const;

  /// Per-row E{H|X} at alpha.
  double expected_H(Index i, double theta) const;
  double theta_at(Index i, const Vector& alpha) const;

 private:
  DrMoment() = default;
  // Writes the p-vector summand of row i into out; returns false if undefined.
  bool row_summand(Index i, const Vector& alpha, double* out, bool* floored) const;

  Scale scale_ = Scale::Additive;
  Link theta_link_ = Link::Tanh;
  Matrix theta_design_;
  Vector y_, d_, z_, pi_;
  bool structural_ = false;
  std::vector<StructuralPoint> nuisance_;
  Vector a_, b_;
  WeightMode mode_ = WeightMode::Identity;
  Matrix weights_;
};

}  // namespace lateiv
