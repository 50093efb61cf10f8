#pragma once

// Joint maximum likelihood under the (theta, phi1..phi4, opco) parameterization
// and the doubly robust estimators built on it.

#include "lateiv/estimate.hpp"
#include "lateiv/kernels.hpp"
#include "lateiv/models.hpp"
#include "lateiv/moment.hpp"

namespace lateiv {

/// -sum_i log p(d_i, y_i | z_i, x_i) over the free coefficients of a ModelSet
/// layout (links, selectors and one-sided flag fixed at construction). The
/// gradient is analytic. The instrument model does not enter.
class JointLikelihood {
 public:
  JointLikelihood(const ModelSet& layout, const Dataset& data);

  Index size() const { return layout_.free_size(); }
  Index rows() const { return n_; }
  const ModelSet& layout() const { return layout_; }

  /// Total NLL at the free coefficient vector; +inf when some realized cell
  /// probability is not positive or a multiplicative theta falls under the floor.
  double value(const Vector& free, Vector* grad, Execution exec = Execution::Parallel) const;

 private:
  void accumulate(const Vector& free, Index begin, Index end, ValueGrad& acc) const;

  ModelSet layout_;
  Index n_ = 0;
  // One design per free curve, in free-coefficient order.
  std::vector<Matrix> designs_;
  std::vector<Index> offsets_;
  std::vector<unsigned char> cell_;  // 4 d + 2 y + z
};

struct NllResult {
  double value = 0.0;
  Vector grad;
  bool finite = false;
};

NllResult joint_nll(const ModelSet& ms, const Dataset& data);

/// Row-by-row evaluation through eval_structural and inverse_map, without
/// gradient. Kept as the reference for the fast kernel.
double joint_nll_reference(const ModelSet& ms, const Dataset& data);

FitResult fit_mle(const ModelSet& ms_init, const Dataset& data, const OptimConfig& cfg);

/// Fitted ModelSet carried by an `mle` FitResult.
ModelSet fitted_models(const ModelSet& layout, const FitResult& mle);

/// Stage 2 of the doubly robust estimator given stage-1 nuisances.
FitResult fit_dr_stage2(const ModelSet& fitted, const Dataset& data, const OptimConfig& cfg, WeightMode mode,
                        bool stage1_converged = true);

/// Tags `dru` (identity) and `drw` (optimal weight).
FitResult fit_dr(const ModelSet& ms_init, const Dataset& data, const OptimConfig& cfg, WeightMode mode);

/// Tag `dru.simple`: expit working models for E(Y|X), E(D|X) (additive) or
/// E(Y|D,X), E(D|X) (multiplicative), identity weight.
FitResult fit_dr_simple(const Dataset& data, const Design& design, Scale scale, const OptimConfig& cfg);

/// Fitted P(Z=1|X) on the instrument selector.
Vector fit_instrument(const Dataset& data, const Selector& sel, const OptimConfig& cfg, FitResult& out);

}  // namespace lateiv
