#pragma once

// Estimator registry, quantile bootstrap intervals and the Monte Carlo harness.

#include "lateiv/estimate.hpp"
#include "lateiv/models.hpp"
#include "lateiv/simulation.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace lateiv {

/// Every estimator tag, in report order.
const std::vector<std::string>& estimator_tags();

/// Whether `tag` is defined for (scale, scenario): the bounded-contrast pair
/// is additive only, the weighted least squares comparator runs under bth and
/// bad only, and the crude association ignores covariate swaps (bth only).
bool estimator_admits(const std::string& tag, Scale scale, Scenario scenario);

struct EstimatorOptions {
  Scale scale = Scale::Additive;
  OptimConfig cfg;
  bool one_sided = false;
};

/// Fits several estimators on one dataset with one design rule per tag.
/// Estimators sharing the joint likelihood fit it once. Designs are looked
/// up per tag through `design_for`; `warm` optionally supplies starting
/// values (by tag) for the likelihood and moment solvers.
class EstimatorBundle {
 public:
  using DesignRule = std::function<Design(const Dataset&, const std::string& tag)>;

  EstimatorBundle(std::vector<std::string> tags, EstimatorOptions opts, DesignRule design_for);

  const std::vector<std::string>& tags() const { return tags_; }
  std::vector<FitResult> fit(const Dataset& data, const std::map<std::string, FitResult>* warm = nullptr) const;

 private:
  std::vector<std::string> tags_;
  EstimatorOptions opts_;
  DesignRule design_for_;
};

/// Design rule for simulated data under a scenario (abadie rule applied to
/// ls.abadie).
EstimatorBundle::DesignRule scenario_rule(Scenario scenario);
/// Same design for every tag.
EstimatorBundle::DesignRule fixed_rule(const Design& design);

/// Type-7 sample quantile (linear interpolation) of unsorted values.
double quantile(std::vector<double> values, double prob);

struct BootstrapInterval {
  std::string estimator_tag;
  Vector lower, upper;
  int replicates = 0;
  int failures = 0;
  bool unreliable = false;  // more than half of the replicates failed
  Matrix estimates;         // converged replicate estimates, one per row
};

/// Row resamples with replacement; each replicate refits every estimator of
/// the bundle, warm-started at `full` when given. Replicates run in parallel
/// with per-replicate RNG streams, so results do not depend on the thread count.
std::vector<BootstrapInterval> bootstrap_ci(const Dataset& data, const EstimatorBundle& bundle, int replicates,
                                            double level, std::uint64_t seed,
                                            const std::vector<FitResult>* full = nullptr);

/// Interval from a fixed set of replicate estimates.
BootstrapInterval interval_from_replicates(const std::vector<Vector>& estimates, int failures, double level);

struct McConfig {
  int runs = 500;
  Index n = 1000;
  int bootstrap_b = 0;
  double ci_level = 0.95;
  std::vector<std::string> estimators{"mle", "drw", "dru"};
  std::vector<Scenario> scenarios{Scenario::Bth};
  std::uint64_t seed = 20240101;
  DgpSpec dgp;  // coefficients and scale; n and seed are overridden per run
  OptimConfig optim;
};

/// One (run, estimator, scenario) fit.
struct McRecord {
  int run = 0;
  std::string estimator;
  Scenario scenario = Scenario::Bth;
  bool converged = false;
  Vector estimate;
  bool has_ci = false;
  bool ci_unreliable = false;
  int boot_failures = 0;
  Vector lower, upper;
};

/// Summary of one (estimator, scenario, coefficient) cell.
struct McCell {
  std::string estimator;
  Scenario scenario = Scenario::Bth;
  int coefficient = 0;
  double truth = 0.0;
  int used = 0;      // converged runs
  int failures = 0;  // non-converged runs
  double bias = 0.0;
  std::optional<double> sd;         // absent with fewer than two runs
  std::optional<double> mc_se;      // sd / sqrt(used)
  std::optional<double> coverage;   // over runs with a reliable interval
  std::optional<double> mean_width;
  int ci_runs = 0;
  int ci_unreliable = 0;
};

struct McReport {
  Scale scale = Scale::Additive;
  Vector truth;
  std::vector<McCell> cells;
  std::vector<McRecord> records;

  const McCell& cell(const std::string& estimator, Scenario scenario, int coefficient) const;
};

/// Recomputes the summary cells from raw records.
std::vector<McCell> summarize(const std::vector<McRecord>& records, const Vector& truth);

/// Runs in parallel over Monte Carlo runs with per-run RNG streams derived
/// from (seed, run); records are folded in run order.
McReport monte_carlo_study(const McConfig& cfg);

}  // namespace lateiv
