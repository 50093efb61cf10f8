#include "lateiv/inference.hpp"

#include "lateiv/comparators.hpp"
#include "lateiv/proposed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lateiv {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_proposed_likelihood(const std::string& tag) { return tag == "mle" || tag == "dru" || tag == "drw"; }

bool same_design(const Design& a, const Design& b) {
  return a.theta == b.theta && a.nuisance == b.nuisance && a.instrument == b.instrument;
}

FitResult failed_fit(const std::string& tag, Scale scale, const std::string& why) {
  FitResult r;
  r.estimator_tag = tag;
  r.scale = scale;
  r.converged = false;
  r.message = why;
  return r;
}

bool usable(const FitResult& r) { return r.converged && r.alpha.size() > 0 && r.alpha.allFinite(); }

}  // namespace

const std::vector<std::string>& estimator_tags() {
  static const std::vector<std::string> tags{"mle",        "drw",        "dru",      "dru.simple", "reg.ogburn",
                                             "drw.ogburn", "dru.ogburn", "mle.wang", "dru.wang",   "ls.abadie",
                                             "mle.crude"};
  return tags;
}

bool estimator_admits(const std::string& tag, Scale scale, Scenario scenario) {
  if (std::find(estimator_tags().begin(), estimator_tags().end(), tag) == estimator_tags().end()) return false;
  if ((tag == "mle.wang" || tag == "dru.wang") && scale != Scale::Additive) return false;
  if (tag == "ls.abadie") return scenario == Scenario::Bth || scenario == Scenario::Bad;
  if (tag == "mle.crude") return scenario == Scenario::Bth;
  return true;
}

EstimatorBundle::EstimatorBundle(std::vector<std::string> tags, EstimatorOptions opts, DesignRule design_for)
    : tags_(std::move(tags)), opts_(opts), design_for_(std::move(design_for)) {
  for (const auto& t : tags_) {
    if (std::find(estimator_tags().begin(), estimator_tags().end(), t) == estimator_tags().end())
      throw std::invalid_argument("unknown estimator '" + t + "'");
    if ((t == "mle.wang" || t == "dru.wang") && opts_.scale != Scale::Additive)
      throw std::invalid_argument("estimator '" + t + "' is defined on the additive scale only");
    // These need the treatment odds product, which is degenerate when nobody
    // is treated without the instrument.
    if (opts_.one_sided && (t == "mle.wang" || t == "dru.wang" || t == "drw.ogburn"))
      throw std::invalid_argument("estimator '" + t + "' is undefined under one-sided compliance");
  }
}

std::vector<FitResult> EstimatorBundle::fit(const Dataset& data, const std::map<std::string, FitResult>* warm) const {
  const Scale scale = opts_.scale;
  const OptimConfig& cfg = opts_.cfg;
  if (opts_.one_sided)
    for (Index i = 0; i < data.n(); ++i)
      if (data.d[i] == 1.0 && data.z[i] == 0.0)
        throw std::invalid_argument("one-sided compliance assumed but row " + std::to_string(i + 1) +
                                    " has d=1 and z=0");
  struct Stage1 {
    Design design;
    ModelSet layout;
    FitResult mle;
  };
  std::vector<Stage1> stage1;
  auto likelihood_fit = [&](const Design& design) -> const Stage1& {
    for (const auto& s : stage1)
      if (same_design(s.design, design)) return s;
    ModelSet layout = ModelSet::zeros(scale, design, opts_.one_sided);
    ModelSet init = layout;
    if (warm) {
      auto it = warm->find("mle");
      if (it != warm->end() && usable(it->second)) {
        try {
          init = fitted_models(layout, it->second);
          init.validate();
        } catch (const std::exception&) {
          init = layout;
        }
      }
    }
    stage1.push_back({design, layout, fit_mle(init, data, cfg)});
    return stage1.back();
  };

  std::vector<FitResult> out;
  out.reserve(tags_.size());
  for (const auto& tag : tags_) {
    try {
      const Design design = design_for_(data, tag);
      FitResult r;
      if (is_proposed_likelihood(tag)) {
        const Stage1& s1 = likelihood_fit(design);
        if (tag == "mle") {
          r = s1.mle;
        } else {
          const WeightMode mode = tag == "drw" ? WeightMode::Optimal : WeightMode::Identity;
          r = fit_dr_stage2(fitted_models(s1.layout, s1.mle), data, cfg, mode, s1.mle.converged);
        }
      } else if (tag == "dru.simple") {
        r = fit_dr_simple(data, design, scale, cfg);
      } else if (tag == "reg.ogburn") {
        r = fit_reg_ogburn(data, design, scale, cfg);
      } else if (tag == "dru.ogburn") {
        r = fit_dru_ogburn(data, design, scale, cfg);
      } else if (tag == "drw.ogburn") {
        r = fit_drw_ogburn(data, design, scale, cfg);
      } else if (tag == "mle.wang") {
        r = fit_mle_wang(data, design, cfg);
      } else if (tag == "dru.wang") {
        r = fit_dru_wang(data, design, cfg);
      } else if (tag == "ls.abadie") {
        r = fit_ls_abadie(data, design, scale, cfg);
      } else {
        r = fit_mle_crude(data, design, scale, cfg);
      }
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      out.push_back(failed_fit(tag, scale, e.what()));
    }
  }
  return out;
}

EstimatorBundle::DesignRule scenario_rule(Scenario scenario) {
  return [scenario](const Dataset& data, const std::string& tag) {
    return build_scenario_design(data, scenario, tag == "ls.abadie");
  };
}

EstimatorBundle::DesignRule fixed_rule(const Design& design) {
  return [design](const Dataset&, const std::string&) { return design; };
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) return kNaN;
  if (!(prob >= 0.0 && prob <= 1.0)) throw std::invalid_argument("quantile probability outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

BootstrapInterval interval_from_replicates(const std::vector<Vector>& estimates, int failures, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("confidence level must lie in (0, 1)");
  BootstrapInterval ci;
  ci.failures = failures;
  ci.replicates = static_cast<int>(estimates.size()) + failures;
  ci.unreliable = 2 * failures > ci.replicates || estimates.empty();
  const Index p = estimates.empty() ? 0 : estimates.front().size();
  ci.lower = Vector::Constant(p, kNaN);
  ci.upper = Vector::Constant(p, kNaN);
  ci.estimates.resize(static_cast<Index>(estimates.size()), p);
  for (std::size_t b = 0; b < estimates.size(); ++b) ci.estimates.row(static_cast<Index>(b)) = estimates[b].transpose();
  const double tail = (1.0 - level) / 2.0;
  for (Index j = 0; j < p; ++j) {
    std::vector<double> col(estimates.size());
    for (std::size_t b = 0; b < estimates.size(); ++b) col[b] = estimates[b][j];
    ci.lower[j] = quantile(col, tail);
    ci.upper[j] = quantile(col, 1.0 - tail);
  }
  return ci;
}

std::vector<BootstrapInterval> bootstrap_ci(const Dataset& data, const EstimatorBundle& bundle, int replicates,
                                            double level, std::uint64_t seed, const std::vector<FitResult>* full) {
  if (replicates < 2) throw std::invalid_argument("bootstrap needs at least two replicates");
  const auto& tags = bundle.tags();
  std::map<std::string, FitResult> warm;
  if (full)
    for (const auto& r : *full) warm[r.estimator_tag] = r;

  std::vector<std::vector<FitResult>> fits(static_cast<std::size_t>(replicates));
  const Index n = data.n();
#pragma omp parallel for schedule(dynamic)
  for (int b = 0; b < replicates; ++b) {
    std::mt19937_64 rng(stream_seed(seed, static_cast<std::uint64_t>(b)));
    std::vector<Index> rows(static_cast<std::size_t>(n));
    for (auto& r : rows) r = std::min(n - 1, static_cast<Index>(uniform01(rng) * static_cast<double>(n)));
    try {
      fits[static_cast<std::size_t>(b)] = bundle.fit(data.subset(rows), full ? &warm : nullptr);
    } catch (const std::exception&) {
      fits[static_cast<std::size_t>(b)].clear();
    }
  }

  std::vector<BootstrapInterval> out;
  for (std::size_t t = 0; t < tags.size(); ++t) {
    std::vector<Vector> est;
    int failures = 0;
    for (const auto& f : fits) {
      if (f.size() == tags.size() && usable(f[t])) est.push_back(f[t].alpha);
      else ++failures;
    }
    BootstrapInterval ci = interval_from_replicates(est, failures, level);
    ci.estimator_tag = tags[t];
    out.push_back(std::move(ci));
  }
  return out;
}

const McCell& McReport::cell(const std::string& estimator, Scenario scenario, int coefficient) const {
  for (const auto& c : cells)
    if (c.estimator == estimator && c.scenario == scenario && c.coefficient == coefficient) return c;
  throw std::out_of_range("no report cell for " + estimator + "." + to_string(scenario));
}

std::vector<McCell> summarize(const std::vector<McRecord>& records, const Vector& truth) {
  // Keys in order of first appearance.
  std::vector<std::pair<std::string, Scenario>> keys;
  for (const auto& r : records) {
    const auto key = std::make_pair(r.estimator, r.scenario);
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
  }
  std::vector<McCell> cells;
  for (const auto& [est, sc] : keys) {
    for (Index j = 0; j < truth.size(); ++j) {
      McCell c;
      c.estimator = est;
      c.scenario = sc;
      c.coefficient = static_cast<int>(j);
      c.truth = truth[j];
      std::vector<double> err;
      int covered = 0;
      double width = 0.0;
      for (const auto& r : records) {
        if (r.estimator != est || r.scenario != sc) continue;
        if (!r.converged || r.estimate.size() != truth.size() || !r.estimate.allFinite()) {
          ++c.failures;
          continue;
        }
        err.push_back(r.estimate[j] - truth[j]);
        if (!r.has_ci) continue;
        if (r.ci_unreliable) {
          ++c.ci_unreliable;
          continue;
        }
        ++c.ci_runs;
        if (r.lower[j] <= truth[j] && truth[j] <= r.upper[j]) ++covered;
        width += r.upper[j] - r.lower[j];
      }
      c.used = static_cast<int>(err.size());
      if (c.used > 0) {
        double s = 0.0;
        for (double e : err) s += e;
        c.bias = s / c.used;
      } else {
        c.bias = kNaN;
      }
      if (c.used > 1) {
        double ss = 0.0;
        for (double e : err) ss += (e - c.bias) * (e - c.bias);
        c.sd = std::sqrt(ss / (c.used - 1));
        c.mc_se = *c.sd / std::sqrt(static_cast<double>(c.used));
      }
      if (c.ci_runs > 0) {
        c.coverage = static_cast<double>(covered) / c.ci_runs;
        c.mean_width = width / c.ci_runs;
      }
      cells.push_back(c);
    }
  }
  return cells;
}

McReport monte_carlo_study(const McConfig& cfg) {
  if (cfg.runs < 1) throw std::invalid_argument("runs must be at least 1");
  if (!(cfg.ci_level > 0.0 && cfg.ci_level < 1.0)) throw std::invalid_argument("ci_level must lie in (0, 1)");
  if (cfg.bootstrap_b == 1 || cfg.bootstrap_b < 0) throw std::invalid_argument("bootstrap_b must be 0 or at least 2");
  const Scale scale = cfg.dgp.scale;
  EstimatorOptions opts{scale, cfg.optim, cfg.dgp.one_sided};

  // Admitted estimators per scenario, fixed up front.
  std::vector<std::vector<std::string>> admitted;
  for (Scenario s : cfg.scenarios) {
    std::vector<std::string> tags;
    for (const auto& t : cfg.estimators)
      if (estimator_admits(t, scale, s)) tags.push_back(t);
    admitted.push_back(tags);
  }
  std::vector<EstimatorBundle> bundles;
  for (std::size_t s = 0; s < cfg.scenarios.size(); ++s)
    bundles.emplace_back(admitted[s], opts, scenario_rule(cfg.scenarios[s]));

  std::vector<std::vector<McRecord>> per_run(static_cast<std::size_t>(cfg.runs));
#pragma omp parallel for schedule(dynamic)
  for (int run = 0; run < cfg.runs; ++run) {
    DgpSpec spec = cfg.dgp;
    spec.n = cfg.n;
    spec.seed = stream_seed(cfg.seed, static_cast<std::uint64_t>(run));
    const Dataset data = generate_dataset(spec);
    auto& recs = per_run[static_cast<std::size_t>(run)];
    for (std::size_t s = 0; s < cfg.scenarios.size(); ++s) {
      if (admitted[s].empty()) continue;
      const EstimatorBundle& bundle = bundles[s];
      const std::vector<FitResult> fits = bundle.fit(data);
      std::vector<BootstrapInterval> cis;
      if (cfg.bootstrap_b > 0)
        cis = bootstrap_ci(data, bundle, cfg.bootstrap_b, cfg.ci_level, stream_seed(spec.seed, 1 + s), &fits);
      for (std::size_t t = 0; t < fits.size(); ++t) {
        McRecord r;
        r.run = run;
        r.estimator = admitted[s][t];
        r.scenario = cfg.scenarios[s];
        r.converged = usable(fits[t]);
        r.estimate = fits[t].alpha;
        if (!cis.empty()) {
          r.has_ci = true;
          r.ci_unreliable = cis[t].unreliable;
          r.boot_failures = cis[t].failures;
          r.lower = cis[t].lower;
          r.upper = cis[t].upper;
        }
        recs.push_back(std::move(r));
      }
    }
  }

  McReport report;
  report.scale = scale;
  report.truth = cfg.dgp.alpha;
  for (auto& recs : per_run)
    for (auto& r : recs) report.records.push_back(std::move(r));
  report.cells = summarize(report.records, report.truth);
  return report;
}

}  // namespace lateiv
