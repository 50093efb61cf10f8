#include "lateiv/cli.hpp"

#include "lateiv/inference.hpp"
#include "lateiv/io.hpp"
#include "lateiv/kernels.hpp"
#include "lateiv/simulation.hpp"

#include "CLI11.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

namespace lateiv {

namespace {

using nlohmann::json;

// Bad option values caught after parsing; reported like parse errors.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) {
    if (path.empty() || path == "-") {
      os_ = &fallback;
    } else {
      file_.open(path);
      if (!file_) throw std::runtime_error("cannot write '" + path + "'");
      os_ = &file_;
    }
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_ = nullptr;
};

Scale scale_arg(const std::string& s) {
  try {
    return parse_scale(s);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

std::vector<Scenario> scenario_args(const std::vector<std::string>& names) {
  std::vector<Scenario> out;
  try {
    for (const auto& s : names) out.push_back(parse_scenario(s));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return out;
}

void check_tags(const std::vector<std::string>& tags) {
  if (tags.empty()) throw UsageError("no estimator given");
  for (const auto& t : tags)
    if (std::find(estimator_tags().begin(), estimator_tags().end(), t) == estimator_tags().end())
      throw UsageError("unknown estimator '" + t + "'");
}

Selector named(const Dataset& data, const std::vector<std::string>& names) {
  std::vector<std::string> cols{"intercept"};
  for (const auto& n : names) {
    if (n == "intercept") continue;
    if (!data.has_column(n)) throw UsageError("unknown covariate '" + n + "'");
    cols.push_back(n);
  }
  return data.select(cols);
}

json names_json(const Dataset& data, const Selector& sel) {
  json a = json::array();
  for (Index c : sel) a.push_back(data.columns[static_cast<std::size_t>(c)]);
  return a;
}

struct FitArgs {
  std::string in, out, plot_out;
  std::string scale = "additive";
  std::vector<std::string> estimators{"mle"};
  std::vector<std::string> theta, nuisance, instrument;
  bool one_sided = false;
  std::uint64_t seed = 20240101;
  int boot = 0;
  double level = 0.95;
  int max_iter = 500;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  const Scale scale = scale_arg(a.scale);
  check_tags(a.estimators);
  const Dataset data = load_csv(a.in);

  // Default design: the simulation layout when its auxiliary columns are
  // present, every covariate otherwise.
  Design design;
  const bool simulated = data.has_column("x") && data.has_column("xdag") && data.has_column("xp1") &&
                         data.has_column("xp2");
  if (simulated) design = build_scenario_design(data, Scenario::Bth);
  else design = full_design(data);
  if (!a.theta.empty()) design.theta = named(data, a.theta);
  if (!a.nuisance.empty()) design.nuisance = named(data, a.nuisance);
  if (!a.instrument.empty()) design.instrument = named(data, a.instrument);

  EstimatorOptions opts;
  opts.scale = scale;
  opts.one_sided = a.one_sided;
  opts.cfg.max_iter = a.max_iter;
  opts.cfg.seed = a.seed;
  for (const auto& t : a.estimators)
    if ((t == "mle.wang" || t == "dru.wang") && scale != Scale::Additive)
      throw UsageError("estimator '" + t + "' is defined on the additive scale only");
  const EstimatorBundle bundle(a.estimators, opts, fixed_rule(design));
  const std::vector<FitResult> fits = bundle.fit(data);
  std::vector<BootstrapInterval> cis;
  if (a.boot > 0) cis = bootstrap_ci(data, bundle, a.boot, a.level, a.seed, &fits);

  json results = json::array();
  for (std::size_t t = 0; t < fits.size(); ++t) results.push_back(to_json(fits[t], cis.empty() ? nullptr : &cis[t]));
  json doc{{"schema_version", kSchemaVersion},
           {"version", version()},
           {"command", "fit"},
           {"input", a.in},
           {"n", data.n()},
           {"scale", to_string(scale)},
           {"one_sided", a.one_sided},
           {"seed", a.seed},
           {"design",
            {{"theta", names_json(data, design.theta)},
             {"nuisance", names_json(data, design.nuisance)},
             {"instrument", names_json(data, design.instrument)}}},
           {"results", results}};
  if (a.boot > 0) doc["bootstrap"] = {{"replicates", a.boot}, {"level", a.level}};
  Sink sink(a.out, out);
  *sink << doc.dump(2) << '\n';
  if (!a.plot_out.empty()) {
    Sink plot(a.plot_out, out);
    write_plot_csv(*plot, fits, cis);
  }
  return 0;
}

struct McArgs {
  std::string scale = "additive";
  std::vector<std::string> estimators{"mle", "drw", "dru"};
  std::vector<std::string> scenarios{"bth"};
  int runs = 500;
  Index n = 1000;
  int boot = 0;
  double level = 0.95;
  std::uint64_t seed = 20240101;
  bool one_sided = false;
  std::string out, records, table, coverage_table;
};

int cmd_mc(const McArgs& a, std::ostream& out) {
  McConfig cfg;
  cfg.dgp.scale = scale_arg(a.scale);
  cfg.dgp.one_sided = a.one_sided;
  check_tags(a.estimators);
  cfg.estimators = a.estimators;
  cfg.scenarios = scenario_args(a.scenarios);
  if (a.runs < 1) throw UsageError("--runs must be at least 1");
  if (a.n < 1) throw UsageError("--n must be at least 1");
  if (a.boot == 1 || a.boot < 0) throw UsageError("--boot must be 0 or at least 2");
  if (!(a.level > 0.0 && a.level < 1.0)) throw UsageError("--level must lie in (0, 1)");
  cfg.runs = a.runs;
  cfg.n = a.n;
  cfg.bootstrap_b = a.boot;
  cfg.ci_level = a.level;
  cfg.seed = a.seed;
  const McReport report = monte_carlo_study(cfg);

  json doc = to_json(report);
  doc["command"] = "mc";
  doc["config"] = {{"runs", a.runs}, {"n", a.n},         {"bootstrap_b", a.boot}, {"ci_level", a.level},
                   {"seed", a.seed}, {"one_sided", a.one_sided}, {"estimators", a.estimators},
                   {"scenarios", a.scenarios}};
  Sink sink(a.out, out);
  *sink << doc.dump(2) << '\n';
  if (!a.records.empty()) {
    Sink s(a.records, out);
    write_records_csv(*s, report);
  }
  if (!a.table.empty()) {
    Sink s(a.table, out);
    write_table_csv(*s, report.cells, TableKind::Bias);
  }
  if (!a.coverage_table.empty()) {
    Sink s(a.coverage_table, out);
    write_table_csv(*s, report.cells, TableKind::Coverage);
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Local average treatment effect estimation with binary instruments", "lateiv"};
  app.set_config("--config", "", "TOML/INI file with option values");
  app.set_version_flag("--version", std::string(version()));
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "OpenMP worker threads (0 = runtime default)")->check(CLI::NonNegativeNumber);

  // simulate
  auto* sim = app.add_subcommand("simulate", "draw a dataset from the simulation design");
  std::string sim_scale = "additive", sim_out;
  Index sim_n = 1000;
  std::uint64_t sim_seed = 1;
  bool sim_one_sided = false;
  sim->add_option("--scale", sim_scale, "additive or multiplicative");
  sim->add_option("--n", sim_n, "rows")->check(CLI::PositiveNumber);
  sim->add_option("--seed", sim_seed, "RNG seed");
  sim->add_flag("--one-sided", sim_one_sided, "nobody is treated without the instrument");
  sim->add_option("--out", sim_out, "output CSV ('-' for stdout)")->required();

  // fit
  auto* fit = app.add_subcommand("fit", "fit estimators to a CSV dataset");
  FitArgs fa;
  fit->add_option("--in", fa.in, "input CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--out", fa.out, "results JSON (default stdout)");
  fit->add_option("--plot-out", fa.plot_out, "estimate / interval CSV");
  fit->add_option("--scale", fa.scale, "additive or multiplicative");
  fit->add_option("--estimator", fa.estimators, "estimator tags")->delimiter(',');
  fit->add_option("--theta", fa.theta, "target-model covariates (intercept implied)")->delimiter(',');
  fit->add_option("--nuisance", fa.nuisance, "nuisance-model covariates")->delimiter(',');
  fit->add_option("--instrument", fa.instrument, "instrument-model covariates")->delimiter(',');
  fit->add_flag("--one-sided", fa.one_sided, "fix the always-taker share at zero");
  fit->add_option("--seed", fa.seed, "seed for restarts and the bootstrap");
  fit->add_option("--boot", fa.boot, "bootstrap replicates (0 = none)")->check(CLI::NonNegativeNumber);
  fit->add_option("--level", fa.level, "confidence level")->check(CLI::Range(0.0, 1.0));
  fit->add_option("--max-iter", fa.max_iter, "optimizer iteration cap")->check(CLI::PositiveNumber);

  // mc
  auto* mc = app.add_subcommand("mc", "Monte Carlo study on the simulation design");
  McArgs ma;
  mc->add_option("--scale", ma.scale, "additive or multiplicative");
  mc->add_option("--estimator", ma.estimators, "estimator tags")->delimiter(',');
  mc->add_option("--scenario", ma.scenarios, "bth, psc, opc, bad")->delimiter(',');
  mc->add_option("--runs", ma.runs, "Monte Carlo runs");
  mc->add_option("--n", ma.n, "rows per run");
  mc->add_option("--boot", ma.boot, "bootstrap replicates per run (0 = none)");
  mc->add_option("--level", ma.level, "confidence level");
  mc->add_option("--seed", ma.seed, "master seed");
  mc->add_flag("--one-sided", ma.one_sided, "one-sided compliance design");
  mc->add_option("--out", ma.out, "report JSON (default stdout)");
  mc->add_option("--records", ma.records, "raw per-run CSV");
  mc->add_option("--table", ma.table, "bias table CSV");
  mc->add_option("--coverage-table", ma.coverage_table, "coverage table CSV");

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "per-stratum empirical check of the IV inequalities");
  std::string diag_in, diag_out;
  std::vector<std::string> strata, sign_strata;
  diag->add_option("--in", diag_in, "input CSV")->required()->check(CLI::ExistingFile);
  diag->add_option("--strata", strata, "discrete stratum columns")->delimiter(',');
  diag->add_option("--sign-strata", sign_strata, "continuous columns split at zero")->delimiter(',');
  diag->add_option("--out", diag_out, "report JSON (default stdout)");

  // tables
  auto* tab = app.add_subcommand("tables", "summary tables from raw Monte Carlo records");
  std::string tab_in, tab_out, tab_kind = "bias";
  tab->add_option("--records", tab_in, "records CSV written by mc")->required()->check(CLI::ExistingFile);
  tab->add_option("--kind", tab_kind, "bias, coverage or cells")
      ->check(CLI::IsMember({"bias", "coverage", "cells"}));
  tab->add_option("--out", tab_out, "output CSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << version() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "lateiv: " << e.what() << "\nRun with --help for usage.\n";
    return 2;
  }

  try {
    set_worker_threads(threads);
    if (sim->parsed()) {
      DgpSpec spec;
      spec.scale = scale_arg(sim_scale);
      spec.n = sim_n;
      spec.seed = sim_seed;
      spec.one_sided = sim_one_sided;
      const Dataset data = generate_dataset(spec);
      Sink sink(sim_out, out);
      write_csv(*sink, data);
      return 0;
    }
    if (fit->parsed()) return cmd_fit(fa, out);
    if (mc->parsed()) return cmd_mc(ma, out);
    if (diag->parsed()) {
      const Dataset data = load_csv(diag_in);
      std::vector<StratumKey> keys;
      for (const auto& s : strata) keys.push_back({s, false});
      for (const auto& s : sign_strata) keys.push_back({s, true});
      for (const auto& k : keys)
        if (!data.has_column(k.column)) throw UsageError("unknown stratum column '" + k.column + "'");
      const IvDiagnosis d = diagnose_iv(data, keys);
      Sink sink(diag_out, out);
      *sink << to_json(d).dump(2) << '\n';
      return 0;
    }
    if (tab->parsed()) {
      std::ifstream in(tab_in);
      const McReport report = read_records_csv(in);
      Sink sink(tab_out, out);
      if (tab_kind == "cells") write_cells_csv(*sink, report.cells);
      else write_table_csv(*sink, report.cells, tab_kind == "bias" ? TableKind::Bias : TableKind::Coverage);
      return 0;
    }
  } catch (const UsageError& e) {
    err << "lateiv: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "lateiv: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace lateiv
