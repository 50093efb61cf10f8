#include "lateiv/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>

namespace lateiv {

namespace {

using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, comma - start)));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

std::optional<double> parse_double(const std::string& s) {
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s[0] == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string cell_error(Index row, const std::string& column, const char* what) {
  return "row " + std::to_string(row) + " column " + column + " " + what;
}

json vector_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) {
    if (std::isfinite(v[i])) a.push_back(v[i]);
    else a.push_back(nullptr);
  }
  return a;
}

json optional_json(const std::optional<double>& v) {
  if (v && std::isfinite(*v)) return *v;
  return nullptr;
}

std::string optional_csv(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

const char* version() { return LATEIV_VERSION; }

Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty CSV: header row required");
  const std::vector<std::string> header = split(line);
  std::map<std::string, std::size_t> pos;
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j].empty()) throw std::invalid_argument("header column " + std::to_string(j + 1) + " has no name");
    if (header[j] == "intercept") throw std::invalid_argument("column name 'intercept' is reserved");
    if (!pos.emplace(header[j], j).second) throw std::invalid_argument("duplicate column '" + header[j] + "'");
  }
  for (const char* need : {"y", "d", "z"})
    if (!pos.count(need)) throw std::invalid_argument(std::string("missing required column '") + need + "'");

  std::vector<std::size_t> cov;
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] != "y" && header[j] != "d" && header[j] != "z") cov.push_back(j);

  std::vector<std::vector<double>> rows;
  Index row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const std::vector<std::string> fields = split(line);
    if (fields.size() != header.size())
      throw std::invalid_argument("row " + std::to_string(row) + " has " + std::to_string(fields.size()) +
                                  " fields, header has " + std::to_string(header.size()));
    std::vector<double> vals(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (fields[j].empty() || fields[j] == "NA" || fields[j] == "na")
        throw std::invalid_argument(cell_error(row, header[j], "missing value"));
      const auto v = parse_double(fields[j]);
      if (!v || !std::isfinite(*v)) throw std::invalid_argument(cell_error(row, header[j], "not numeric"));
      vals[j] = *v;
    }
    for (const char* b : {"z", "d", "y"}) {
      const double v = vals[pos.at(b)];
      if (v != 0.0 && v != 1.0) throw std::invalid_argument(cell_error(row, b, "not binary"));
    }
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw std::invalid_argument("CSV has a header but no data rows");

  Dataset data;
  const auto n = static_cast<Index>(rows.size());
  data.columns.push_back("intercept");
  for (std::size_t j : cov) data.columns.push_back(header[j]);
  data.x.resize(n, static_cast<Index>(cov.size()) + 1);
  data.z.resize(n);
  data.d.resize(n);
  data.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    data.x(i, 0) = 1.0;
    for (std::size_t c = 0; c < cov.size(); ++c) data.x(i, static_cast<Index>(c) + 1) = r[cov[c]];
    data.z[i] = r[pos.at("z")];
    data.d[i] = r[pos.at("d")];
    data.y[i] = r[pos.at("y")];
  }
  data.validate();
  return data;
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_csv(in);
}

void write_csv(std::ostream& out, const Dataset& data) {
  std::vector<Index> cov;
  for (Index j = 0; j < data.k(); ++j)
    if (data.columns[static_cast<std::size_t>(j)] != "intercept") cov.push_back(j);
  out << "y,d,z";
  for (Index j : cov) out << ',' << data.columns[static_cast<std::size_t>(j)];
  out << '\n';
  for (Index i = 0; i < data.n(); ++i) {
    out << data.y[i] << ',' << data.d[i] << ',' << data.z[i];
    for (Index j : cov) out << ',' << format_double(data.x(i, j));
    out << '\n';
  }
}

void save_csv(const std::string& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_csv(out, data);
}

json to_json(const FitResult& fit, const BootstrapInterval* ci) {
  json j;
  j["estimator"] = fit.estimator_tag;
  j["scale"] = to_string(fit.scale);
  j["alpha"] = vector_json(fit.alpha);
  j["converged"] = fit.converged;
  j["objective"] = std::isfinite(fit.loglik_or_residual) ? json(fit.loglik_or_residual) : json(nullptr);
  j["message"] = fit.message;
  j["warnings"] = fit.warnings;
  json nuis = json::object();
  for (const auto& [k, v] : fit.nuisance) nuis[k] = vector_json(v);
  j["nuisance"] = nuis;
  if (ci) {
    j["ci"] = {{"lower", vector_json(ci->lower)},
               {"upper", vector_json(ci->upper)},
               {"replicates", ci->replicates},
               {"failures", ci->failures},
               {"unreliable", ci->unreliable}};
  }
  return j;
}

void write_plot_csv(std::ostream& out, const std::vector<FitResult>& fits,
                    const std::vector<BootstrapInterval>& cis) {
  out << "estimator,coefficient,estimate,lower,upper\n";
  for (std::size_t t = 0; t < fits.size(); ++t) {
    const FitResult& f = fits[t];
    const BootstrapInterval* ci = t < cis.size() ? &cis[t] : nullptr;
    for (Index j = 0; j < f.alpha.size(); ++j) {
      out << f.estimator_tag << ',' << j << ',' << format_double(f.alpha[j]) << ',';
      if (ci && j < ci->lower.size()) out << format_double(ci->lower[j]) << ',' << format_double(ci->upper[j]);
      else out << ',';
      out << '\n';
    }
  }
}

void write_records_csv(std::ostream& out, const McReport& report) {
  const Index p = report.truth.size();
  out << "run,estimator,scenario,scale,converged,has_ci,ci_unreliable,boot_failures";
  for (Index j = 0; j < p; ++j) out << ",truth_" << j << ",est_" << j << ",lower_" << j << ",upper_" << j;
  out << '\n';
  for (const auto& r : report.records) {
    out << r.run << ',' << r.estimator << ',' << to_string(r.scenario) << ',' << to_string(report.scale) << ','
        << int(r.converged) << ',' << int(r.has_ci) << ',' << int(r.ci_unreliable) << ',' << r.boot_failures;
    for (Index j = 0; j < p; ++j) {
      out << ',' << format_double(report.truth[j]) << ',';
      if (r.estimate.size() == p) out << format_double(r.estimate[j]);
      out << ',';
      if (r.has_ci && r.lower.size() == p) out << format_double(r.lower[j]) << ',' << format_double(r.upper[j]);
      else out << ',';
    }
    out << '\n';
  }
}

McReport read_records_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("empty records file");
  const std::vector<std::string> header = split(line);
  constexpr std::size_t fixed = 8;
  if (header.size() < fixed || (header.size() - fixed) % 4 != 0 || header[0] != "run" || header[1] != "estimator")
    throw std::invalid_argument("not a records file: unexpected header");
  const auto p = static_cast<Index>((header.size() - fixed) / 4);

  McReport report;
  report.truth = Vector::Constant(p, kNaN);
  Index row = 0;
  bool scale_seen = false;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto f = split(line);
    if (f.size() != header.size()) throw std::invalid_argument("row " + std::to_string(row) + " has the wrong field count");
    auto num = [&](std::size_t j) {
      const auto v = parse_double(f[j]);
      if (!v) throw std::invalid_argument(cell_error(row, header[j], "not numeric"));
      return *v;
    };
    McRecord r;
    r.run = static_cast<int>(num(0));
    r.estimator = f[1];
    r.scenario = parse_scenario(f[2]);
    const Scale scale = parse_scale(f[3]);
    if (scale_seen && scale != report.scale) throw std::invalid_argument("records mix scales");
    report.scale = scale;
    scale_seen = true;
    r.converged = num(4) != 0.0;
    r.has_ci = num(5) != 0.0;
    r.ci_unreliable = num(6) != 0.0;
    r.boot_failures = static_cast<int>(num(7));
    Vector est(p), lo(p), hi(p);
    bool have_est = true, have_ci = r.has_ci;
    for (Index j = 0; j < p; ++j) {
      const std::size_t b = fixed + 4 * static_cast<std::size_t>(j);
      report.truth[j] = num(b);
      if (f[b + 1].empty()) have_est = false;
      else est[j] = num(b + 1);
      if (f[b + 2].empty() || f[b + 3].empty()) {
        have_ci = false;
      } else {
        lo[j] = num(b + 2);
        hi[j] = num(b + 3);
      }
    }
    if (have_est) r.estimate = est;
    if (have_ci) {
      r.lower = lo;
      r.upper = hi;
    }
    r.has_ci = have_ci;
    report.records.push_back(std::move(r));
  }
  report.cells = summarize(report.records, report.truth);
  return report;
}

void write_cells_csv(std::ostream& out, const std::vector<McCell>& cells) {
  out << "estimator,scenario,coefficient,truth,used,failures,bias,sd,mc_se,coverage,mean_width,ci_runs,"
         "ci_unreliable\n";
  for (const auto& c : cells) {
    out << c.estimator << ',' << to_string(c.scenario) << ',' << c.coefficient << ',' << format_double(c.truth)
        << ',' << c.used << ',' << c.failures << ',' << format_double(c.bias) << ',' << optional_csv(c.sd) << ','
        << optional_csv(c.mc_se) << ',' << optional_csv(c.coverage) << ',' << optional_csv(c.mean_width) << ','
        << c.ci_runs << ',' << c.ci_unreliable << '\n';
  }
}

void write_table_csv(std::ostream& out, const std::vector<McCell>& cells, TableKind kind) {
  std::vector<std::string> rows;
  std::map<std::string, std::map<int, const McCell*>> grid;
  int p = 0;
  for (const auto& c : cells) {
    const std::string key = c.estimator + "." + to_string(c.scenario);
    if (!grid.count(key)) rows.push_back(key);
    grid[key][c.coefficient] = &c;
    p = std::max(p, c.coefficient + 1);
  }
  const char* first = kind == TableKind::Bias ? "bias" : "coverage";
  const char* second = kind == TableKind::Bias ? "mc_se" : "mean_width";
  out << "estimator";
  for (int j = 0; j < p; ++j) out << ',' << first << '_' << j << ',' << second << '_' << j;
  out << '\n';
  for (const auto& key : rows) {
    out << key;
    for (int j = 0; j < p; ++j) {
      const auto it = grid[key].find(j);
      if (it == grid[key].end()) {
        out << ",,";
        continue;
      }
      const McCell& c = *it->second;
      if (kind == TableKind::Bias) out << ',' << format_double(c.bias) << ',' << optional_csv(c.mc_se);
      else out << ',' << optional_csv(c.coverage) << ',' << optional_csv(c.mean_width);
    }
    out << '\n';
  }
}

json to_json(const McReport& report) {
  json cells = json::array();
  for (const auto& c : report.cells) {
    cells.push_back({{"estimator", c.estimator},
                     {"scenario", to_string(c.scenario)},
                     {"coefficient", c.coefficient},
                     {"truth", c.truth},
                     {"used", c.used},
                     {"failures", c.failures},
                     {"bias", std::isfinite(c.bias) ? json(c.bias) : json(nullptr)},
                     {"sd", optional_json(c.sd)},
                     {"mc_se", optional_json(c.mc_se)},
                     {"coverage", optional_json(c.coverage)},
                     {"mean_width", optional_json(c.mean_width)},
                     {"ci_runs", c.ci_runs},
                     {"ci_unreliable", c.ci_unreliable}});
  }
  return {{"schema_version", kSchemaVersion},
          {"version", version()},
          {"scale", to_string(report.scale)},
          {"truth", vector_json(report.truth)},
          {"cells", cells}};
}

IvDiagnosis diagnose_iv(const Dataset& data, const std::vector<StratumKey>& strata) {
  data.validate();
  std::vector<Index> cols;
  for (const auto& s : strata) {
    const Index c = data.column(s.column);
    if (!s.by_sign)
      for (Index i = 0; i < data.n(); ++i)
        if (data.x(i, c) != std::round(data.x(i, c)))
          throw std::invalid_argument("stratum column " + s.column + " is not discrete; split it by sign");
    cols.push_back(c);
  }

  struct Counts {
    std::array<std::array<std::array<Index, 2>, 2>, 2> c{};  // [d][y][z]
    std::array<Index, 2> nz{};
  };
  std::map<std::vector<double>, Counts> groups;
  for (Index i = 0; i < data.n(); ++i) {
    std::vector<double> key;
    for (std::size_t s = 0; s < strata.size(); ++s) {
      const double v = data.x(i, cols[s]);
      key.push_back(strata[s].by_sign ? (v > 0.0 ? 1.0 : 0.0) : v);
    }
    Counts& g = groups[key];
    const int z = static_cast<int>(data.z[i]);
    ++g.c[static_cast<int>(data.d[i])][static_cast<int>(data.y[i])][z];
    ++g.nz[z];
  }

  IvDiagnosis out;
  for (const auto& [key, g] : groups) {
    StratumDiagnosis s;
    for (std::size_t k = 0; k < key.size(); ++k) {
      if (k) s.label += ';';
      s.label += strata[k].column + (strata[k].by_sign ? ">0=" : "=") + format_double(key[k]);
    }
    if (s.label.empty()) s.label = "all";
    s.n = g.nz[0] + g.nz[1];
    s.n_by_z = g.nz;
    if (g.nz[0] == 0 || g.nz[1] == 0) {
      s.skipped = true;
      s.note = std::string("skipped: no rows with z=") + (g.nz[0] == 0 ? "0" : "1");
      ++out.skipped;
      out.strata.push_back(std::move(s));
      continue;
    }
    for (int d = 0; d < 2; ++d)
      for (int y = 0; y < 2; ++y)
        for (int z = 0; z < 2; ++z) s.cells(d, y, z) = static_cast<double>(g.c[d][y][z]) / g.nz[z];
    s.slack = check_delta(s.cells).slack;
    // Each slack is a difference of one cell across the two instrument arms.
    static constexpr int kCell[4][3] = {{1, 0, 1}, {1, 1, 1}, {0, 0, 0}, {0, 1, 0}};
    for (int k = 0; k < 4; ++k) {
      const int d = kCell[k][0], y = kCell[k][1], zp = kCell[k][2];
      const double a = s.cells(d, y, zp), b = s.cells(d, y, 1 - zp);
      s.se[k] = std::sqrt(a * (1.0 - a) / g.nz[zp] + b * (1.0 - b) / g.nz[1 - zp]);
      if (s.slack[k] < -2.0 * s.se[k]) s.flagged = true;
    }
    out.flagged += s.flagged;
    out.strata.push_back(std::move(s));
  }
  return out;
}

json to_json(const IvDiagnosis& diag) {
  json strata = json::array();
  for (const auto& s : diag.strata) {
    json j{{"stratum", s.label}, {"n", s.n}, {"n_z0", s.n_by_z[0]}, {"n_z1", s.n_by_z[1]}, {"skipped", s.skipped}};
    if (s.skipped) {
      j["note"] = s.note;
    } else {
      json cells = json::object();
      for (int z = 0; z < 2; ++z)
        for (int d = 0; d < 2; ++d)
          for (int y = 0; y < 2; ++y)
            cells["p(d=" + std::to_string(d) + ",y=" + std::to_string(y) + "|z=" + std::to_string(z) + ")"] =
                s.cells(d, y, z);
      j["cells"] = cells;
      j["slack"] = s.slack;
      j["se"] = s.se;
      j["flagged"] = s.flagged;
    }
    strata.push_back(j);
  }
  return {{"schema_version", kSchemaVersion},
          {"version", version()},
          {"kind", "descriptive check of the IV inequalities on empirical frequencies; not a formal test"},
          {"slack_order", {"p(1,0|1)-p(1,0|0)", "p(1,1|1)-p(1,1|0)", "p(0,0|0)-p(0,0|1)", "p(0,1|0)-p(0,1|1)"}},
          {"flagged", diag.flagged},
          {"skipped", diag.skipped},
          {"strata", strata}};
}

}  // namespace lateiv
