#pragma once

// CSV datasets, JSON / CSV result emission and the empirical IV-inequality
// diagnostic.
//
// CSV dialect: comma separated, '.' decimals, mandatory header. Columns y, d
// and z are required and binary; every other column is a numeric covariate.
// An intercept column is prepended on load and dropped on write.

#include "lateiv/data.hpp"
#include "lateiv/estimate.hpp"
#include "lateiv/inference.hpp"
#include "lateiv/param.hpp"

#include "json.hpp"

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace lateiv {

inline constexpr int kSchemaVersion = 1;
const char* version();

/// Parse errors name the 1-based data row and the column, e.g.
/// "row 7 column z not binary".
Dataset read_csv(std::istream& in);
Dataset load_csv(const std::string& path);
/// Doubles are written with 17 significant digits, so read_csv(write_csv(d)) == d.
void write_csv(std::ostream& out, const Dataset& data);
void save_csv(const std::string& path, const Dataset& data);

nlohmann::json to_json(const FitResult& fit, const BootstrapInterval* ci = nullptr);

/// estimator,coefficient,estimate,lower,upper (lower/upper empty without intervals).
void write_plot_csv(std::ostream& out, const std::vector<FitResult>& fits, const std::vector<BootstrapInterval>& cis);

/// Raw per-run records, one line each: run,estimator,scenario,scale,converged,
/// has_ci,ci_unreliable,boot_failures, then truth_j,est_j,lower_j,upper_j per
/// coefficient. Missing estimates or intervals are left empty.
void write_records_csv(std::ostream& out, const McReport& report);
/// Reads records back and recomputes the summary cells from them.
McReport read_records_csv(std::istream& in);

/// One row per summary cell.
void write_cells_csv(std::ostream& out, const std::vector<McCell>& cells);

enum class TableKind { Bias, Coverage };
/// Wide table: one row per estimator.scenario, two columns per coefficient
/// (bias and its Monte Carlo SE, or coverage and mean interval width).
void write_table_csv(std::ostream& out, const std::vector<McCell>& cells, TableKind kind);

nlohmann::json to_json(const McReport& report);

/// A stratification column; continuous columns can be split at zero.
struct StratumKey {
  std::string column;
  bool by_sign = false;
};

struct StratumDiagnosis {
  std::string label;  // "col=value;col=value"
  Index n = 0;
  std::array<Index, 2> n_by_z{};
  bool skipped = false;
  std::string note;
  CellProbs cells;              // empirical p(d, y | z)
  std::array<double, 4> slack{};  // ordered as DeltaReport::slack
  std::array<double, 4> se{};
  bool flagged = false;  // some slack below -2 SE
};

struct IvDiagnosis {
  std::vector<StratumDiagnosis> strata;
  int flagged = 0;
  int skipped = 0;
};

/// Descriptive per-stratum check of the IV inequalities on empirical cell
/// frequencies. Not a formal test. Strata without both instrument arms are
/// skipped with a note. Columns split without `by_sign` must hold integers.
IvDiagnosis diagnose_iv(const Dataset& data, const std::vector<StratumKey>& strata);

nlohmann::json to_json(const IvDiagnosis& diag);

}  // namespace lateiv
