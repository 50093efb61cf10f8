#include "lateiv/data.hpp"

#include <algorithm>
#include <stdexcept>

namespace lateiv {

Index Dataset::column(std::string_view name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw std::out_of_range("unknown covariate column '" + std::string(name) + "'");
  return static_cast<Index>(it - columns.begin());
}

bool Dataset::has_column(std::string_view name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

Selector Dataset::select(const std::vector<std::string>& names) const {
  Selector sel;
  sel.reserve(names.size());
  for (const auto& nm : names) sel.push_back(column(nm));
  return sel;
}

void Dataset::validate() const {
  const Index rows = n();
  if (rows < 1) throw std::invalid_argument("dataset has no rows");
  if (z.size() != rows || d.size() != rows || y.size() != rows)
    throw std::invalid_argument("z, d, y lengths do not match covariate rows");
  if (static_cast<Index>(columns.size()) != k())
    throw std::invalid_argument("column names do not match covariate width");
  auto binary = [](const Vector& v, const char* name) {
    for (Index i = 0; i < v.size(); ++i)
      if (v[i] != 0.0 && v[i] != 1.0)
        throw std::invalid_argument("row " + std::to_string(i + 1) + " column " + name + " not binary");
  };
  binary(z, "z");
  binary(d, "d");
  binary(y, "y");
  if (!x.allFinite()) throw std::invalid_argument("covariates contain non-finite values");
}

Dataset Dataset::subset(const std::vector<Index>& rows) const {
  Dataset out;
  out.columns = columns;
  out.x.resize(static_cast<Index>(rows.size()), k());
  out.z.resize(static_cast<Index>(rows.size()));
  out.d.resize(out.z.size());
  out.y.resize(out.z.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Index r = rows[i];
    const auto ii = static_cast<Index>(i);
    out.x.row(ii) = x.row(r);
    out.z[ii] = z[r];
    out.d[ii] = d[r];
    out.y[ii] = y[r];
  }
  return out;
}

Matrix design_matrix(const Dataset& data, const Selector& sel) {
  Matrix m(data.n(), static_cast<Index>(sel.size()));
  for (std::size_t j = 0; j < sel.size(); ++j) {
    if (sel[j] < 0 || sel[j] >= data.k()) throw std::out_of_range("selector index out of range");
    m.col(static_cast<Index>(j)) = data.x.col(sel[j]);
  }
  return m;
}

Design full_design(const Dataset& data) {
  Selector all(static_cast<std::size_t>(data.k()));
  for (Index j = 0; j < data.k(); ++j) all[static_cast<std::size_t>(j)] = j;
  return {all, all, all};
}

}  // namespace lateiv
