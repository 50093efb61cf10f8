#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <vector>

namespace lateiv {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

/// Column indices into a covariate row.
using Selector = std::vector<Index>;

/// n observations of (covariates, z, d, y). Column 0 of `x` is the intercept.
/// Binary variables are stored as 0.0 / 1.0.
struct Dataset {
  RowMatrix x;
  std::vector<std::string> columns;
  Vector z, d, y;

  Index n() const { return x.rows(); }
  Index k() const { return x.cols(); }

  /// Throws std::out_of_range for unknown names.
  Index column(std::string_view name) const;
  bool has_column(std::string_view name) const;
  Selector select(const std::vector<std::string>& names) const;

  /// Throws std::invalid_argument on shape mismatch or non-binary z/d/y.
  void validate() const;

  Dataset subset(const std::vector<Index>& rows) const;
};

/// Dense column-major design built from the selected covariate columns.
Matrix design_matrix(const Dataset& data, const Selector& sel);

/// Covariate selectors for each model block of an estimator.
struct Design {
  Selector theta;       // target model
  Selector nuisance;    // phi / odds-product / outcome nuisance models
  Selector instrument;  // P(Z=1 | X)
};

/// All columns for every block.
Design full_design(const Dataset& data);

}  // namespace lateiv
