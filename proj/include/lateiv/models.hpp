#pragma once

// Parametric curve models: link(coef' x[selector]).

#include "lateiv/data.hpp"
#include "lateiv/param.hpp"

#include <cmath>
#include <span>
#include <string>

namespace lateiv {

enum class Link { Tanh, Exp, Expit, LogLinear, Linear };

std::string to_string(Link l);

inline double expit(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

inline double apply_link(Link link, double eta) {
  switch (link) {
    case Link::Tanh: return std::tanh(eta);
    case Link::Exp:
    case Link::LogLinear: return std::exp(eta);
    case Link::Expit: return expit(eta);
    case Link::Linear: return eta;
  }
  return eta;
}

/// d link / d eta, given value = link(eta).
inline double link_slope(Link link, double value) {
  switch (link) {
    case Link::Tanh: return 1.0 - value * value;
    case Link::Exp:
    case Link::LogLinear: return value;
    case Link::Expit: return value * (1.0 - value);
    case Link::Linear: return 1.0;
  }
  return 1.0;
}

struct CurveModel {
  Link link = Link::Linear;
  Vector coef;
  Selector selector;

  double linear_predictor(std::span<const double> row) const;
  double operator()(std::span<const double> row) const { return apply_link(link, linear_predictor(row)); }
};

inline std::span<const double> row_of(const Dataset& data, Index i) {
  return {data.x.row(i).data(), static_cast<std::size_t>(data.k())};
}

/// Target, nuisance and instrument models. Under one-sided compliance
/// phi2 is fixed at 0 and the phi2 / phi4 models are ignored.
struct ModelSet {
  Scale scale = Scale::Additive;
  CurveModel theta, phi1, phi2, phi3, phi4, op, instrument;
  bool one_sided = false;

  /// All coefficients zero, links chosen by scale.
  static ModelSet zeros(Scale scale, const Design& design, bool one_sided = false);

  /// Throws DomainError when a link does not match its curve's range or a
  /// selector and coefficient length disagree.
  void validate() const;

  /// Coefficients of theta, phi1..phi4 and op (instrument excluded), in that
  /// order; phi2 and phi4 are skipped when one-sided.
  Vector free_coefficients() const;
  void set_free_coefficients(const Vector& v);
  Index free_size() const;
};

/// Throws std::out_of_range if a selector exceeds the row.
StructuralPoint eval_structural(const ModelSet& ms, std::span<const double> row);

/// d theta(x; alpha) / d alpha.
Vector theta_gradient(const ModelSet& ms, std::span<const double> row);

}  // namespace lateiv
