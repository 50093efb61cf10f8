#include "lateiv/moment.hpp"

#include "lateiv/numopt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace lateiv {

double compute_H(double y, double d, double theta, Scale scale) {
  check_theta_domain(theta, scale);
  if (scale == Scale::Additive) return y - d * theta;
  return d != 0.0 ? y / theta : y;
}

namespace {

double expected_H_unchecked(const StructuralPoint& sp, Scale scale) {
  const ComplierRisks f = detail::complier_risks_unchecked(sp.theta, sp.opco, scale);
  const double nt = (1.0 - sp.phi1) * (1.0 - sp.phi2);
  const double at = (1.0 - sp.phi1) * sp.phi2;
  if (scale == Scale::Additive) return f.f0 * sp.phi1 + nt * sp.phi3 + at * sp.phi4 - sp.theta * at;
  return f.f0 * sp.phi1 + at * sp.phi4 / sp.theta + nt * sp.phi3;
}

double variance_unfloored(const StructuralPoint& sp, double pi, Scale scale) {
  const CellProbs cp = detail::inverse_map_unchecked(sp, scale);
  const double th = sp.theta;
  double eh2[2];
  double mu;
  if (scale == Scale::Additive) {
    mu = cp(0, 1, 0) + cp(1, 1, 0) - th * (cp(1, 0, 0) + cp(1, 1, 0));
    for (int z = 0; z < 2; ++z) {
      const double py = cp(0, 1, z) + cp(1, 1, z);
      const double pd = cp(1, 0, z) + cp(1, 1, z);
      eh2[z] = py + th * th * pd - 2.0 * th * cp(1, 1, z);
    }
  } else {
    mu = cp(1, 1, 0) / th + cp(0, 1, 0);
    for (int z = 0; z < 2; ++z) eh2[z] = cp(1, 1, z) / (th * th) + cp(0, 1, z);
  }
  return (eh2[1] - mu * mu) / pi + (eh2[0] - mu * mu) / (1.0 - pi);
}

// omega = -grad_theta * factor
double omega_factor(const StructuralPoint& sp, double pi, Scale scale, bool* floored) {
  double v = variance_unfloored(sp, pi, scale);
  *floored = !(v > kVarianceFloor);
  if (*floored) v = kVarianceFloor;
  if (scale == Scale::Additive) return sp.phi1 / v;
  const ComplierRisks f = detail::complier_risks_unchecked(sp.theta, sp.opco, scale);
  return f.f1 * sp.phi1 / (sp.theta * sp.theta * v);
}

}  // namespace

double expected_H_given_X(const StructuralPoint& sp, Scale scale) {
  validate(sp, scale);
  return expected_H_unchecked(sp, scale);
}

double omega_variance(const StructuralPoint& sp, double pi_x, Scale scale) {
  validate(sp, scale);
  if (!(pi_x > 0.0 && pi_x < 1.0)) throw DomainError("instrument probability must lie in (0, 1)");
  return variance_unfloored(sp, pi_x, scale);
}

OmegaResult optimal_omega(const StructuralPoint& sp, double pi_x, const Vector& grad_theta, Scale scale) {
  validate(sp, scale);
  if (!(pi_x > 0.0 && pi_x < 1.0)) throw DomainError("instrument probability must lie in (0, 1)");
  OmegaResult r;
  const double factor = omega_factor(sp, pi_x, scale, &r.floored);
  r.variance = std::max(variance_unfloored(sp, pi_x, scale), kVarianceFloor);
  r.omega = -grad_theta * factor;
  return r;
}

DrMoment DrMoment::structural(const Dataset& data, const Selector& theta_sel, Scale scale,
                              std::vector<StructuralPoint> nuisance, Vector pi, WeightMode mode,
                              const Matrix* weights) {
  if (static_cast<Index>(nuisance.size()) != data.n() || pi.size() != data.n())
    throw std::invalid_argument("nuisance / instrument vectors must have one entry per row");
  if ((mode == WeightMode::Fixed) != (weights != nullptr))
    throw std::invalid_argument("a weight matrix goes with fixed weights and only with them");
  DrMoment m;
  m.scale_ = scale;
  m.theta_link_ = scale == Scale::Additive ? Link::Tanh : Link::Exp;
  m.theta_design_ = design_matrix(data, theta_sel);
  m.y_ = data.y;
  m.d_ = data.d;
  m.z_ = data.z;
  m.pi_ = std::move(pi);
  m.structural_ = true;
  m.nuisance_ = std::move(nuisance);
  m.mode_ = mode;
  if (weights) {
    if (weights->rows() != data.n() || weights->cols() != m.theta_design_.cols())
      throw std::invalid_argument("weight matrix must be n x dim(alpha)");
    m.weights_ = *weights;
  }
  return m;
}

DrMoment DrMoment::affine(const Dataset& data, const Selector& theta_sel, Scale scale, Vector a, Vector b,
                          Vector pi, const Matrix* weights) {
  if (a.size() != data.n() || b.size() != data.n() || pi.size() != data.n())
    throw std::invalid_argument("nuisance / instrument vectors must have one entry per row");
  DrMoment m;
  m.scale_ = scale;
  m.theta_link_ = scale == Scale::Additive ? Link::Tanh : Link::Exp;
  m.theta_design_ = design_matrix(data, theta_sel);
  m.y_ = data.y;
  m.d_ = data.d;
  m.z_ = data.z;
  m.pi_ = std::move(pi);
  m.a_ = std::move(a);
  m.b_ = std::move(b);
  if (weights) {
    if (weights->rows() != data.n() || weights->cols() != m.theta_design_.cols())
      throw std::invalid_argument("weight matrix must be n x dim(alpha)");
    m.mode_ = WeightMode::Fixed;
    m.weights_ = *weights;
  }
  return m;
}

double DrMoment::theta_at(Index i, const Vector& alpha) const {
  return apply_link(theta_link_, theta_design_.row(i).dot(alpha));
}

double DrMoment::expected_H(Index i, double theta) const {
  if (structural_) {
    StructuralPoint sp = nuisance_[static_cast<std::size_t>(i)];
    sp.theta = theta;
    return expected_H_unchecked(sp, scale_);
  }
  if (scale_ == Scale::Additive) return a_[i] - theta * b_[i];
  return a_[i] / theta + b_[i];
}

bool DrMoment::row_summand(Index i, const Vector& alpha, double* out, bool* floored) const {
  const Index p = dim();
  const double th = theta_at(i, alpha);
  if (scale_ == Scale::Multiplicative && !(th > kThetaFloor && std::isfinite(th))) return false;
  const double h = scale_ == Scale::Additive ? y_[i] - d_[i] * th : (d_[i] != 0.0 ? y_[i] / th : y_[i]);
  const double resid = h - expected_H(i, th);
  const double f = z_[i] != 0.0 ? pi_[i] : 1.0 - pi_[i];
  const double core = (2.0 * z_[i] - 1.0) / f * resid;
  *floored = false;
  switch (mode_) {
    case WeightMode::Identity:
      for (Index j = 0; j < p; ++j) out[j] = theta_design_(i, j) * core;
      break;
    case WeightMode::Fixed:
      for (Index j = 0; j < p; ++j) out[j] = weights_(i, j) * core;
      break;
    case WeightMode::Optimal: {
      StructuralPoint sp = nuisance_[static_cast<std::size_t>(i)];
      sp.theta = th;
      const double factor = omega_factor(sp, pi_[i], scale_, floored);
      const double slope = link_slope(theta_link_, th);
      for (Index j = 0; j < p; ++j) out[j] = -slope * theta_design_(i, j) * factor * core;
      break;
    }
  }
  return true;
}

Vector DrMoment::mean(const Vector& alpha, Execution exec) const {
  const Index p = dim();
  const Index n = rows();
  struct Acc {
    Vector sum;
    bool ok = true;
    Acc& operator+=(const Acc& o) {
      sum += o.sum;
      ok = ok && o.ok;
      return *this;
    }
  };
  const Acc zero{Vector::Zero(p), true};
  const Acc total = chunked_reduce(
      n, zero,
      [&](Index b, Index e, Acc& acc) {
        Vector buf(p);
        bool fl = false;
        for (Index i = b; i < e; ++i) {
          if (!row_summand(i, alpha, buf.data(), &fl)) {
            acc.ok = false;
            return;
          }
          acc.sum += buf;
        }
      },
      exec);
  if (!total.ok) return Vector::Constant(p, std::numeric_limits<double>::quiet_NaN());
  return total.sum / static_cast<double>(n);
}

Matrix DrMoment::summands(const Vector& alpha) const {
  Matrix s(rows(), dim());
  Vector buf(dim());
  bool fl = false;
  for (Index i = 0; i < rows(); ++i) {
    if (!row_summand(i, alpha, buf.data(), &fl)) buf.setConstant(std::numeric_limits<double>::quiet_NaN());
    s.row(i) = buf.transpose();
  }
  return s;
}

Index DrMoment::floored_rows(const Vector& alpha) const {
  if (mode_ != WeightMode::Optimal) return 0;
  Index count = 0;
  Vector buf(dim());
  for (Index i = 0; i < rows(); ++i) {
    bool fl = false;
    row_summand(i, alpha, buf.data(), &fl);
    if (fl) ++count;
  }
  return count;
}

Matrix DrMoment::optimal_weights(const Vector& alpha, Index* floored) const {
  if (!structural_) throw std::logic_error("optimal weights need structural nuisances");
  Matrix w(rows(), dim());
  Index count = 0;
  for (Index i = 0; i < rows(); ++i) {
    StructuralPoint sp = nuisance_[static_cast<std::size_t>(i)];
    sp.theta = theta_at(i, alpha);
    bool fl = false;
    const double factor = omega_factor(sp, pi_[i], scale_, &fl);
    count += fl;
    w.row(i) = -link_slope(theta_link_, sp.theta) * factor * theta_design_.row(i);
  }
  if (floored) *floored = count;
  return w;
}

}  // namespace lateiv
