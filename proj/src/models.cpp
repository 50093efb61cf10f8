#include "lateiv/models.hpp"

#include <stdexcept>

namespace lateiv {

std::string to_string(Link l) {
  switch (l) {
    case Link::Tanh: return "tanh";
    case Link::Exp: return "exp";
    case Link::Expit: return "expit";
    case Link::LogLinear: return "loglinear";
    case Link::Linear: return "linear";
  }
  return "?";
}

double CurveModel::linear_predictor(std::span<const double> row) const {
  double eta = 0.0;
  for (std::size_t j = 0; j < selector.size(); ++j) {
    const auto c = static_cast<std::size_t>(selector[j]);
    if (c >= row.size()) throw std::out_of_range("selector index exceeds covariate row");
    eta += coef[static_cast<Index>(j)] * row[c];
  }
  return eta;
}

namespace {

CurveModel zero_curve(Link link, const Selector& sel) {
  return {link, Vector::Zero(static_cast<Index>(sel.size())), sel};
}

}  // namespace

ModelSet ModelSet::zeros(Scale scale, const Design& design, bool one_sided) {
  ModelSet ms;
  ms.scale = scale;
  ms.one_sided = one_sided;
  ms.theta = zero_curve(scale == Scale::Additive ? Link::Tanh : Link::Exp, design.theta);
  ms.phi1 = zero_curve(Link::Expit, design.nuisance);
  ms.phi2 = zero_curve(Link::Expit, design.nuisance);
  ms.phi3 = zero_curve(Link::Expit, design.nuisance);
  ms.phi4 = zero_curve(Link::Expit, design.nuisance);
  ms.op = zero_curve(Link::Exp, design.nuisance);
  ms.instrument = zero_curve(Link::Expit, design.instrument);
  return ms;
}

void ModelSet::validate() const {
  const Link want_theta = scale == Scale::Additive ? Link::Tanh : Link::Exp;
  if (theta.link != want_theta) throw DomainError("theta link does not match scale");
  for (const CurveModel* c : {&phi1, &phi2, &phi3, &phi4, &instrument})
    if (c->link != Link::Expit) throw DomainError("probability curves require the expit link");
  if (op.link != Link::Exp && op.link != Link::LogLinear) throw DomainError("odds product requires a log-linear link");
  for (const CurveModel* c : {&theta, &phi1, &phi2, &phi3, &phi4, &op, &instrument})
    if (c->coef.size() != static_cast<Index>(c->selector.size()))
      throw DomainError("coefficient length differs from selector length");
}

Index ModelSet::free_size() const {
  Index n = theta.coef.size() + phi1.coef.size() + phi3.coef.size() + op.coef.size();
  if (!one_sided) n += phi2.coef.size() + phi4.coef.size();
  return n;
}

Vector ModelSet::free_coefficients() const {
  Vector v(free_size());
  Index at = 0;
  auto put = [&](const CurveModel& c) {
    v.segment(at, c.coef.size()) = c.coef;
    at += c.coef.size();
  };
  put(theta);
  put(phi1);
  if (!one_sided) put(phi2);
  put(phi3);
  if (!one_sided) put(phi4);
  put(op);
  return v;
}

void ModelSet::set_free_coefficients(const Vector& v) {
  if (v.size() != free_size()) throw std::invalid_argument("free coefficient vector has wrong length");
  Index at = 0;
  auto take = [&](CurveModel& c) {
    c.coef = v.segment(at, c.coef.size());
    at += c.coef.size();
  };
  take(theta);
  take(phi1);
  if (!one_sided) take(phi2);
  take(phi3);
  if (!one_sided) take(phi4);
  take(op);
}

StructuralPoint eval_structural(const ModelSet& ms, std::span<const double> row) {
  StructuralPoint sp;
  sp.theta = ms.theta(row);
  sp.phi1 = ms.phi1(row);
  sp.phi3 = ms.phi3(row);
  sp.opco = ms.op(row);
  if (ms.one_sided) {
    sp.phi2 = 0.0;
    sp.phi4 = 0.0;
  } else {
    sp.phi2 = ms.phi2(row);
    sp.phi4 = ms.phi4(row);
  }
  return sp;
}

Vector theta_gradient(const ModelSet& ms, std::span<const double> row) {
  const double th = ms.theta(row);
  const double slope = link_slope(ms.theta.link, th);
  Vector g(static_cast<Index>(ms.theta.selector.size()));
  for (std::size_t j = 0; j < ms.theta.selector.size(); ++j)
    g[static_cast<Index>(j)] = slope * row[static_cast<std::size_t>(ms.theta.selector[j])];
  return g;
}

}  // namespace lateiv
