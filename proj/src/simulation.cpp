#include "lateiv/simulation.hpp"

#include "lateiv/numopt.hpp"

#include <stdexcept>

namespace lateiv {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double lin(const Vector& coef, double u) { return coef[0] + coef[1] * u; }

StructuralPoint dgp_point(const DgpSpec& s, double u) {
  StructuralPoint sp;
  sp.theta = s.scale == Scale::Additive ? std::tanh(lin(s.alpha, u)) : std::exp(lin(s.alpha, u));
  sp.phi1 = expit(lin(s.beta1, u));
  sp.phi2 = s.one_sided ? 0.0 : expit(lin(s.beta2, u));
  sp.phi3 = expit(lin(s.beta3, u));
  sp.phi4 = s.one_sided ? 0.0 : expit(lin(s.beta4, u));
  sp.opco = std::exp(lin(s.eta, u));
  return sp;
}

void check_spec(const DgpSpec& s) {
  for (const Vector* v : {&s.alpha, &s.beta1, &s.beta2, &s.beta3, &s.beta4, &s.eta, &s.gamma})
    if (v->size() != 2) throw std::invalid_argument("simulation coefficients must have length 2");
  if (s.n < 1) throw std::invalid_argument("sample size must be positive");
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t state = master;
  const std::uint64_t a = splitmix64(state);
  state = a ^ (index * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL);
  return splitmix64(state);
}

Dataset generate_dataset(const DgpSpec& spec) {
  check_spec(spec);
  const Index n = spec.n;
  Dataset data;
  data.columns = simulation_columns();
  data.x.resize(n, 5);
  data.z.resize(n);
  data.d.resize(n);
  data.y.resize(n);
  const Index half = n / 2;
  const Index tenth = n / 10;
  std::mt19937_64 rng(spec.seed);
  for (Index i = 0; i < n; ++i) {
    const double u = 2.0 * uniform01(rng) - 1.0;
    const double u_dag = 2.0 * uniform01(rng) - 1.0;
    const double uz = uniform01(rng);
    const double ucell = uniform01(rng);
    data.x(i, 0) = 1.0;
    data.x(i, 1) = u;
    data.x(i, 2) = u_dag;
    data.x(i, 3) = i < half ? 1.0 : 0.0;
    data.x(i, 4) = i < tenth ? 0.0 : 1.0;
    const int z = uz < expit(lin(spec.gamma, u)) ? 1 : 0;
    const CellProbs cp = inverse_map(dgp_point(spec, u), spec.scale);
    // Walk the four (d, y) cells of the z arm.
    double cum = 0.0;
    int d = 1, y = 1;
    bool placed = false;
    for (int dd = 0; dd < 2 && !placed; ++dd)
      for (int yy = 0; yy < 2 && !placed; ++yy) {
        cum += cp(dd, yy, z);
        if (ucell < cum) {
          d = dd;
          y = yy;
          placed = true;
        }
      }
    data.z[i] = z;
    data.d[i] = d;
    data.y[i] = y;
  }
  return data;
}

ModelSet true_models(const DgpSpec& spec, const Dataset& data) {
  check_spec(spec);
  const Selector x = covariate_selector(data, CovariateSet::X);
  ModelSet ms = ModelSet::zeros(spec.scale, {x, x, x}, spec.one_sided);
  ms.theta.coef = spec.alpha;
  ms.phi1.coef = spec.beta1;
  ms.phi2.coef = spec.beta2;
  ms.phi3.coef = spec.beta3;
  ms.phi4.coef = spec.beta4;
  ms.op.coef = spec.eta;
  ms.instrument.coef = spec.gamma;
  return ms;
}

std::vector<StructuralPoint> true_structural(const DgpSpec& spec, const Dataset& data) {
  const Index col = data.column("x");
  std::vector<StructuralPoint> out(static_cast<std::size_t>(data.n()));
  for (Index i = 0; i < data.n(); ++i) out[static_cast<std::size_t>(i)] = dgp_point(spec, data.x(i, col));
  return out;
}

Vector true_instrument(const DgpSpec& spec, const Dataset& data) {
  const Index col = data.column("x");
  Vector pi(data.n());
  for (Index i = 0; i < data.n(); ++i) pi[i] = expit(lin(spec.gamma, data.x(i, col)));
  return pi;
}

ScenarioSpec ScenarioSpec::of(Scenario s) {
  switch (s) {
    case Scenario::Bth: return {s, CovariateSet::X, CovariateSet::X};
    case Scenario::Psc: return {s, CovariateSet::X, CovariateSet::Xprime};
    case Scenario::Opc: return {s, CovariateSet::Xdagger, CovariateSet::X};
    case Scenario::Bad: return {s, CovariateSet::Xdagger, CovariateSet::Xprime};
  }
  return {};
}

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::Bth: return "bth";
    case Scenario::Psc: return "psc";
    case Scenario::Opc: return "opc";
    case Scenario::Bad: return "bad";
  }
  return "?";
}

Scenario parse_scenario(const std::string& s) {
  if (s == "bth") return Scenario::Bth;
  if (s == "psc") return Scenario::Psc;
  if (s == "opc") return Scenario::Opc;
  if (s == "bad") return Scenario::Bad;
  throw std::invalid_argument("unknown scenario '" + s + "'");
}

Selector covariate_selector(const Dataset& data, CovariateSet set) {
  switch (set) {
    case CovariateSet::X: return data.select({"intercept", "x"});
    case CovariateSet::Xdagger: return data.select({"intercept", "xdag"});
    case CovariateSet::Xprime: return data.select({"xp1", "xp2"});
  }
  return {};
}

Design build_scenario_design(const Dataset& data, Scenario scenario, bool abadie_rule) {
  ScenarioSpec spec = ScenarioSpec::of(scenario);
  if (abadie_rule) {
    if (scenario != Scenario::Bth && scenario != Scenario::Bad)
      throw std::invalid_argument("the weighted least squares comparator admits only bth and bad");
    spec.nuisance = CovariateSet::X;
  }
  Design d;
  d.theta = covariate_selector(data, CovariateSet::X);
  d.nuisance = covariate_selector(data, spec.nuisance);
  d.instrument = covariate_selector(data, spec.instrument);
  return d;
}

double instrument_strength(const DgpSpec& spec, int nodes) {
  check_spec(spec);
  if (nodes < 1) throw std::invalid_argument("quadrature needs at least one node");
  double sum = 0.0;
  for (int k = 0; k < nodes; ++k) {
    const double u = -1.0 + (2.0 * k + 1.0) / nodes;
    sum += expit(lin(spec.beta1, u));
  }
  return sum / nodes;
}

double instrument_strength(const Dataset& data, const Selector& instrument_sel) {
  const Matrix design = design_matrix(data, instrument_sel);
  const SolveReport rep = fit_logistic(data.z, design, OptimConfig{});
  const Vector eta = design * rep.solution;
  double s = 0.0;
  for (Index i = 0; i < data.n(); ++i) {
    const double pi = expit(eta[i]);
    s += data.d[i] * (data.z[i] / pi - (1.0 - data.z[i]) / (1.0 - pi));
  }
  return s / static_cast<double>(data.n());
}

}  // namespace lateiv
