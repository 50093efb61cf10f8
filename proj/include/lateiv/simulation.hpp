#pragma once

// Simulation design: X = (1, U), U ~ Unif(-1, 1), with the structural curves
//   theta = tanh(alpha'X) or exp(alpha'X), phi_i = expit(beta_i'X),
//   opco = exp(eta'X), P(Z=1|X) = expit(gamma'X),
// plus the auxiliary covariates used by the mis-specification scenarios:
// X-dagger = (1, independent Unif(-1, 1)) and X-prime = two fixed indicators.

#include "lateiv/data.hpp"
#include "lateiv/models.hpp"
#include "lateiv/param.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace lateiv {

struct DgpSpec {
  Scale scale = Scale::Additive;
  Vector alpha = Eigen::Vector2d(0.0, -1.0);
  Vector beta1 = Eigen::Vector2d(-0.4, 0.8);
  Vector beta2 = Eigen::Vector2d(-0.4, 0.8);
  Vector beta3 = Eigen::Vector2d(-0.4, 0.8);
  Vector beta4 = Eigen::Vector2d(-0.4, 0.8);
  Vector eta = Eigen::Vector2d(-0.4, 1.0);
  Vector gamma = Eigen::Vector2d(0.1, -1.0);
  Index n = 1000;
  std::uint64_t seed = 1;
  bool one_sided = false;  // phi2 = 0: nobody is treated without the instrument
};

/// Covariate columns of a simulated dataset, intercept first.
inline const std::vector<std::string>& simulation_columns() {
  static const std::vector<std::string> cols{"intercept", "x", "xdag", "xp1", "xp2"};
  return cols;
}

/// Seed of stream `index` under a master seed (splitmix64 of the pair).
std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index);

/// Uniform on [0, 1) from the top 53 bits.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

Dataset generate_dataset(const DgpSpec& spec);

/// The DGP curves as a ModelSet on the X columns of a simulated dataset.
ModelSet true_models(const DgpSpec& spec, const Dataset& data);

/// Per-row true StructuralPoints and instrument probabilities.
std::vector<StructuralPoint> true_structural(const DgpSpec& spec, const Dataset& data);
Vector true_instrument(const DgpSpec& spec, const Dataset& data);

enum class Scenario { Bth, Psc, Opc, Bad };
enum class CovariateSet { X, Xdagger, Xprime };

struct ScenarioSpec {
  Scenario name = Scenario::Bth;
  CovariateSet instrument = CovariateSet::X;
  CovariateSet nuisance = CovariateSet::X;

  static ScenarioSpec of(Scenario s);
};

std::string to_string(Scenario s);
Scenario parse_scenario(const std::string& s);

Selector covariate_selector(const Dataset& data, CovariateSet set);

/// Selectors for the target, nuisance and instrument blocks. The target always
/// uses X. With `abadie_rule` only bth and bad are admitted and bad keeps X
/// for the outcome model. Throws std::out_of_range on missing columns and
/// std::invalid_argument on a scenario not admitted.
Design build_scenario_design(const Dataset& data, Scenario scenario, bool abadie_rule = false);

/// E phi1(X) under the DGP, by midpoint quadrature over U.
double instrument_strength(const DgpSpec& spec, int nodes = 100000);

/// Inverse-probability-weighted E{E(D|Z=1,X) - E(D|Z=0,X)} with a logistic
/// instrument model on `instrument_sel`.
double instrument_strength(const Dataset& data, const Selector& instrument_sel);

}  // namespace lateiv
