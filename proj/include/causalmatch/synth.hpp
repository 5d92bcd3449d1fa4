#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "causalmatch/dataset.hpp"
#include "causalmatch/rng.hpp"

namespace causalmatch {

// Structural model with a probit treatment equation and a linear outcome
// equation with treatment-confounder interactions:
//   X_j ~ N(x_mean_j, x_sd_j^2) independently
//   A   ~ Bernoulli(Phi(gamma_0 + sum_j gamma_j X_j))
//   Y(0) = intercept + sum_j main_j X_j + e,  e ~ N(0, noise_sd^2)
//   Y(1) = Y(0) + tau + sum_j interaction_j X_j
struct ScmSpec {
  std::size_t k = 3;
  std::vector<double> x_mean;
  std::vector<double> x_sd;
  std::vector<double> gamma;
  double intercept = 0.0;
  double tau = 2.0;
  std::vector<double> main_effects;
  std::vector<double> interactions;
  double noise_sd = 1.0;

  // Fills empty vectors with defaults (means 0, SDs 1, zero effects) and checks sizes.
  void normalize();
  void validate() const;

  static ScmSpec default_spec();
  static ScmSpec from_json(const std::string& text);
  std::string to_json() const;
};

struct PotentialFrame {
  CausalFrame frame;
  std::vector<double> y0;
  std::vector<double> y1;

  std::size_t n() const { return frame.n(); }
  // Throws unless y == a y1 + (1 - a) y0 holds exactly for every unit.
  void validate() const;
};

PotentialFrame generate(const ScmSpec& spec, std::size_t n, std::uint64_t seed);

// Builds a PotentialFrame from explicit columns; y is filled by consistency.
// A single zero-valued confounder "x1" is attached when `x` is empty.
PotentialFrame make_potential_frame(std::vector<int> a, std::vector<double> y0, std::vector<double> y1,
                                    Eigen::MatrixXd x = {});

struct Effects {
  double ate = 0.0;
  double att = 0.0;
  double atc = 0.0;
  double pi = 0.0;
};

// Sample averages of y1 - y0 overall, over treated and over controls.
Effects true_effects(const PotentialFrame& pf);

// Population values implied by the spec (closed form under the normal/probit model).
Effects analytic_effects(const ScmSpec& spec);

// Expected treated fraction and group-conditional confounder means under the spec.
struct AnalyticMoments {
  double pi = 0.0;
  std::vector<double> mean_treated;
  std::vector<double> mean_control;
};
AnalyticMoments analytic_moments(const ScmSpec& spec);

// Finite model for exact checks of the propensity-score propositions.
struct OutcomeCell {
  double y0 = 0.0;
  double y1 = 0.0;
  double prob = 0.0;
  // Set only in models that break ignorability: treatment probability that
  // depends on the potential outcomes as well as x.
  std::optional<double> p_treat;
};

struct SupportPoint {
  std::vector<int> x;
  double prob = 0.0;
  double p_treat = 0.5;
  std::vector<OutcomeCell> outcomes;
};

struct DiscreteModel {
  std::vector<SupportPoint> support;

  void validate() const;
  // pr(A = 1 | X = x) for support point i.
  double propensity(std::size_t i) const;
};

struct PropertyReport {
  double max_violation = 0.0;
  std::size_t strata = 0;
  std::size_t excluded_strata = 0;
  std::vector<std::string> notes;
};

inline constexpr double kScoreTieTolerance = 1e-12;

// Groups support points by equal score (default: the propensity score) and
// compares pr(X = x | A = 1, score) with pr(X = x | A = 0, score) by exact summation.
PropertyReport check_balancing_property(const DiscreteModel& dm, std::span<const double> score = {});

// Compares pr(A = 1 | Y(0), Y(1), p) with pr(A = 1 | p) by exact summation.
PropertyReport check_outcome_independence(const DiscreteModel& dm);

// Random model on X in {0,1}^dims with random propensities and outcome tables
// that depend on x only. `tie_pairs` forces pairs of support points to share
// a propensity so that strata are not all singletons.
DiscreteModel random_discrete_model(Rng& rng, std::size_t dims = 2, std::size_t cells_per_point = 3,
                                    bool tie_pairs = true);

// Negative control: same shape, but the treatment probability of each outcome
// cell depends on the potential outcomes.
DiscreteModel unignorable_discrete_model(Rng& rng, std::size_t dims = 2);

}  // namespace causalmatch
