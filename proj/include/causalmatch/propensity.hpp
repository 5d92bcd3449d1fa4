#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "causalmatch/dataset.hpp"
#include "causalmatch/linreg.hpp"

namespace causalmatch {

struct PropensityResult {
  Eigen::VectorXd ps;
  // Probit linear predictor x' gamma (the matching metric for nearest-neighbour matching).
  Eigen::VectorXd linear_predictor;
  FitResult treatment_fit;
  // False where ps lies outside [min, max] of the opposite group's scores.
  std::vector<bool> common_support;
};

// Intercept plus every confounder, labelled "(Intercept)" and the confounder names.
DesignMatrix treatment_design(const CausalFrame& frame);

PropensityResult estimate_ps(const CausalFrame& frame, const ProbitOptions& options = {});

// Wraps externally supplied scores (clamped) as a PropensityResult whose
// linear predictor is the probit index Phi^{-1}(ps).
PropensityResult propensity_from_scores(const Eigen::VectorXd& ps, const std::vector<int>& a);

enum class WeightScheme { ipw, nn, subclass };

const char* to_string(WeightScheme scheme);
WeightScheme parse_scheme(const std::string& name);

struct WeightSet {
  Eigen::VectorXd w;
  WeightScheme scheme = WeightScheme::ipw;
  std::string estimand = "ATE";
  std::vector<std::pair<std::string, double>> params;
  double ess_treated = 0.0;
  double ess_control = 0.0;

  // Nearest-neighbour only: (treated, control) unit indices and caliper drops.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::size_t dropped_treated = 0;

  // Subclassification only: stratum of every unit after merging.
  std::vector<int> stratum;
};

// Horvitz-Thompson ATE weights a/ps + (1-a)/(1-ps).
WeightSet ipw_weights(const PropensityResult& psr, const std::vector<int>& a);

struct NearestNeighborOptions {
  bool with_replacement = true;
  // Maximum |linear predictor difference| in units of its standard deviation.
  std::optional<double> caliper;
};

// One nearest control per treated unit on the probit linear predictor, ties to
// the lower unit index. Treated units are processed in index order.
WeightSet nn_match_weights(const PropensityResult& psr, const std::vector<int>& a,
                           const NearestNeighborOptions& options = {});

// Propensity subclassification on quantile bins of ps over all units. Strata
// missing either group are merged into their right neighbour (the last one
// into its left). Within stratum s of size n_s with n_s1 treated and n_s0
// controls, treated units get n_s / (2 n_s1) and controls n_s / (2 n_s0), so
// each group's weighted mass per stratum is n_s / 2 and both groups target the
// pooled covariate distribution.
WeightSet subclass_weights(const PropensityResult& psr, const std::vector<int>& a, std::size_t n_strata = 5);

struct SchemeParams {
  NearestNeighborOptions nn;
  std::size_t n_strata = 5;
};

WeightSet make_weights(WeightScheme scheme, const PropensityResult& psr, const std::vector<int>& a,
                       const SchemeParams& params = {});

// Kish effective sample size (sum w)^2 / sum w^2 over units with a_i == group.
double kish_ess(const Eigen::VectorXd& w, const std::vector<int>& a, int group);

}  // namespace causalmatch
