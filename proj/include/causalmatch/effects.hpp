#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causalmatch/balance.hpp"
#include "causalmatch/dataset.hpp"
#include "causalmatch/linreg.hpp"
#include "causalmatch/propensity.hpp"
#include "causalmatch/synth.hpp"

namespace causalmatch {

enum class Estimator { naive, adjusted, matched };

const char* to_string(Estimator estimator);

struct EffectEstimate {
  double estimate = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  Estimator estimator = Estimator::naive;
  std::size_t n_used = 0;
  std::optional<std::size_t> trial_index;
  // Degrees of freedom of the t interval (naive only); 0 for normal intervals.
  double df = 0.0;

  bool covers(double value) const { return ci_low <= value && value <= ci_high; }
};

// Treated minus control mean with a Welch-Satterthwaite t interval.
EffectEstimate diff_in_means(const CausalFrame& frame);

// Outcome regression of y on 1, a, centred confounders and a x centred
// confounder interactions. With centres at the sample means, the coefficient
// on a is the g-computation ATE of the fitting sample.
struct OutcomeModel {
  FitResult fit;
  Eigen::VectorXd centers;
  std::vector<std::string> confounders;

  Eigen::Index treatment_index() const { return 1; }
  Eigen::Index interaction_index(std::size_t j) const {
    return static_cast<Eigen::Index>(2 + confounders.size() + j);
  }
};

DesignMatrix outcome_design(const CausalFrame& frame, const Eigen::VectorXd& centers);

OutcomeModel fit_outcome_model(const CausalFrame& frame, const WeightSet* weights = nullptr,
                               CovarianceKind covariance = CovarianceKind::hc0);

// (1/n) sum_i [m(1, x_i) - m(0, x_i)] over `frame` in closed form, with a
// delta-method SE from the model covariance and a normal 95% interval.
EffectEstimate gcomp_ate(const OutcomeModel& model, const CausalFrame& frame);

// OLS of y on 1, a and the confounders; the a coefficient with an HC0 interval.
EffectEstimate adjusted_ate(const CausalFrame& frame);

// Weighted outcome model followed by g-computation.
EffectEstimate matched_ate(const CausalFrame& frame, const WeightSet& weights);

struct DecompositionResult {
  double naive = 0.0;
  double ate = 0.0;
  double att = 0.0;
  double atc = 0.0;
  double pi = 0.0;
  // E[Y(0) | A=1] - E[Y(0) | A=0]
  double selection_bias_term = 0.0;
  // (1 - pi)(ATT - ATC)
  double het_term = 0.0;
  // naive - (ate + selection_bias_term + het_term)
  double residual = 0.0;
};

DecompositionResult decompose(const PotentialFrame& pf);

struct StratumSlope {
  double lower = 0.0;
  double upper = 0.0;
  double slope = 0.0;
  double se = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t n = 0;
  bool reversed = false;
};

struct StratifiedSlopes {
  std::string confounder;
  std::size_t requested_bins = 0;
  std::vector<StratumSlope> strata;
  StratumSlope marginal;
  std::size_t reversed_count = 0;

  bool all_reversed() const { return !strata.empty() && reversed_count == strata.size(); }
};

inline constexpr std::size_t kMinRowsPerStratum = 3;

// Marginal and per-bin OLS slopes of y on the continuous treatment column
// over quantile bins of one confounder. Bins with fewer than 3 rows (or a
// constant treatment) are merged into their right neighbour, the last into its left.
StratifiedSlopes simpson_strata(const CausalFrame& frame, const std::string& confounder, std::size_t n_bins = 50);

struct TrialResult {
  std::size_t trial_index = 0;
  bool ok = false;
  std::string error;
  EffectEstimate naive;
  EffectEstimate adjusted;
  EffectEstimate matched;
  BalanceReport balance;
  double ess_treated = 0.0;
  double ess_control = 0.0;
};

struct TrialOptions {
  std::size_t n_trials = 10;
  std::size_t sample_size = 0;
  std::uint64_t seed = 0;
  WeightScheme scheme = WeightScheme::ipw;
  SchemeParams scheme_params;
  // 0: CAUSAL_MATCH_THREADS if set, else hardware concurrency.
  std::size_t threads = 0;
};

// One analysis per trial on sample_units(frame, sample_size, seed, trial).
// Failed trials are returned with ok == false; at least one must succeed.
std::vector<TrialResult> run_trials(const CausalFrame& frame, const TrialOptions& options);

// Number of worker threads honouring CAUSAL_MATCH_THREADS.
std::size_t worker_threads(std::size_t requested, std::size_t jobs);

}  // namespace causalmatch
