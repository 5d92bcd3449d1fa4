#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "causalmatch/dataset.hpp"
#include "causalmatch/propensity.hpp"

namespace causalmatch {

// |SMD| below this is reported as balanced. Conventional cut-off.
inline constexpr double kBalanceThreshold = 0.1;

// Signed standardized mean difference, treated minus control. Means are
// weighted when `w` is nonempty; the pooled SD sqrt((s_T^2 + s_C^2) / 2) always
// comes from the unweighted sample so before/after values share a denominator.
double smd(std::span<const double> values, const std::vector<int>& a, std::span<const double> w = {});

// Frequency-weighted generalisation of the type 7 sample quantile. After
// sorting, unit k with weight w_k occupies the position interval
// [S_k, S_k + max(w_k - 1, 0)], where S_k is the weight sum of the units
// before it. The target position is h = p (W - 1) with W the total weight; h
// inside an interval returns that unit's value, h between intervals
// interpolates linearly between the neighbouring values. With integer weights
// this is exactly the type 7 quantile of the sample in which every value is
// repeated w_k times; with unit weights it is the ordinary type 7 quantile.
std::vector<double> weighted_quantiles(std::span<const double> values, std::span<const double> w,
                                       std::span<const double> probs);

std::vector<double> quantiles(std::span<const double> values, std::span<const double> probs);

struct QQPairs {
  std::string variable;
  std::vector<double> probs;
  std::vector<double> control_q;
  std::vector<double> treatment_q;
  bool weighted = false;
};

inline constexpr std::size_t kDefaultQQPoints = 99;

// Group-wise quantiles at p_j = (j - 0.5) / m, j = 1..m. `w` empty means unweighted.
QQPairs qq_pairs(const CausalFrame& frame, const std::string& variable, std::span<const double> w = {},
                 std::size_t m = kDefaultQQPoints);
QQPairs qq_pairs(std::span<const double> values, const std::vector<int>& a, const std::string& variable,
                 std::span<const double> w = {}, std::size_t m = kDefaultQQPoints);

// Draws `size` units with replacement, probability proportional to w. The
// result's unit ids are the source ids suffixed with "#<draw index>".
CausalFrame pseudo_population(const CausalFrame& frame, std::span<const double> w, std::size_t size,
                              std::uint64_t seed);
std::vector<std::size_t> weighted_draws(std::span<const double> w, std::size_t size, std::uint64_t seed);

struct BalanceRecord {
  std::string name;
  double smd_before = 0.0;
  // One entry per weight set, in the order given to balance_table.
  std::vector<double> smd_after;
  double mean_treated = 0.0;
  double mean_control = 0.0;
  double sd_treated = 0.0;
  double sd_control = 0.0;
};

struct BalanceReport {
  std::vector<std::string> schemes;
  // Every confounder followed by a final record named "ps".
  std::vector<BalanceRecord> records;
  double threshold = kBalanceThreshold;
};

BalanceReport balance_table(const CausalFrame& frame, const PropensityResult& psr,
                            const std::vector<WeightSet>& weight_sets);

}  // namespace causalmatch
