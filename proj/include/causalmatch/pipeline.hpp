#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "causalmatch/dataset.hpp"
#include "causalmatch/propensity.hpp"

// End-to-end commands behind the causal-match tool. Each writes its
// artifacts into `out` and returns normally or throws causalmatch::Error.
namespace causalmatch::pipeline {

std::string version();

struct RunConfig {
  std::string input;
  std::string treatment;
  std::string outcome;
  std::vector<std::string> confounders;
  bool sqrt_treatment = false;
  // "median", "none", or a numeric threshold.
  std::string dichotomize = "median";
  bool per_date_median = false;
  std::optional<std::size_t> trim_border;
  std::string scheme = "ipw";
  bool with_replacement = true;
  std::optional<double> caliper;
  std::size_t n_strata = 5;
  std::size_t n_trials = 10;
  // 0 means every unit.
  std::size_t sample_size = 0;
  std::uint64_t seed = 0;
  std::string out = "out";
  std::vector<std::string> formats{"csv", "json"};
  std::size_t qq_points = 99;
  // 0 means 2n.
  std::size_t pseudo_population_size = 0;
  std::size_t threads = 0;
  bool svg_timestamp = false;

  void validate() const;
  bool wants(const std::string& format) const;

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
};

// Loads and prepares the frame: border trim, square-root transform, then dichotomization.
CausalFrame prepare_frame(const RunConfig& config);

struct SimulateOptions {
  std::optional<std::string> spec_path;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::string out = "out";
  bool with_potential = false;
};

// data.csv, truth.json, spec.json
void cmd_simulate(const SimulateOptions& options);

// config.json, effects.csv, balance.csv, qq_<var>.csv, weights.csv, report.json (+ svg)
void cmd_analyze(const RunConfig& config);

// Single full-sample balance diagnosis: balance.csv, qq_<var>.csv, weights.csv,
// pseudo_population.csv, balance.json (+ svg)
void cmd_balance(const RunConfig& config);

// strata.csv and strata.json (+ svg). Returns the one-line summary.
std::string cmd_simpson(const RunConfig& config, const std::string& confounder, std::size_t bins);

struct AppendixBOptions {
  std::size_t models = 20;
  std::uint64_t seed = 0;
  std::string out = "out";
};

struct AppendixBSummary {
  double balancing_max_violation = 0.0;
  double balancing_negative_control = 0.0;
  double independence_max_violation = 0.0;
  double independence_negative_control = 0.0;
  bool passed = false;
};

// appendix_b.json; passed when both propositions hold to 1e-12 and both
// negative controls show a violation above 0.01.
AppendixBSummary cmd_check_appendix_b(const AppendixBOptions& options);

// Machine-readable error body written on fatal failures.
std::string error_json(const std::string& kind, const std::string& message, int exit_code);

}  // namespace causalmatch::pipeline
