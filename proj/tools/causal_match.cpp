#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "causalmatch/error.hpp"
#include "causalmatch/pipeline.hpp"

namespace cm = causalmatch;
namespace pl = causalmatch::pipeline;

namespace {

struct Flags {
  std::string config_path;
  std::string input, treatment, outcome, scheme, out, dichotomize;
  std::vector<std::string> confounders, formats;
  std::size_t trials = 0, sample_size = 0, n_strata = 0, trim = 0, qq_points = 0, pseudo_size = 0, threads = 0;
  std::uint64_t seed = 0;
  double caliper = 0.0;
  bool sqrt_treatment = false, per_date = false, without_replacement = false, svg_timestamp = false;
};

void add_run_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config_path, "JSON run configuration; flags given on the command line override it");
  cmd->add_option("--input", f.input, "input CSV");
  cmd->add_option("--treatment", f.treatment, "treatment column");
  cmd->add_option("--outcome", f.outcome, "outcome column");
  cmd->add_option("--confounders", f.confounders, "confounder columns")->delimiter(',');
  cmd->add_option("--scheme", f.scheme, "ipw|nn|subclass");
  cmd->add_option("--trials", f.trials, "number of subsampling trials");
  cmd->add_option("--sample-size", f.sample_size, "units per trial (0 = all)");
  cmd->add_option("--seed", f.seed, "master seed");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--format", f.formats, "csv,json,svg")->delimiter(',');
  cmd->add_flag("--sqrt-treatment", f.sqrt_treatment, "square-root the treatment before dichotomizing");
  cmd->add_option("--dichotomize", f.dichotomize, "median|none|<value>");
  cmd->add_flag("--per-date-median", f.per_date, "median per date instead of pooled");
  cmd->add_option("--trim-border", f.trim, "drop this many grid cells from every border");
  cmd->add_option("--caliper", f.caliper, "nn caliper in SD units of the linear predictor");
  cmd->add_flag("--without-replacement", f.without_replacement, "nn matching without replacement");
  cmd->add_option("--strata", f.n_strata, "subclassification strata");
  cmd->add_option("--qq-points", f.qq_points, "probability points per Q-Q panel");
  cmd->add_option("--pseudo-population-size", f.pseudo_size, "weighted draws (0 = 2n)");
  cmd->add_option("--threads", f.threads, "worker threads (0 = automatic)");
  cmd->add_flag("--svg-timestamp", f.svg_timestamp, "stamp SVG files with the creation time");
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw cm::Error(cm::ErrorKind::config, "cannot open config '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

pl::RunConfig build_config(const CLI::App* cmd, const Flags& f) {
  pl::RunConfig c = f.config_path.empty() ? pl::RunConfig{} : pl::RunConfig::from_json(slurp(f.config_path));
  auto given = [&](const char* name) { return cmd->count(name) > 0; };
  if (given("--input")) c.input = f.input;
  if (given("--treatment")) c.treatment = f.treatment;
  if (given("--outcome")) c.outcome = f.outcome;
  if (given("--confounders")) c.confounders = f.confounders;
  if (given("--scheme")) c.scheme = f.scheme;
  if (given("--trials")) c.n_trials = f.trials;
  if (given("--sample-size")) c.sample_size = f.sample_size;
  if (given("--seed")) c.seed = f.seed;
  if (given("--out")) c.out = f.out;
  if (given("--format")) c.formats = f.formats;
  if (given("--sqrt-treatment")) c.sqrt_treatment = f.sqrt_treatment;
  if (given("--dichotomize")) c.dichotomize = f.dichotomize;
  if (given("--per-date-median")) c.per_date_median = f.per_date;
  if (given("--trim-border")) c.trim_border = f.trim;
  if (given("--caliper")) c.caliper = f.caliper;
  if (given("--without-replacement")) c.with_replacement = !f.without_replacement;
  if (given("--strata")) c.n_strata = f.n_strata;
  if (given("--qq-points")) c.qq_points = f.qq_points;
  if (given("--pseudo-population-size")) c.pseudo_population_size = f.pseudo_size;
  if (given("--threads")) c.threads = f.threads;
  if (given("--svg-timestamp")) c.svg_timestamp = f.svg_timestamp;
  return c;
}

int fail(const std::string& kind, const std::string& message, int code, const std::string& out_dir) {
  const auto body = pl::error_json(kind, message, code);
  std::cerr << body << "\n";
  if (!out_dir.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (!ec) std::ofstream(std::filesystem::path(out_dir) / "error.json") << body << "\n";
  }
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Propensity-score matching, balance diagnostics and g-computation for gridded data", "causal-match"};
  app.set_version_flag("--version", pl::version());
  app.require_subcommand(1);

  pl::SimulateOptions sim;
  std::string sim_spec;
  auto* simulate = app.add_subcommand("simulate", "write a synthetic frame with known effects");
  simulate->add_option("--spec", sim_spec, "JSON structural model (default built-in)");
  simulate->add_option("--n", sim.n, "units");
  simulate->add_option("--seed", sim.seed, "seed");
  simulate->add_option("--out", sim.out, "output directory");
  simulate->add_flag("--with-potential", sim.with_potential, "add y0 and y1 columns");

  Flags analyze_flags, balance_flags, simpson_flags;
  auto* analyze = app.add_subcommand("analyze", "estimate, weight, match and report over subsampling trials");
  add_run_flags(analyze, analyze_flags);
  auto* balance = app.add_subcommand("balance", "full-sample balance diagnostics for one scheme");
  add_run_flags(balance, balance_flags);
  auto* simpson = app.add_subcommand("simpson", "treatment-outcome slopes within quantile bins of a confounder");
  add_run_flags(simpson, simpson_flags);
  std::string stratify_by;
  std::size_t bins = 50;
  simpson->add_option("--by", stratify_by, "confounder to stratify on")->required();
  simpson->add_option("--bins", bins, "quantile bins");

  pl::AppendixBOptions appendix;
  auto* check = app.add_subcommand("check-appendix-b", "exact checks of the balancing and ignorability propositions");
  check->add_option("--models", appendix.models, "random discrete models");
  check->add_option("--seed", appendix.seed, "seed");
  check->add_option("--out", appendix.out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return fail("config", e.what(), cm::exit_code(cm::ErrorKind::config), {});
  }

  std::string out_dir;
  try {
    if (simulate->parsed()) {
      out_dir = sim.out;
      if (!sim_spec.empty()) sim.spec_path = sim_spec;
      pl::cmd_simulate(sim);
    } else if (analyze->parsed()) {
      auto config = build_config(analyze, analyze_flags);
      out_dir = config.out;
      pl::cmd_analyze(config);
    } else if (balance->parsed()) {
      auto config = build_config(balance, balance_flags);
      out_dir = config.out;
      pl::cmd_balance(config);
    } else if (simpson->parsed()) {
      auto config = build_config(simpson, simpson_flags);
      out_dir = config.out;
      std::cout << pl::cmd_simpson(config, stratify_by, bins) << "\n";
    } else if (check->parsed()) {
      out_dir = appendix.out;
      const auto s = pl::cmd_check_appendix_b(appendix);
      std::cout << "balancing property max violation " << s.balancing_max_violation << ", outcome independence max violation "
                << s.independence_max_violation << ": " << (s.passed ? "PASS" : "FAIL") << "\n";
      return s.passed ? 0 : 4;
    }
  } catch (const cm::Error& e) {
    return fail(cm::to_string(e.kind()), e.what(), cm::exit_code(e.kind()), out_dir);
  } catch (const std::exception& e) {
    return fail("numerical", e.what(), 4, out_dir);
  }
  return 0;
}
