#include "causalmatch/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "causalmatch/balance.hpp"
#include "causalmatch/effects.hpp"
#include "causalmatch/error.hpp"
#include "causalmatch/report.hpp"
#include "causalmatch/rng.hpp"
#include "causalmatch/synth.hpp"

#ifndef CAUSALMATCH_VERSION
#define CAUSALMATCH_VERSION "0.0.0"
#endif

namespace causalmatch::pipeline {

namespace {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

// Stream for the pseudo-population draw, distinct from every trial index.
constexpr std::uint64_t kPseudoPopulationStream = 1'000'000;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::config, "cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::config, "cannot create output directory '" + dir + "': " + ec.message());
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
  std::ofstream out(fs::path(dir) / name, std::ios::binary);
  if (!out) throw Error(ErrorKind::config, "cannot write '" + (fs::path(dir) / name).string() + "'");
  return out;
}

void write_text(const std::string& dir, const std::string& name, const std::string& text) {
  auto out = open_out(dir, name);
  out << text;
}

std::string safe_name(std::string s) {
  for (auto& c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) c = '_';
  }
  return s;
}

std::string svg_stamp(const RunConfig& config) {
  if (!config.svg_timestamp) return {};
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  return "unix " + std::to_string(std::chrono::duration_cast<std::chrono::seconds>(now).count());
}

ordered_json effect_json(const EffectEstimate& e) {
  ordered_json j;
  j["estimator"] = to_string(e.estimator);
  j["estimate"] = e.estimate;
  j["se"] = e.se;
  j["ci_low"] = e.ci_low;
  j["ci_high"] = e.ci_high;
  j["n_used"] = e.n_used;
  if (e.df > 0.0) j["df"] = e.df;
  return j;
}

ordered_json balance_json(const BalanceReport& report) {
  ordered_json j;
  j["threshold"] = report.threshold;
  j["threshold_note"] = "conventional |SMD| < 0.1 cut-off";
  j["schemes"] = report.schemes;
  ordered_json records = ordered_json::array();
  for (const auto& r : report.records) {
    ordered_json rec;
    rec["variable"] = r.name;
    rec["smd_before"] = r.smd_before;
    rec["smd_after"] = r.smd_after;
    rec["mean_treated"] = r.mean_treated;
    rec["mean_control"] = r.mean_control;
    rec["sd_treated"] = r.sd_treated;
    rec["sd_control"] = r.sd_control;
    records.push_back(rec);
  }
  j["records"] = records;
  return j;
}

ordered_json log_json(const CausalFrame& frame) {
  ordered_json log = ordered_json::array();
  for (const auto& rec : frame.log) {
    ordered_json r;
    r["name"] = rec.name;
    r["column"] = rec.column;
    ordered_json params = ordered_json::object();
    for (const auto& [k, v] : rec.params) params[k] = v;
    r["params"] = params;
    log.push_back(r);
  }
  return log;
}

SchemeParams scheme_params(const RunConfig& config) {
  SchemeParams params;
  params.nn.with_replacement = config.with_replacement;
  params.nn.caliper = config.caliper;
  params.n_strata = config.n_strata;
  return params;
}

// Q-Q before and after weighting for every confounder and for ps.
void write_qq_files(const RunConfig& config, const CausalFrame& frame, const PropensityResult& psr,
                    const WeightSet& ws) {
  const std::span<const double> w(ws.w.data(), static_cast<std::size_t>(ws.w.size()));
  std::vector<std::pair<std::string, std::vector<double>>> variables;
  for (const auto& name : frame.confounder_names) variables.emplace_back(name, frame.column(name));
  variables.emplace_back("ps", std::vector<double>(psr.ps.data(), psr.ps.data() + psr.ps.size()));
  for (const auto& [name, values] : variables) {
    const auto before = qq_pairs(values, frame.a, name, {}, config.qq_points);
    const auto after = qq_pairs(values, frame.a, name, w, config.qq_points);
    if (config.wants("csv")) {
      auto out = open_out(config.out, "qq_" + safe_name(name) + ".csv");
      report::write_qq_csv(out, before, after);
    }
    if (config.wants("svg")) {
      write_text(config.out, "qq_" + safe_name(name) + ".svg", report::qq_svg(before, after, svg_stamp(config)));
    }
  }
}

}  // namespace

std::string version() { return CAUSALMATCH_VERSION; }

bool RunConfig::wants(const std::string& format) const {
  return std::find(formats.begin(), formats.end(), format) != formats.end();
}

void RunConfig::validate() const {
  if (input.empty()) throw Error(ErrorKind::config, "--input is required");
  if (treatment.empty()) throw Error(ErrorKind::config, "--treatment is required");
  if (outcome.empty()) throw Error(ErrorKind::config, "--outcome is required");
  if (confounders.empty()) throw Error(ErrorKind::config, "--confounders needs at least one column");
  if (n_trials < 1) throw Error(ErrorKind::config, "--trials must be at least 1");
  parse_scheme(scheme);
  if (n_strata < 2) throw Error(ErrorKind::config, "--strata must be at least 2");
  if (caliper && !(*caliper > 0.0)) throw Error(ErrorKind::config, "--caliper must be positive");
  if (qq_points < 2) throw Error(ErrorKind::config, "--qq-points must be at least 2");
  if (out.empty()) throw Error(ErrorKind::config, "--out is required");
  for (const auto& f : formats) {
    if (f != "csv" && f != "json" && f != "svg") {
      throw Error(ErrorKind::config, "unknown output format '" + f + "' (expected csv, json, svg)");
    }
  }
  if (dichotomize != "median" && dichotomize != "none") {
    char* end = nullptr;
    const double v = std::strtod(dichotomize.c_str(), &end);
    if (dichotomize.empty() || *end != '\0' || !std::isfinite(v)) {
      throw Error(ErrorKind::config, "--dichotomize must be 'median', 'none' or a number, got '" + dichotomize + "'");
    }
  }
}

std::string RunConfig::to_json() const {
  ordered_json j;
  j["input"] = input;
  j["treatment"] = treatment;
  j["outcome"] = outcome;
  j["confounders"] = confounders;
  j["sqrt_treatment"] = sqrt_treatment;
  j["dichotomize"] = dichotomize;
  j["per_date_median"] = per_date_median;
  j["trim_border"] = trim_border ? ordered_json(*trim_border) : ordered_json(nullptr);
  j["scheme"] = scheme;
  j["with_replacement"] = with_replacement;
  j["caliper"] = caliper ? ordered_json(*caliper) : ordered_json(nullptr);
  j["n_strata"] = n_strata;
  j["n_trials"] = n_trials;
  j["sample_size"] = sample_size;
  j["seed"] = seed;
  j["out"] = out;
  j["formats"] = formats;
  j["qq_points"] = qq_points;
  j["pseudo_population_size"] = pseudo_population_size;
  j["threads"] = threads;
  j["svg_timestamp"] = svg_timestamp;
  return j.dump(2);
}

RunConfig RunConfig::from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const ordered_json::parse_error& e) {
    throw Error(ErrorKind::config, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::config, "config must be a JSON object");
  RunConfig c;
  auto field = [&](const char* key, auto& target) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    try {
      j.at(key).get_to(target);
    } catch (const ordered_json::exception& e) {
      throw Error(ErrorKind::config, std::string("config field '") + key + "': " + e.what());
    }
  };
  static const char* known[] = {"input", "treatment", "outcome", "confounders", "sqrt_treatment", "dichotomize",
                                "per_date_median", "trim_border", "scheme", "with_replacement", "caliper",
                                "n_strata", "n_trials", "sample_size", "seed", "out", "formats", "qq_points",
                                "pseudo_population_size", "threads", "svg_timestamp"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw Error(ErrorKind::config, "config has unknown field '" + key + "'");
    }
  }
  field("input", c.input);
  field("treatment", c.treatment);
  field("outcome", c.outcome);
  field("confounders", c.confounders);
  field("sqrt_treatment", c.sqrt_treatment);
  field("dichotomize", c.dichotomize);
  field("per_date_median", c.per_date_median);
  if (j.contains("trim_border") && !j["trim_border"].is_null()) {
    std::size_t v = 0;
    field("trim_border", v);
    c.trim_border = v;
  }
  field("scheme", c.scheme);
  field("with_replacement", c.with_replacement);
  if (j.contains("caliper") && !j["caliper"].is_null()) {
    double v = 0.0;
    field("caliper", v);
    c.caliper = v;
  }
  field("n_strata", c.n_strata);
  field("n_trials", c.n_trials);
  field("sample_size", c.sample_size);
  field("seed", c.seed);
  field("out", c.out);
  field("formats", c.formats);
  field("qq_points", c.qq_points);
  field("pseudo_population_size", c.pseudo_population_size);
  field("threads", c.threads);
  field("svg_timestamp", c.svg_timestamp);
  return c;
}

CausalFrame prepare_frame(const RunConfig& config) {
  ColumnRoles roles{config.treatment, config.outcome, config.confounders};
  auto frame = load_csv(config.input, roles);
  if (config.trim_border) frame = trim_frame_border(frame, *config.trim_border);
  if (config.sqrt_treatment) frame = sqrt_transform(frame, config.treatment);
  if (config.dichotomize == "median") {
    if (!frame.has_binary_treatment() || config.sqrt_treatment) {
      frame = dichotomize_at_median(frame, config.treatment, config.per_date_median);
    }
  } else if (config.dichotomize != "none") {
    frame = dichotomize_at(frame, config.treatment, std::strtod(config.dichotomize.c_str(), nullptr));
  }
  return frame;
}

void cmd_simulate(const SimulateOptions& options) {
  const auto spec = options.spec_path ? ScmSpec::from_json(read_file(*options.spec_path)) : ScmSpec::default_spec();
  if (options.n < 1) throw Error(ErrorKind::config, "--n must be at least 1");
  ensure_dir(options.out);
  const auto pf = generate(spec, options.n, options.seed);
  {
    auto out = open_out(options.out, "data.csv");
    report::write_potential_frame_csv(out, pf, options.with_potential);
  }
  const auto analytic = analytic_effects(spec);
  ordered_json truth;
  truth["ate"] = analytic.ate;
  truth["att"] = analytic.att;
  truth["atc"] = analytic.atc;
  truth["pi"] = analytic.pi;
  truth["n"] = options.n;
  truth["seed"] = options.seed;
  const auto treated = pf.frame.n_treated();
  if (treated > 0 && treated < pf.n()) {
    const auto sample = true_effects(pf);
    truth["sample"] = {{"ate", sample.ate}, {"att", sample.att}, {"atc", sample.atc}, {"pi", sample.pi}};
  }
  write_text(options.out, "truth.json", truth.dump(2) + "\n");
  write_text(options.out, "spec.json", spec.to_json() + "\n");
}

void cmd_analyze(const RunConfig& config) {
  config.validate();
  const auto frame = prepare_frame(config);
  ensure_dir(config.out);
  write_text(config.out, "config.json", config.to_json() + "\n");

  TrialOptions options;
  options.n_trials = config.n_trials;
  options.sample_size = config.sample_size;
  options.seed = config.seed;
  options.scheme = parse_scheme(config.scheme);
  options.scheme_params = scheme_params(config);
  options.threads = config.threads;
  const auto trials = run_trials(frame, options);

  if (config.wants("csv")) {
    auto effects = open_out(config.out, "effects.csv");
    report::write_effects_header(effects);
    auto balance = open_out(config.out, "balance.csv");
    report::write_balance_header(balance);
    for (const auto& t : trials) {
      if (!t.ok) continue;
      report::write_effect_row(effects, t.naive);
      report::write_effect_row(effects, t.adjusted);
      report::write_effect_row(effects, t.matched);
      report::write_balance_rows(balance, t.balance, t.trial_index);
    }
  }

  // Diagnostics files for the first successful trial.
  const auto first = std::find_if(trials.begin(), trials.end(), [](const TrialResult& t) { return t.ok; });
  const auto size = config.sample_size == 0 ? frame.n() : config.sample_size;
  const auto sample = sample_units(frame, size, config.seed, first->trial_index);
  const auto psr = estimate_ps(sample);
  const auto ws = make_weights(options.scheme, psr, sample.a, options.scheme_params);
  write_qq_files(config, sample, psr, ws);
  if (config.wants("csv")) {
    auto out = open_out(config.out, "weights.csv");
    report::write_weights_csv(out, sample, psr, ws);
  }

  if (config.wants("svg")) {
    std::vector<BalanceReport> per_trial;
    for (const auto& t : trials) {
      if (t.ok) per_trial.push_back(t.balance);
    }
    write_text(config.out, "smd.svg", report::smd_svg(per_trial, svg_stamp(config)));
    write_text(config.out, "effects.svg", report::effects_svg(trials, svg_stamp(config)));
  }

  ordered_json rep;
  rep["library"] = "causalmatch";
  rep["version"] = version();
  rep["config"] = ordered_json::parse(config.to_json());
  rep["input"] = {{"rows", frame.n()},
                  {"rows_dropped", frame.rows_dropped},
                  {"n_treated", frame.n_treated()},
                  {"transform_log", log_json(frame)}};
  ordered_json trial_list = ordered_json::array();
  std::size_t ok = 0;
  bool naive_pos = true, adjusted_neg = true, matched_pos = true, matched_below = true;
  double sums[3] = {0.0, 0.0, 0.0};
  for (const auto& t : trials) {
    ordered_json tj;
    tj["trial_index"] = t.trial_index;
    tj["ok"] = t.ok;
    if (!t.ok) {
      tj["error"] = t.error;
    } else {
      ++ok;
      tj["naive"] = effect_json(t.naive);
      tj["adjusted"] = effect_json(t.adjusted);
      tj["matched"] = effect_json(t.matched);
      tj["ess_treated"] = t.ess_treated;
      tj["ess_control"] = t.ess_control;
      naive_pos = naive_pos && t.naive.estimate > 0.0;
      adjusted_neg = adjusted_neg && t.adjusted.estimate < 0.0;
      matched_pos = matched_pos && t.matched.estimate > 0.0;
      matched_below = matched_below && t.matched.estimate < t.naive.estimate;
      sums[0] += t.naive.estimate;
      sums[1] += t.adjusted.estimate;
      sums[2] += t.matched.estimate;
    }
    trial_list.push_back(tj);
  }
  rep["trials"] = trial_list;
  rep["summary"] = {{"successful_trials", ok},
                    {"failed_trials", trials.size() - ok},
                    {"mean_naive", sums[0] / static_cast<double>(ok)},
                    {"mean_adjusted", sums[1] / static_cast<double>(ok)},
                    {"mean_matched", sums[2] / static_cast<double>(ok)},
                    {"all_naive_positive", naive_pos},
                    {"all_adjusted_negative", adjusted_neg},
                    {"all_matched_positive", matched_pos},
                    {"all_matched_below_naive", matched_below}};
  rep["balance_first_trial"] = balance_json(first->balance);
  rep["weights_first_trial"] = {{"scheme", to_string(ws.scheme)},
                                {"estimand", ws.estimand},
                                {"ess_treated", ws.ess_treated},
                                {"ess_control", ws.ess_control}};
  rep["qq_points"] = config.qq_points;
  rep["qq_method"] = "weighted quantiles";
  rep["pseudo_population_size"] = config.pseudo_population_size == 0 ? 2 * sample.n() : config.pseudo_population_size;
  if (config.wants("json")) write_text(config.out, "report.json", rep.dump(2) + "\n");
}

void cmd_balance(const RunConfig& config) {
  config.validate();
  const auto frame = prepare_frame(config);
  ensure_dir(config.out);
  write_text(config.out, "config.json", config.to_json() + "\n");
  const auto size = config.sample_size == 0 ? frame.n() : config.sample_size;
  const auto sample = size == frame.n() ? frame : sample_units(frame, size, config.seed, 0);
  const auto psr = estimate_ps(sample);
  const auto scheme = parse_scheme(config.scheme);
  const auto ws = make_weights(scheme, psr, sample.a, scheme_params(config));
  const auto table = balance_table(sample, psr, {ws});
  write_qq_files(config, sample, psr, ws);

  const auto pp_size = config.pseudo_population_size == 0 ? 2 * sample.n() : config.pseudo_population_size;
  const std::span<const double> w(ws.w.data(), static_cast<std::size_t>(ws.w.size()));
  const auto pseudo = pseudo_population(sample, w, pp_size, derive_seed(config.seed, kPseudoPopulationStream));

  if (config.wants("csv")) {
    auto balance = open_out(config.out, "balance.csv");
    report::write_balance_header(balance);
    report::write_balance_rows(balance, table, 0);
    auto weights = open_out(config.out, "weights.csv");
    report::write_weights_csv(weights, sample, psr, ws);
    auto pp = open_out(config.out, "pseudo_population.csv");
    report::write_frame_csv(pp, pseudo);
  }
  if (config.wants("svg")) write_text(config.out, "smd.svg", report::smd_svg({table}, svg_stamp(config)));
  if (config.wants("json")) {
    ordered_json j;
    j["version"] = version();
    j["config"] = ordered_json::parse(config.to_json());
    j["balance"] = balance_json(table);
    ordered_json pseudo_smd = ordered_json::object();
    for (const auto& rec : table.records) {
      if (rec.name == "ps") continue;
      // Unweighted SMD inside the pseudo-population, on the source sample's pooled SD.
      const auto values = pseudo.column(rec.name);
      double sum[2] = {0, 0};
      std::size_t count[2] = {0, 0};
      for (std::size_t i = 0; i < values.size(); ++i) {
        sum[pseudo.a[i]] += values[i];
        ++count[pseudo.a[i]];
      }
      const double pooled = std::sqrt(0.5 * (rec.sd_treated * rec.sd_treated + rec.sd_control * rec.sd_control));
      pseudo_smd[rec.name] =
          count[0] > 0 && count[1] > 0
              ? ordered_json((sum[1] / static_cast<double>(count[1]) - sum[0] / static_cast<double>(count[0])) / pooled)
              : ordered_json(nullptr);
    }
    j["pseudo_population"] = {{"size", pp_size}, {"smd", pseudo_smd}};
    j["weights"] = {{"scheme", to_string(ws.scheme)},
                    {"estimand", ws.estimand},
                    {"ess_treated", ws.ess_treated},
                    {"ess_control", ws.ess_control}};
    write_text(config.out, "balance.json", j.dump(2) + "\n");
  }
}

std::string cmd_simpson(const RunConfig& config, const std::string& confounder, std::size_t bins) {
  RunConfig prepared = config;
  prepared.dichotomize = "none";
  if (prepared.input.empty() || prepared.treatment.empty() || prepared.outcome.empty() || prepared.confounders.empty()) {
    prepared.validate();
  }
  if (bins < 1) throw Error(ErrorKind::config, "--bins must be at least 1");
  ColumnRoles roles{prepared.treatment, prepared.outcome, prepared.confounders};
  auto frame = load_csv(prepared.input, roles);
  if (prepared.trim_border) frame = trim_frame_border(frame, *prepared.trim_border);
  if (prepared.sqrt_treatment) frame = sqrt_transform(frame, prepared.treatment);
  const auto slopes = simpson_strata(frame, confounder, bins);

  ensure_dir(config.out);
  if (config.wants("csv")) {
    auto out = open_out(config.out, "strata.csv");
    report::write_strata_csv(out, slopes);
  }
  if (config.wants("svg")) write_text(config.out, "strata.svg", report::strata_svg(slopes, svg_stamp(config)));

  std::ostringstream summary;
  summary << "marginal slope " << report::format_number(slopes.marginal.slope) << "; " << slopes.reversed_count
          << " of " << slopes.strata.size() << " strata reverse its sign"
          << (slopes.all_reversed() ? " (reversal in every stratum)" : "");
  if (config.wants("json")) {
    ordered_json j;
    j["version"] = version();
    j["confounder"] = confounder;
    j["requested_bins"] = bins;
    j["strata"] = slopes.strata.size();
    j["marginal_slope"] = slopes.marginal.slope;
    j["reversed_strata"] = slopes.reversed_count;
    j["all_reversed"] = slopes.all_reversed();
    j["summary"] = summary.str();
    write_text(config.out, "strata.json", j.dump(2) + "\n");
  }
  return summary.str();
}

AppendixBSummary cmd_check_appendix_b(const AppendixBOptions& options) {
  if (options.models < 1) throw Error(ErrorKind::config, "--models must be at least 1");
  AppendixBSummary s;
  s.balancing_negative_control = 0.0;
  s.independence_negative_control = 0.0;
  ordered_json models = ordered_json::array();
  for (std::size_t m = 0; m < options.models; ++m) {
    Rng rng(derive_seed(options.seed, m));
    const auto dm = random_discrete_model(rng, 2);
    const auto a1 = check_balancing_property(dm);
    const auto a2 = check_outcome_independence(dm);
    // Coarsened score: x1 alone, which does not determine the propensity.
    std::vector<double> coarse;
    for (const auto& pt : dm.support) coarse.push_back(pt.x[0]);
    const auto a1_neg = check_balancing_property(dm, coarse);
    const auto bad = unignorable_discrete_model(rng, 2);
    const auto a2_neg = check_outcome_independence(bad);
    s.balancing_max_violation = std::max(s.balancing_max_violation, a1.max_violation);
    s.independence_max_violation = std::max(s.independence_max_violation, a2.max_violation);
    s.balancing_negative_control = m == 0 ? a1_neg.max_violation : std::min(s.balancing_negative_control, a1_neg.max_violation);
    s.independence_negative_control =
        m == 0 ? a2_neg.max_violation : std::min(s.independence_negative_control, a2_neg.max_violation);
    models.push_back({{"model", m},
                      {"balancing_violation", a1.max_violation},
                      {"balancing_strata", a1.strata},
                      {"independence_violation", a2.max_violation},
                      {"coarse_score_violation", a1_neg.max_violation},
                      {"unignorable_violation", a2_neg.max_violation}});
  }
  s.passed = s.balancing_max_violation <= 1e-12 && s.independence_max_violation <= 1e-12 &&
             s.balancing_negative_control > 0.01 && s.independence_negative_control > 0.01;
  ensure_dir(options.out);
  ordered_json j;
  j["version"] = version();
  j["models"] = options.models;
  j["seed"] = options.seed;
  j["balancing_max_violation"] = s.balancing_max_violation;
  j["independence_max_violation"] = s.independence_max_violation;
  j["min_negative_control_balancing"] = s.balancing_negative_control;
  j["min_negative_control_independence"] = s.independence_negative_control;
  j["passed"] = s.passed;
  j["per_model"] = models;
  write_text(options.out, "appendix_b.json", j.dump(2) + "\n");
  return s;
}

std::string error_json(const std::string& kind, const std::string& message, int exit_code) {
  ordered_json j;
  j["error"] = kind;
  j["message"] = message;
  j["exit_code"] = exit_code;
  return j.dump(2);
}

}  // namespace causalmatch::pipeline
