#include "causalmatch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <json.hpp>

#include "causalmatch/error.hpp"
#include "causalmatch/normal.hpp"

namespace causalmatch {

namespace {

using nlohmann::json;

std::size_t line_of(const std::string& text, std::size_t byte) {
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(std::min(byte, text.size())), '\n'));
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::config, std::string("spec field '") + key + "': " + e.what());
  }
}

void check_size(const std::vector<double>& v, std::size_t expected, const char* name) {
  if (v.size() != expected) {
    throw Error(ErrorKind::config, std::string("spec field '") + name + "' has " + std::to_string(v.size()) +
                                       " entries, expected " + std::to_string(expected));
  }
}

bool finite_all(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double d) { return std::isfinite(d); });
}

}  // namespace

ScmSpec ScmSpec::default_spec() {
  ScmSpec spec;
  spec.k = 3;
  spec.gamma = {0.0, 0.5, -0.4, 0.3};
  spec.intercept = 1.0;
  spec.tau = 2.0;
  spec.main_effects = {1.5, -1.0, 2.0};
  spec.interactions = {0.5, 0.0, -0.3};
  spec.noise_sd = 1.0;
  spec.normalize();
  return spec;
}

void ScmSpec::normalize() {
  if (x_mean.empty()) x_mean.assign(k, 0.0);
  if (x_sd.empty()) x_sd.assign(k, 1.0);
  if (gamma.empty()) gamma.assign(k + 1, 0.0);
  if (main_effects.empty()) main_effects.assign(k, 0.0);
  if (interactions.empty()) interactions.assign(k, 0.0);
  validate();
}

void ScmSpec::validate() const {
  if (k < 1) throw Error(ErrorKind::config, "spec field 'k' must be at least 1");
  check_size(x_mean, k, "x_mean");
  check_size(x_sd, k, "x_sd");
  check_size(gamma, k + 1, "gamma");
  check_size(main_effects, k, "main_effects");
  check_size(interactions, k, "interactions");
  if (!(noise_sd >= 0.0)) throw Error(ErrorKind::config, "spec field 'noise_sd' must be nonnegative");
  if (std::any_of(x_sd.begin(), x_sd.end(), [](double s) { return !(s >= 0.0); })) {
    throw Error(ErrorKind::config, "spec field 'x_sd' must be nonnegative");
  }
  if (!finite_all(x_mean) || !finite_all(gamma) || !finite_all(main_effects) || !finite_all(interactions) ||
      !std::isfinite(intercept) || !std::isfinite(tau)) {
    throw Error(ErrorKind::config, "spec contains non-finite parameters");
  }
}

ScmSpec ScmSpec::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::config, "spec is not valid JSON at line " + std::to_string(line_of(text, e.byte)) + ": " +
                                       e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::config, "spec must be a JSON object");
  static const char* known[] = {"k", "x_mean", "x_sd", "gamma", "intercept", "tau",
                                "main_effects", "interactions", "noise_sd"};
  for (const auto& [key, _] : j.items()) {
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw Error(ErrorKind::config, "spec has unknown field '" + key + "'");
    }
  }
  ScmSpec spec;
  spec.k = 0;
  read_field(j, "k", spec.k);
  read_field(j, "x_mean", spec.x_mean);
  read_field(j, "x_sd", spec.x_sd);
  read_field(j, "gamma", spec.gamma);
  read_field(j, "intercept", spec.intercept);
  read_field(j, "tau", spec.tau);
  read_field(j, "main_effects", spec.main_effects);
  read_field(j, "interactions", spec.interactions);
  read_field(j, "noise_sd", spec.noise_sd);
  if (!j.contains("k")) {
    if (!spec.gamma.empty()) spec.k = spec.gamma.size() - 1;
    else if (!spec.main_effects.empty()) spec.k = spec.main_effects.size();
    else throw Error(ErrorKind::config, "spec must give 'k' or 'gamma'");
  }
  spec.normalize();
  return spec;
}

std::string ScmSpec::to_json() const {
  json j;
  j["k"] = k;
  j["x_mean"] = x_mean;
  j["x_sd"] = x_sd;
  j["gamma"] = gamma;
  j["intercept"] = intercept;
  j["tau"] = tau;
  j["main_effects"] = main_effects;
  j["interactions"] = interactions;
  j["noise_sd"] = noise_sd;
  return j.dump(2);
}

void PotentialFrame::validate() const {
  frame.validate(true);
  if (y0.size() != frame.n() || y1.size() != frame.n()) {
    throw Error(ErrorKind::dimension, "potential outcome columns have the wrong length");
  }
  for (std::size_t i = 0; i < frame.n(); ++i) {
    const double expected = frame.a[i] == 1 ? y1[i] : y0[i];
    if (frame.y[i] != expected) throw Error(ErrorKind::data, "consistency fails at unit " + std::to_string(i));
  }
}

PotentialFrame generate(const ScmSpec& input, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorKind::size, "n must be at least 1");
  ScmSpec spec = input;
  spec.normalize();
  Rng rng(seed);
  const auto k = spec.k;

  PotentialFrame pf;
  auto& f = pf.frame;
  f.treatment_name = "a";
  f.outcome_name = "y";
  for (std::size_t j = 0; j < k; ++j) f.confounder_names.push_back("x" + std::to_string(j + 1));
  f.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  f.a.resize(n);
  f.treatment.resize(n);
  f.y.resize(n);
  f.unit_ids.resize(n);
  pf.y0.resize(n);
  pf.y1.resize(n);

  for (std::size_t i = 0; i < n; ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    double eta = spec.gamma[0];
    double y0 = spec.intercept;
    double effect = spec.tau;
    for (std::size_t j = 0; j < k; ++j) {
      const double xv = spec.x_mean[j] + spec.x_sd[j] * rng.normal();
      f.x(row, static_cast<Eigen::Index>(j)) = xv;
      eta += spec.gamma[j + 1] * xv;
      y0 += spec.main_effects[j] * xv;
      effect += spec.interactions[j] * xv;
    }
    const int a = rng.bernoulli(normal::cdf(eta)) ? 1 : 0;
    y0 += spec.noise_sd * rng.normal();
    pf.y0[i] = y0;
    pf.y1[i] = y0 + effect;
    f.a[i] = a;
    f.treatment[i] = a;
    f.y[i] = a == 1 ? pf.y1[i] : pf.y0[i];
    f.unit_ids[i] = std::to_string(i);
  }
  return pf;
}

PotentialFrame make_potential_frame(std::vector<int> a, std::vector<double> y0, std::vector<double> y1,
                                    Eigen::MatrixXd x) {
  const auto n = a.size();
  if (y0.size() != n || y1.size() != n) throw Error(ErrorKind::dimension, "potential outcome length mismatch");
  PotentialFrame pf;
  auto& f = pf.frame;
  if (x.size() == 0) x = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), 1);
  for (Eigen::Index j = 0; j < x.cols(); ++j) f.confounder_names.push_back("x" + std::to_string(j + 1));
  f.x = std::move(x);
  f.y.resize(n);
  f.treatment.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    f.y[i] = a[i] == 1 ? y1[i] : y0[i];
    f.treatment[i] = a[i];
    f.unit_ids.push_back(std::to_string(i));
  }
  f.a = std::move(a);
  pf.y0 = std::move(y0);
  pf.y1 = std::move(y1);
  return pf;
}

Effects true_effects(const PotentialFrame& pf) {
  const auto& a = pf.frame.a;
  const auto n = a.size();
  double sum = 0.0, sum_t = 0.0, sum_c = 0.0;
  std::size_t treated = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = pf.y1[i] - pf.y0[i];
    sum += d;
    if (a[i] == 1) {
      sum_t += d;
      ++treated;
    } else {
      sum_c += d;
    }
  }
  if (treated == 0 || treated == n) throw Error(ErrorKind::positivity, "potential frame has a single class");
  Effects e;
  e.ate = sum / static_cast<double>(n);
  e.att = sum_t / static_cast<double>(treated);
  e.atc = sum_c / static_cast<double>(n - treated);
  e.pi = static_cast<double>(treated) / static_cast<double>(n);
  return e;
}

AnalyticMoments analytic_moments(const ScmSpec& input) {
  ScmSpec spec = input;
  spec.normalize();
  // eta = gamma_0 + gamma' X ~ N(m, s^2); P(A=1) = Phi(m / sqrt(1 + s^2)) and
  // by Stein's lemma Cov(X_j, Phi(eta)) = gamma_j sd_j^2 phi(c) / sqrt(1 + s^2).
  double m = spec.gamma[0];
  double s2 = 0.0;
  for (std::size_t j = 0; j < spec.k; ++j) {
    m += spec.gamma[j + 1] * spec.x_mean[j];
    s2 += spec.gamma[j + 1] * spec.gamma[j + 1] * spec.x_sd[j] * spec.x_sd[j];
  }
  const double root = std::sqrt(1.0 + s2);
  const double c = m / root;
  AnalyticMoments out;
  out.pi = normal::cdf(c);
  const double density = normal::pdf(c) / root;
  for (std::size_t j = 0; j < spec.k; ++j) {
    const double cov = spec.gamma[j + 1] * spec.x_sd[j] * spec.x_sd[j] * density;
    out.mean_treated.push_back(spec.x_mean[j] + cov / out.pi);
    out.mean_control.push_back(spec.x_mean[j] - cov / (1.0 - out.pi));
  }
  return out;
}

Effects analytic_effects(const ScmSpec& input) {
  ScmSpec spec = input;
  spec.normalize();
  const auto moments = analytic_moments(spec);
  Effects e;
  e.pi = moments.pi;
  e.ate = e.att = e.atc = spec.tau;
  for (std::size_t j = 0; j < spec.k; ++j) {
    e.ate += spec.interactions[j] * spec.x_mean[j];
    e.att += spec.interactions[j] * moments.mean_treated[j];
    e.atc += spec.interactions[j] * moments.mean_control[j];
  }
  return e;
}

void DiscreteModel::validate() const {
  if (support.empty()) throw Error(ErrorKind::config, "discrete model has no support points");
  double total = 0.0;
  for (const auto& pt : support) {
    if (!(pt.prob >= 0.0 && pt.prob <= 1.0)) throw Error(ErrorKind::config, "support probability outside [0,1]");
    if (!(pt.p_treat >= 0.0 && pt.p_treat <= 1.0)) throw Error(ErrorKind::config, "treatment probability outside [0,1]");
    total += pt.prob;
    double cells = 0.0;
    for (const auto& c : pt.outcomes) {
      if (!(c.prob >= 0.0 && c.prob <= 1.0)) throw Error(ErrorKind::config, "outcome probability outside [0,1]");
      if (c.p_treat && !(*c.p_treat >= 0.0 && *c.p_treat <= 1.0)) {
        throw Error(ErrorKind::config, "cell treatment probability outside [0,1]");
      }
      cells += c.prob;
    }
    if (!pt.outcomes.empty() && std::fabs(cells - 1.0) > 1e-12) {
      throw Error(ErrorKind::config, "outcome probabilities of a support point do not sum to 1");
    }
  }
  if (std::fabs(total - 1.0) > 1e-12) throw Error(ErrorKind::config, "support probabilities do not sum to 1");
}

double DiscreteModel::propensity(std::size_t i) const {
  const auto& pt = support[i];
  if (pt.outcomes.empty()) return pt.p_treat;
  double p = 0.0;
  for (const auto& c : pt.outcomes) p += c.prob * c.p_treat.value_or(pt.p_treat);
  return p;
}

namespace {

// Support indices grouped by score within kScoreTieTolerance, ordered by score.
std::vector<std::vector<std::size_t>> strata_by_score(const std::vector<double>& score) {
  std::vector<std::size_t> order(score.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto l, auto r) { return score[l] < score[r]; });
  std::vector<std::vector<std::size_t>> strata;
  for (auto i : order) {
    if (strata.empty() || score[i] - score[strata.back().front()] > kScoreTieTolerance) strata.emplace_back();
    strata.back().push_back(i);
  }
  return strata;
}

}  // namespace

PropertyReport check_balancing_property(const DiscreteModel& dm, std::span<const double> score) {
  dm.validate();
  const auto m = dm.support.size();
  std::vector<double> p(m), s(m);
  for (std::size_t i = 0; i < m; ++i) {
    p[i] = dm.propensity(i);
    s[i] = score.empty() ? p[i] : score[i];
  }
  if (!score.empty() && score.size() != m) throw Error(ErrorKind::dimension, "score length mismatch");

  PropertyReport report;
  for (const auto& stratum : strata_by_score(s)) {
    double treated = 0.0, control = 0.0;
    for (auto i : stratum) {
      treated += dm.support[i].prob * p[i];
      control += dm.support[i].prob * (1.0 - p[i]);
    }
    if (treated <= 0.0 || control <= 0.0) {
      ++report.excluded_strata;
      report.notes.push_back("stratum at score " + std::to_string(s[stratum.front()]) +
                             " has pr(A=1|score) in {0,1}; conditional undefined, excluded");
      continue;
    }
    ++report.strata;
    for (auto i : stratum) {
      const double given_treated = dm.support[i].prob * p[i] / treated;
      const double given_control = dm.support[i].prob * (1.0 - p[i]) / control;
      report.max_violation = std::max(report.max_violation, std::fabs(given_treated - given_control));
    }
  }
  return report;
}

PropertyReport check_outcome_independence(const DiscreteModel& dm) {
  dm.validate();
  const auto m = dm.support.size();
  std::vector<double> p(m);
  for (std::size_t i = 0; i < m; ++i) p[i] = dm.propensity(i);

  PropertyReport report;
  for (const auto& stratum : strata_by_score(p)) {
    double mass = 0.0, treated = 0.0;
    // (y0, y1) -> (pr(A=1, v, stratum), pr(v, stratum))
    std::map<std::pair<double, double>, std::pair<double, double>> by_value;
    for (auto i : stratum) {
      const auto& pt = dm.support[i];
      mass += pt.prob;
      treated += pt.prob * p[i];
      for (const auto& c : pt.outcomes) {
        auto& acc = by_value[{c.y0, c.y1}];
        acc.first += pt.prob * c.prob * c.p_treat.value_or(pt.p_treat);
        acc.second += pt.prob * c.prob;
      }
    }
    if (!(mass > 0.0)) continue;
    const double baseline = treated / mass;
    if (baseline <= 0.0 || baseline >= 1.0) {
      ++report.excluded_strata;
      report.notes.push_back("stratum at p = " + std::to_string(p[stratum.front()]) +
                             " has pr(A=1|p) in {0,1}; conditional undefined, excluded");
      continue;
    }
    ++report.strata;
    for (const auto& [value, acc] : by_value) {
      if (!(acc.second > 0.0)) continue;
      report.max_violation = std::max(report.max_violation, std::fabs(acc.first / acc.second - baseline));
    }
  }
  return report;
}

namespace {

std::vector<std::vector<int>> binary_support(std::size_t dims) {
  std::vector<std::vector<int>> out;
  for (std::size_t code = 0; code < (std::size_t{1} << dims); ++code) {
    std::vector<int> x(dims);
    for (std::size_t d = 0; d < dims; ++d) x[d] = static_cast<int>((code >> d) & 1U);
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<double> random_simplex(Rng& rng, std::size_t size) {
  std::vector<double> v(size);
  double total = 0.0;
  for (auto& e : v) {
    e = 0.05 + rng.uniform();
    total += e;
  }
  for (auto& e : v) e /= total;
  // Absorb rounding in the last entry so the probabilities sum to 1 in floating point.
  double head = 0.0;
  for (std::size_t i = 0; i + 1 < size; ++i) head += v[i];
  v.back() = 1.0 - head;
  return v;
}

}  // namespace

DiscreteModel random_discrete_model(Rng& rng, std::size_t dims, std::size_t cells_per_point, bool tie_pairs) {
  DiscreteModel dm;
  const auto points = binary_support(dims);
  const auto probs = random_simplex(rng, points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    SupportPoint pt;
    pt.x = points[i];
    pt.prob = probs[i];
    pt.p_treat = (tie_pairs && i % 2 == 1) ? dm.support.back().p_treat : 0.05 + 0.9 * rng.uniform();
    const auto cell_probs = random_simplex(rng, cells_per_point);
    for (std::size_t c = 0; c < cells_per_point; ++c) {
      // Small integer-valued outcomes so equal values recur across support points.
      const double y0 = static_cast<double>(rng.uniform_index(3));
      const double y1 = y0 + static_cast<double>(rng.uniform_index(3));
      pt.outcomes.push_back({y0, y1, cell_probs[c], std::nullopt});
    }
    dm.support.push_back(std::move(pt));
  }
  return dm;
}

DiscreteModel unignorable_discrete_model(Rng& rng, std::size_t dims) {
  DiscreteModel dm = random_discrete_model(rng, dims, 2, true);
  for (auto& pt : dm.support) {
    pt.outcomes[0] = {0.0, 1.0, pt.outcomes[0].prob, 0.2};
    pt.outcomes[1] = {1.0, 3.0, pt.outcomes[1].prob, 0.8};
  }
  return dm;
}

}  // namespace causalmatch
