#include "causalmatch/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "causalmatch/error.hpp"
#include "causalmatch/normal.hpp"

namespace causalmatch {

namespace {

void check_groups(const std::vector<int>& a, Eigen::Index n) {
  if (static_cast<Eigen::Index>(a.size()) != n) throw Error(ErrorKind::dimension, "treatment length mismatch");
  const auto treated = std::count(a.begin(), a.end(), 1);
  if (treated == 0 || treated == static_cast<std::ptrdiff_t>(a.size())) {
    throw Error(ErrorKind::positivity, "both treatment groups must be nonempty");
  }
}

void finish(WeightSet& ws, const std::vector<int>& a) {
  ws.ess_treated = kish_ess(ws.w, a, 1);
  ws.ess_control = kish_ess(ws.w, a, 0);
  double treated = 0.0, control = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) (a[i] == 1 ? treated : control) += ws.w(static_cast<Eigen::Index>(i));
  if (!(treated > 0.0) || !(control > 0.0)) {
    throw Error(ErrorKind::empty_match, "weights leave a treatment group with zero total weight");
  }
}

std::vector<bool> common_support(const Eigen::VectorXd& ps, const std::vector<int>& a) {
  double lo[2] = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  double hi[2] = {-std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double v = ps(static_cast<Eigen::Index>(i));
    lo[a[i]] = std::min(lo[a[i]], v);
    hi[a[i]] = std::max(hi[a[i]], v);
  }
  std::vector<bool> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int other = 1 - a[i];
    const double v = ps(static_cast<Eigen::Index>(i));
    out[i] = v >= lo[other] && v <= hi[other];
  }
  return out;
}

double type7_quantile(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

const char* to_string(WeightScheme scheme) {
  switch (scheme) {
    case WeightScheme::ipw: return "ipw";
    case WeightScheme::nn: return "nn";
    case WeightScheme::subclass: return "subclass";
  }
  return "unknown";
}

WeightScheme parse_scheme(const std::string& name) {
  if (name == "ipw") return WeightScheme::ipw;
  if (name == "nn") return WeightScheme::nn;
  if (name == "subclass") return WeightScheme::subclass;
  throw Error(ErrorKind::config, "unknown weighting scheme '" + name + "' (expected ipw, nn or subclass)");
}

DesignMatrix treatment_design(const CausalFrame& frame) {
  const auto n = static_cast<Eigen::Index>(frame.n());
  Eigen::MatrixXd values(n, frame.x.cols() + 1);
  values.col(0).setOnes();
  values.rightCols(frame.x.cols()) = frame.x;
  std::vector<std::string> labels{"(Intercept)"};
  labels.insert(labels.end(), frame.confounder_names.begin(), frame.confounder_names.end());
  return DesignMatrix(std::move(values), std::move(labels));
}

PropensityResult estimate_ps(const CausalFrame& frame, const ProbitOptions& options) {
  frame.validate(true);
  const auto design = treatment_design(frame);
  PropensityResult out;
  out.treatment_fit = fit_probit(design, frame.a, options);
  if (!out.treatment_fit.converged) {
    throw Error(ErrorKind::numerical, "treatment model did not converge in " +
                                          std::to_string(out.treatment_fit.iterations) + " iterations");
  }
  out.linear_predictor = design.values * out.treatment_fit.coefficients;
  out.ps = predict_probit(out.treatment_fit, design);
  out.common_support = common_support(out.ps, frame.a);
  return out;
}

PropensityResult propensity_from_scores(const Eigen::VectorXd& ps, const std::vector<int>& a) {
  check_groups(a, ps.size());
  PropensityResult out;
  out.ps = ps.unaryExpr([](double v) { return std::clamp(v, kProbabilityClamp, 1.0 - kProbabilityClamp); });
  out.linear_predictor = out.ps.unaryExpr([](double v) { return normal::quantile(v); });
  out.common_support = common_support(out.ps, a);
  return out;
}

double kish_ess(const Eigen::VectorXd& w, const std::vector<int>& a, int group) {
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != group) continue;
    const double v = w(static_cast<Eigen::Index>(i));
    sum += v;
    sum_sq += v * v;
  }
  return sum_sq > 0.0 ? sum * sum / sum_sq : 0.0;
}

WeightSet ipw_weights(const PropensityResult& psr, const std::vector<int>& a) {
  check_groups(a, psr.ps.size());
  WeightSet ws;
  ws.scheme = WeightScheme::ipw;
  ws.w.resize(psr.ps.size());
  for (Eigen::Index i = 0; i < psr.ps.size(); ++i) {
    const double p = psr.ps(i);
    if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::domain, "propensity score outside (0,1) at unit " + std::to_string(i));
    ws.w(i) = a[static_cast<std::size_t>(i)] == 1 ? 1.0 / p : 1.0 / (1.0 - p);
  }
  finish(ws, a);
  return ws;
}

WeightSet nn_match_weights(const PropensityResult& psr, const std::vector<int>& a,
                           const NearestNeighborOptions& options) {
  const auto n = psr.linear_predictor.size();
  check_groups(a, n);
  const auto& lp = psr.linear_predictor;

  double max_distance = std::numeric_limits<double>::infinity();
  if (options.caliper) {
    if (!(*options.caliper > 0.0)) throw Error(ErrorKind::config, "caliper must be positive");
    const double mean = lp.mean();
    const double sd = std::sqrt((lp.array() - mean).square().sum() / static_cast<double>(n - 1));
    max_distance = *options.caliper * sd;
  }

  // Available controls ordered by (linear predictor, index).
  std::set<std::pair<double, std::size_t>> controls;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (a[static_cast<std::size_t>(i)] == 0) controls.emplace(lp(i), static_cast<std::size_t>(i));
  }

  WeightSet ws;
  ws.scheme = WeightScheme::nn;
  ws.w = Eigen::VectorXd::Zero(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    if (a[static_cast<std::size_t>(t)] != 1) continue;
    if (controls.empty()) {
      ++ws.dropped_treated;
      continue;
    }
    const double target = lp(t);
    auto right = controls.lower_bound({target, 0});
    std::optional<std::pair<double, std::size_t>> best;
    auto consider = [&](const std::pair<double, std::size_t>& c) {
      if (!best) {
        best = c;
        return;
      }
      const double d = std::fabs(c.first - target);
      const double bd = std::fabs(best->first - target);
      if (d < bd || (d == bd && c.second < best->second)) best = c;
    };
    if (right != controls.end()) consider(*right);
    if (right != controls.begin()) {
      // Walk back to the lowest index sharing the left neighbour's value.
      auto left = std::prev(right);
      while (left != controls.begin() && std::prev(left)->first == left->first) --left;
      consider(*left);
    }
    if (std::fabs(best->first - target) > max_distance) {
      ++ws.dropped_treated;
      continue;
    }
    const auto control = best->second;
    ws.pairs.emplace_back(static_cast<std::size_t>(t), control);
    ws.w(t) = 1.0;
    ws.w(static_cast<Eigen::Index>(control)) += 1.0;
    if (!options.with_replacement) controls.erase(*best);
  }
  if (ws.pairs.empty()) {
    throw Error(ErrorKind::empty_match, "no treated unit found a control within the caliper");
  }
  ws.params = {{"with_replacement", options.with_replacement ? 1.0 : 0.0},
               {"caliper", options.caliper.value_or(0.0)},
               {"caliper_distance", std::isfinite(max_distance) ? max_distance : 0.0},
               {"matched_pairs", static_cast<double>(ws.pairs.size())},
               {"dropped_treated", static_cast<double>(ws.dropped_treated)}};
  finish(ws, a);
  return ws;
}

WeightSet subclass_weights(const PropensityResult& psr, const std::vector<int>& a, std::size_t n_strata) {
  const auto n = psr.ps.size();
  check_groups(a, n);
  if (n_strata < 2) throw Error(ErrorKind::config, "subclassification needs at least 2 strata");

  std::vector<double> sorted(psr.ps.data(), psr.ps.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const bool constant = sorted.front() == sorted.back();

  std::vector<double> edges;
  for (std::size_t s = 1; s < n_strata; ++s) {
    edges.push_back(type7_quantile(sorted, static_cast<double>(s) / static_cast<double>(n_strata)));
  }
  std::vector<std::vector<std::size_t>> bins(n_strata);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto bin = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), psr.ps(i)) - edges.begin());
    bins[bin].push_back(static_cast<std::size_t>(i));
  }
  bins.erase(std::remove_if(bins.begin(), bins.end(), [](const auto& b) { return b.empty(); }), bins.end());

  auto viable = [&](const std::vector<std::size_t>& bin) {
    bool t = false, c = false;
    for (auto i : bin) (a[i] == 1 ? t : c) = true;
    return t && c;
  };
  for (std::size_t s = 0; s < bins.size();) {
    if (viable(bins[s])) {
      ++s;
    } else if (s + 1 < bins.size()) {
      bins[s + 1].insert(bins[s + 1].end(), bins[s].begin(), bins[s].end());
      bins.erase(bins.begin() + static_cast<std::ptrdiff_t>(s));
    } else {
      bins[s - 1].insert(bins[s - 1].end(), bins[s].begin(), bins[s].end());
      bins.pop_back();
    }
  }
  if (bins.size() < 2 && !constant) {
    throw Error(ErrorKind::stratification, "fewer than 2 strata contain both treatment groups after merging");
  }

  WeightSet ws;
  ws.scheme = WeightScheme::subclass;
  ws.w.resize(n);
  ws.stratum.assign(static_cast<std::size_t>(n), -1);
  for (std::size_t s = 0; s < bins.size(); ++s) {
    double treated = 0.0;
    for (auto i : bins[s]) treated += a[i];
    const double size = static_cast<double>(bins[s].size());
    const double control = size - treated;
    for (auto i : bins[s]) {
      ws.w(static_cast<Eigen::Index>(i)) = a[i] == 1 ? size / (2.0 * treated) : size / (2.0 * control);
      ws.stratum[i] = static_cast<int>(s);
    }
  }
  ws.params = {{"n_strata", static_cast<double>(n_strata)}, {"n_strata_used", static_cast<double>(bins.size())}};
  finish(ws, a);
  return ws;
}

WeightSet make_weights(WeightScheme scheme, const PropensityResult& psr, const std::vector<int>& a,
                       const SchemeParams& params) {
  switch (scheme) {
    case WeightScheme::ipw: return ipw_weights(psr, a);
    case WeightScheme::nn: return nn_match_weights(psr, a, params.nn);
    case WeightScheme::subclass: return subclass_weights(psr, a, params.n_strata);
  }
  throw Error(ErrorKind::config, "unknown weighting scheme");
}

}  // namespace causalmatch
