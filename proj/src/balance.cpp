#include "causalmatch/balance.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "causalmatch/error.hpp"
#include "causalmatch/rng.hpp"

namespace causalmatch {

namespace {

struct GroupMoments {
  double mean[2] = {0.0, 0.0};
  double sd[2] = {0.0, 0.0};
  std::size_t count[2] = {0, 0};
};

GroupMoments unweighted_moments(std::span<const double> values, const std::vector<int>& a) {
  GroupMoments m;
  double sum[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < values.size(); ++i) {
    sum[a[i]] += values[i];
    ++m.count[a[i]];
  }
  for (int g = 0; g < 2; ++g) {
    if (m.count[g] == 0) throw Error(ErrorKind::positivity, "SMD needs both treatment groups");
    m.mean[g] = sum[g] / static_cast<double>(m.count[g]);
  }
  double ss[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - m.mean[a[i]];
    ss[a[i]] += d * d;
  }
  for (int g = 0; g < 2; ++g) {
    m.sd[g] = m.count[g] > 1 ? std::sqrt(ss[g] / static_cast<double>(m.count[g] - 1)) : 0.0;
  }
  return m;
}

double weighted_group_mean(std::span<const double> values, const std::vector<int>& a, std::span<const double> w,
                           int group) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (a[i] != group) continue;
    num += w[i] * values[i];
    den += w[i];
  }
  if (!(den > 0.0)) throw Error(ErrorKind::degenerate, "a treatment group has zero total weight");
  return num / den;
}

}  // namespace

double smd(std::span<const double> values, const std::vector<int>& a, std::span<const double> w) {
  if (a.size() != values.size()) throw Error(ErrorKind::dimension, "treatment length mismatch");
  if (!w.empty() && w.size() != values.size()) throw Error(ErrorKind::dimension, "weight length mismatch");
  const auto m = unweighted_moments(values, a);
  const double pooled = std::sqrt(0.5 * (m.sd[0] * m.sd[0] + m.sd[1] * m.sd[1]));
  if (!(pooled > 0.0)) throw Error(ErrorKind::degenerate, "pooled standard deviation is zero");
  if (w.empty()) return (m.mean[1] - m.mean[0]) / pooled;
  return (weighted_group_mean(values, a, w, 1) - weighted_group_mean(values, a, w, 0)) / pooled;
}

std::vector<double> weighted_quantiles(std::span<const double> values, std::span<const double> w,
                                       std::span<const double> probs) {
  if (w.size() != values.size()) throw Error(ErrorKind::dimension, "weight length mismatch");
  for (std::size_t j = 0; j < probs.size(); ++j) {
    if (!(probs[j] >= 0.0 && probs[j] <= 1.0)) throw Error(ErrorKind::domain, "probabilities must lie in [0,1]");
    if (j > 0 && probs[j] < probs[j - 1]) throw Error(ErrorKind::domain, "probabilities must be nondecreasing");
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (w[i] < 0.0 || !std::isfinite(w[i])) throw Error(ErrorKind::weight, "weights must be finite and nonnegative");
    if (w[i] > 0.0) order.push_back(i);
  }
  if (order.empty()) throw Error(ErrorKind::degenerate, "all weights are zero");
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) { return values[l] < values[r]; });

  const auto m = order.size();
  std::vector<double> lower(m), upper(m), x(m);
  double total = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    x[k] = values[order[k]];
    lower[k] = total;
    upper[k] = total + std::max(w[order[k]] - 1.0, 0.0);
    total += w[order[k]];
  }

  std::vector<double> out;
  out.reserve(probs.size());
  for (double p : probs) {
    const double h = p * (total - 1.0);
    if (h <= upper.front()) {
      out.push_back(x.front());
      continue;
    }
    if (h >= upper.back()) {
      out.push_back(x.back());
      continue;
    }
    const auto k = static_cast<std::size_t>(std::lower_bound(upper.begin(), upper.end(), h) - upper.begin());
    if (h >= lower[k]) {
      out.push_back(x[k]);
    } else {
      const double frac = (h - upper[k - 1]) / (lower[k] - upper[k - 1]);
      out.push_back(x[k - 1] + frac * (x[k] - x[k - 1]));
    }
  }
  return out;
}

std::vector<double> quantiles(std::span<const double> values, std::span<const double> probs) {
  const std::vector<double> ones(values.size(), 1.0);
  return weighted_quantiles(values, ones, probs);
}

QQPairs qq_pairs(std::span<const double> values, const std::vector<int>& a, const std::string& variable,
                 std::span<const double> w, std::size_t m) {
  if (m < 2) throw Error(ErrorKind::config, "Q-Q output needs at least 2 probability points");
  if (a.size() != values.size()) throw Error(ErrorKind::dimension, "treatment length mismatch");
  if (!w.empty() && w.size() != values.size()) throw Error(ErrorKind::dimension, "weight length mismatch");
  QQPairs out;
  out.variable = variable;
  out.weighted = !w.empty();
  for (std::size_t j = 1; j <= m; ++j) out.probs.push_back((static_cast<double>(j) - 0.5) / static_cast<double>(m));

  std::vector<double> group_values[2], group_weights[2];
  for (std::size_t i = 0; i < values.size(); ++i) {
    group_values[a[i]].push_back(values[i]);
    group_weights[a[i]].push_back(w.empty() ? 1.0 : w[i]);
  }
  if (group_values[0].empty() || group_values[1].empty()) {
    throw Error(ErrorKind::positivity, "Q-Q pairs need both treatment groups");
  }
  out.control_q = weighted_quantiles(group_values[0], group_weights[0], out.probs);
  out.treatment_q = weighted_quantiles(group_values[1], group_weights[1], out.probs);
  return out;
}

QQPairs qq_pairs(const CausalFrame& frame, const std::string& variable, std::span<const double> w, std::size_t m) {
  const auto values = frame.column(variable);
  return qq_pairs(values, frame.a, variable, w, m);
}

std::vector<std::size_t> weighted_draws(std::span<const double> w, std::size_t size, std::uint64_t seed) {
  if (size < 1) throw Error(ErrorKind::size, "pseudo-population size must be at least 1");
  std::vector<double> cumulative(w.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] < 0.0 || !std::isfinite(w[i])) throw Error(ErrorKind::weight, "weights must be finite and nonnegative");
    total += w[i];
    cumulative[i] = total;
  }
  if (!(total > 0.0)) throw Error(ErrorKind::degenerate, "all weights are zero");
  Rng rng(seed);
  std::vector<std::size_t> draws(size);
  for (auto& d : draws) {
    const double u = rng.uniform() * total;
    auto idx = static_cast<std::size_t>(std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    // Rounding can land u on the final boundary; step back to the last positive weight.
    if (idx >= w.size()) idx = w.size() - 1;
    while (w[idx] == 0.0) --idx;
    d = idx;
  }
  return draws;
}

CausalFrame pseudo_population(const CausalFrame& frame, std::span<const double> w, std::size_t size,
                              std::uint64_t seed) {
  if (w.size() != frame.n()) throw Error(ErrorKind::dimension, "weight length mismatch");
  const auto draws = weighted_draws(w, size, seed);
  auto out = frame.subset(draws);
  for (std::size_t d = 0; d < draws.size(); ++d) out.unit_ids[d] += "#" + std::to_string(d);
  out.log.push_back({"pseudo_population", "",
                     {{"size", static_cast<double>(size)},
                      {"seed_hi", static_cast<double>(seed >> 32)},
                      {"seed_lo", static_cast<double>(seed & 0xffffffffULL)}}});
  return out;
}

BalanceReport balance_table(const CausalFrame& frame, const PropensityResult& psr,
                            const std::vector<WeightSet>& weight_sets) {
  if (static_cast<std::size_t>(psr.ps.size()) != frame.n()) {
    throw Error(ErrorKind::dimension, "propensity scores do not match the frame");
  }
  BalanceReport report;
  for (const auto& ws : weight_sets) {
    if (static_cast<std::size_t>(ws.w.size()) != frame.n()) throw Error(ErrorKind::dimension, "weight length mismatch");
    report.schemes.emplace_back(to_string(ws.scheme));
  }

  auto record_for = [&](const std::string& name, std::span<const double> values) {
    BalanceRecord r;
    r.name = name;
    const auto m = unweighted_moments(values, frame.a);
    r.mean_treated = m.mean[1];
    r.mean_control = m.mean[0];
    r.sd_treated = m.sd[1];
    r.sd_control = m.sd[0];
    r.smd_before = smd(values, frame.a);
    for (const auto& ws : weight_sets) {
      r.smd_after.push_back(smd(values, frame.a, std::span<const double>(ws.w.data(), static_cast<std::size_t>(ws.w.size()))));
    }
    return r;
  };
  for (const auto& name : frame.confounder_names) {
    const auto values = frame.column(name);
    report.records.push_back(record_for(name, values));
  }
  report.records.push_back(
      record_for("ps", std::span<const double>(psr.ps.data(), static_cast<std::size_t>(psr.ps.size()))));
  return report;
}

}  // namespace causalmatch
