#include "causalmatch/effects.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "causalmatch/error.hpp"
#include "causalmatch/normal.hpp"

namespace causalmatch {

namespace {

EffectEstimate normal_interval(double estimate, double se, Estimator estimator, std::size_t n) {
  EffectEstimate e;
  e.estimate = estimate;
  e.se = se;
  e.ci_low = estimate - normal::kZ975 * se;
  e.ci_high = estimate + normal::kZ975 * se;
  e.estimator = estimator;
  e.n_used = n;
  return e;
}

double type7(const std::vector<double>& sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

StratumSlope slope_fit(const std::vector<double>& t, const std::vector<double>& y,
                       const std::vector<std::size_t>& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd v(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    x(r, 0) = 1.0;
    x(r, 1) = t[rows[static_cast<std::size_t>(r)]];
    v(r) = y[rows[static_cast<std::size_t>(r)]];
  }
  const auto fit = fit_ols(DesignMatrix(std::move(x), {"(Intercept)", "treatment"}), v, CovarianceKind::classical);
  StratumSlope s;
  s.n = rows.size();
  s.slope = fit.coefficients(1);
  s.se = fit.se(1);
  const double df = static_cast<double>(rows.size()) - 2.0;
  const double crit = df >= 1.0 ? normal::student_t_quantile(0.975, df) : normal::kZ975;
  s.ci_low = s.slope - crit * s.se;
  s.ci_high = s.slope + crit * s.se;
  return s;
}

}  // namespace

const char* to_string(Estimator estimator) {
  switch (estimator) {
    case Estimator::naive: return "naive";
    case Estimator::adjusted: return "adjusted";
    case Estimator::matched: return "matched";
  }
  return "unknown";
}

EffectEstimate diff_in_means(const CausalFrame& frame) {
  if (!frame.has_binary_treatment()) throw Error(ErrorKind::schema, "difference in means needs a binary treatment");
  double sum[2] = {0.0, 0.0};
  std::size_t count[2] = {0, 0};
  for (std::size_t i = 0; i < frame.n(); ++i) {
    sum[frame.a[i]] += frame.y[i];
    ++count[frame.a[i]];
  }
  if (count[0] < 2 || count[1] < 2) {
    throw Error(ErrorKind::variance, "each group needs at least 2 units for a variance estimate");
  }
  const double mean[2] = {sum[0] / static_cast<double>(count[0]), sum[1] / static_cast<double>(count[1])};
  double ss[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < frame.n(); ++i) {
    const double d = frame.y[i] - mean[frame.a[i]];
    ss[frame.a[i]] += d * d;
  }
  // Per-group variance of the mean, s_g^2 / n_g.
  double vm[2];
  for (int g = 0; g < 2; ++g) {
    vm[g] = ss[g] / static_cast<double>(count[g] - 1) / static_cast<double>(count[g]);
  }
  const double var = vm[0] + vm[1];
  EffectEstimate e;
  e.estimator = Estimator::naive;
  e.n_used = frame.n();
  e.estimate = mean[1] - mean[0];
  e.se = std::sqrt(var);
  if (var > 0.0) {
    e.df = var * var / (vm[0] * vm[0] / static_cast<double>(count[0] - 1) +
                        vm[1] * vm[1] / static_cast<double>(count[1] - 1));
  } else {
    e.df = static_cast<double>(count[0] + count[1] - 2);
  }
  const double crit = normal::student_t_quantile(0.975, e.df);
  e.ci_low = e.estimate - crit * e.se;
  e.ci_high = e.estimate + crit * e.se;
  return e;
}

DesignMatrix outcome_design(const CausalFrame& frame, const Eigen::VectorXd& centers) {
  const auto n = static_cast<Eigen::Index>(frame.n());
  const auto k = static_cast<Eigen::Index>(frame.k());
  if (centers.size() != k) throw Error(ErrorKind::dimension, "one centre per confounder is required");
  Eigen::MatrixXd values(n, 2 + 2 * k);
  std::vector<std::string> labels{"(Intercept)", frame.treatment_name};
  for (const auto& name : frame.confounder_names) labels.push_back(name);
  for (const auto& name : frame.confounder_names) labels.push_back(frame.treatment_name + ":" + name);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = frame.a[static_cast<std::size_t>(i)];
    values(i, 0) = 1.0;
    values(i, 1) = a;
    for (Eigen::Index j = 0; j < k; ++j) {
      const double centred = frame.x(i, j) - centers(j);
      values(i, 2 + j) = centred;
      values(i, 2 + k + j) = a * centred;
    }
  }
  return DesignMatrix(std::move(values), std::move(labels));
}

OutcomeModel fit_outcome_model(const CausalFrame& frame, const WeightSet* weights, CovarianceKind covariance) {
  frame.validate(true);
  OutcomeModel model;
  model.confounders = frame.confounder_names;
  model.centers = frame.x.colwise().mean().transpose();
  const auto design = outcome_design(frame, model.centers);
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(frame.y.data(), static_cast<Eigen::Index>(frame.n()));
  WlsOptions options;
  options.covariance = covariance;
  if (weights != nullptr) {
    if (static_cast<std::size_t>(weights->w.size()) != frame.n()) {
      throw Error(ErrorKind::dimension, "weight set does not match the frame");
    }
    model.fit = fit_wls(design, y, weights->w, options);
  } else {
    model.fit = fit_wls(design, y, Eigen::VectorXd::Ones(design.rows()), options);
  }
  return model;
}

EffectEstimate gcomp_ate(const OutcomeModel& model, const CausalFrame& frame) {
  const auto k = model.confounders.size();
  if (frame.confounder_names != model.confounders) {
    throw Error(ErrorKind::schema, "frame confounders do not match the outcome model");
  }
  const auto p = model.fit.coefficients.size();
  if (p != static_cast<Eigen::Index>(2 + 2 * k)) throw Error(ErrorKind::schema, "fit is not an outcome-model fit");

  // d ATE / d coefficients: 1 on a, mean(x_j) - centre_j on each interaction.
  Eigen::VectorXd gradient = Eigen::VectorXd::Zero(p);
  gradient(model.treatment_index()) = 1.0;
  const Eigen::VectorXd means = frame.x.colwise().mean().transpose();
  for (std::size_t j = 0; j < k; ++j) {
    gradient(model.interaction_index(j)) = means(static_cast<Eigen::Index>(j)) - model.centers(static_cast<Eigen::Index>(j));
  }
  const double estimate = gradient.dot(model.fit.coefficients);
  const double var = gradient.dot(model.fit.covariance * gradient);
  const double scale = gradient.squaredNorm() * model.fit.covariance.diagonal().cwiseAbs().maxCoeff();
  if (var < -1e-10 * std::max(scale, 1e-300) || !std::isfinite(var)) {
    throw Error(ErrorKind::numerical, "coefficient covariance is not positive semidefinite along the ATE gradient");
  }
  return normal_interval(estimate, std::sqrt(std::max(var, 0.0)), Estimator::matched, frame.n());
}

EffectEstimate adjusted_ate(const CausalFrame& frame) {
  frame.validate(true);
  const auto n = static_cast<Eigen::Index>(frame.n());
  const auto k = frame.x.cols();
  Eigen::MatrixXd values(n, 2 + k);
  values.col(0).setOnes();
  for (Eigen::Index i = 0; i < n; ++i) values(i, 1) = frame.a[static_cast<std::size_t>(i)];
  values.rightCols(k) = frame.x;
  std::vector<std::string> labels{"(Intercept)", frame.treatment_name};
  labels.insert(labels.end(), frame.confounder_names.begin(), frame.confounder_names.end());
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(frame.y.data(), n);
  const auto fit = fit_ols(DesignMatrix(std::move(values), std::move(labels)), y, CovarianceKind::hc0);
  return normal_interval(fit.coefficients(1), fit.se(1), Estimator::adjusted, frame.n());
}

EffectEstimate matched_ate(const CausalFrame& frame, const WeightSet& weights) {
  const auto model = fit_outcome_model(frame, &weights, CovarianceKind::hc0);
  auto e = gcomp_ate(model, frame);
  std::size_t used = 0;
  for (Eigen::Index i = 0; i < weights.w.size(); ++i) used += weights.w(i) > 0.0 ? 1 : 0;
  e.n_used = used;
  return e;
}

DecompositionResult decompose(const PotentialFrame& pf) {
  const auto& a = pf.frame.a;
  const auto n = a.size();
  if (pf.y0.size() != n || pf.y1.size() != n) throw Error(ErrorKind::dimension, "potential outcome length mismatch");
  double y1_t = 0.0, y0_t = 0.0, y1_c = 0.0, y0_c = 0.0;
  std::size_t treated = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (a[i] == 1) {
      y1_t += pf.y1[i];
      y0_t += pf.y0[i];
      ++treated;
    } else {
      y1_c += pf.y1[i];
      y0_c += pf.y0[i];
    }
  }
  if (treated == 0 || treated == n) throw Error(ErrorKind::positivity, "potential frame has a single class");
  const double nt = static_cast<double>(treated);
  const double nc = static_cast<double>(n - treated);
  y1_t /= nt;
  y0_t /= nt;
  y1_c /= nc;
  y0_c /= nc;

  DecompositionResult r;
  r.pi = nt / static_cast<double>(n);
  r.att = y1_t - y0_t;
  r.atc = y1_c - y0_c;
  r.ate = r.pi * r.att + (1.0 - r.pi) * r.atc;
  r.naive = y1_t - y0_c;
  r.selection_bias_term = y0_t - y0_c;
  r.het_term = (1.0 - r.pi) * (r.att - r.atc);
  r.residual = r.naive - (r.ate + r.selection_bias_term + r.het_term);
  return r;
}

StratifiedSlopes simpson_strata(const CausalFrame& frame, const std::string& confounder, std::size_t n_bins) {
  if (n_bins < 1) throw Error(ErrorKind::config, "at least one bin is required");
  const auto z = frame.column(confounder);
  const auto& t = frame.treatment;
  const auto n = frame.n();
  if (n < kMinRowsPerStratum) throw Error(ErrorKind::stratification, "too few rows to fit a slope");

  StratifiedSlopes out;
  out.confounder = confounder;
  out.requested_bins = n_bins;
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  out.marginal = slope_fit(t, frame.y, all);

  std::vector<double> sorted = z;
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> edges{sorted.front()};
  for (std::size_t b = 1; b < n_bins; ++b) edges.push_back(type7(sorted, static_cast<double>(b) / static_cast<double>(n_bins)));
  edges.push_back(sorted.back());

  struct Bin {
    double lower, upper;
    std::vector<std::size_t> rows;
  };
  std::vector<Bin> bins;
  for (std::size_t b = 0; b < n_bins; ++b) bins.push_back({edges[b], edges[b + 1], {}});
  const std::vector<double> interior(edges.begin() + 1, edges.end() - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto b = static_cast<std::size_t>(std::upper_bound(interior.begin(), interior.end(), z[i]) - interior.begin());
    bins[b].rows.push_back(i);
  }

  auto fittable = [&](const Bin& bin) {
    if (bin.rows.size() < kMinRowsPerStratum) return false;
    const double first = t[bin.rows.front()];
    return std::any_of(bin.rows.begin(), bin.rows.end(), [&](std::size_t i) { return t[i] != first; });
  };
  for (std::size_t b = 0; b < bins.size();) {
    if (fittable(bins[b])) {
      ++b;
    } else if (b + 1 < bins.size()) {
      auto& next = bins[b + 1];
      next.lower = bins[b].lower;
      next.rows.insert(next.rows.end(), bins[b].rows.begin(), bins[b].rows.end());
      bins.erase(bins.begin() + static_cast<std::ptrdiff_t>(b));
    } else if (b > 0) {
      auto& prev = bins[b - 1];
      prev.upper = bins[b].upper;
      prev.rows.insert(prev.rows.end(), bins[b].rows.begin(), bins[b].rows.end());
      bins.pop_back();
      break;
    } else {
      break;
    }
  }
  if (bins.empty() || !std::all_of(bins.begin(), bins.end(), fittable)) {
    throw Error(ErrorKind::stratification, "too few rows per bin after merging");
  }

  for (auto& bin : bins) {
    std::sort(bin.rows.begin(), bin.rows.end());
    auto s = slope_fit(t, frame.y, bin.rows);
    s.lower = bin.lower;
    s.upper = bin.upper;
    s.reversed = (s.slope > 0.0 && out.marginal.slope < 0.0) || (s.slope < 0.0 && out.marginal.slope > 0.0);
    out.reversed_count += s.reversed ? 1 : 0;
    out.strata.push_back(s);
  }
  out.marginal.lower = sorted.front();
  out.marginal.upper = sorted.back();
  return out;
}

std::size_t worker_threads(std::size_t requested, std::size_t jobs) {
  std::size_t threads = requested;
  if (threads == 0) {
    threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("CAUSAL_MATCH_THREADS")) {
      const long cap = std::strtol(env, nullptr, 10);
      if (cap >= 1) threads = std::min(threads, static_cast<std::size_t>(cap));
    }
  }
  return std::max<std::size_t>(1, std::min(threads, jobs));
}

namespace {

TrialResult run_one(const CausalFrame& frame, const TrialOptions& options, std::size_t trial) {
  TrialResult r;
  r.trial_index = trial;
  try {
    const auto size = options.sample_size == 0 ? frame.n() : options.sample_size;
    const auto sample = sample_units(frame, size, options.seed, trial);
    const auto psr = estimate_ps(sample);
    const auto weights = make_weights(options.scheme, psr, sample.a, options.scheme_params);
    r.naive = diff_in_means(sample);
    r.adjusted = adjusted_ate(sample);
    r.matched = matched_ate(sample, weights);
    r.naive.trial_index = trial;
    r.adjusted.trial_index = trial;
    r.matched.trial_index = trial;
    r.balance = balance_table(sample, psr, {weights});
    r.ess_treated = weights.ess_treated;
    r.ess_control = weights.ess_control;
    r.ok = true;
  } catch (const Error& e) {
    r.error = std::string(to_string(e.kind())) + ": " + e.what();
  }
  return r;
}

}  // namespace

std::vector<TrialResult> run_trials(const CausalFrame& frame, const TrialOptions& options) {
  if (options.n_trials < 1) throw Error(ErrorKind::config, "n_trials must be at least 1");
  if (options.sample_size > frame.n()) {
    throw Error(ErrorKind::size, "sample size " + std::to_string(options.sample_size) + " exceeds " +
                                     std::to_string(frame.n()) + " units");
  }
  frame.validate(true);

  std::vector<TrialResult> results(options.n_trials);
  const auto threads = worker_threads(options.threads, options.n_trials);
  if (threads == 1) {
    for (std::size_t t = 0; t < options.n_trials; ++t) results[t] = run_one(frame, options, t);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t t = w; t < options.n_trials; t += threads) results[t] = run_one(frame, options, t);
      });
    }
    for (auto& th : pool) th.join();
  }
  const bool any = std::any_of(results.begin(), results.end(), [](const TrialResult& r) { return r.ok; });
  if (!any) {
    throw Error(ErrorKind::numerical, "every trial failed; first error: " + results.front().error);
  }
  return results;
}

}  // namespace causalmatch
