#include "causalmatch/linreg.hpp"

#include <algorithm>
#include <cmath>

#include "causalmatch/error.hpp"
#include "causalmatch/normal.hpp"

namespace causalmatch {

namespace {

std::string join_labels(const std::vector<std::string>& labels) {
  std::string out;
  for (const auto& l : labels) {
    if (!out.empty()) out += ", ";
    out += l;
  }
  return out;
}

// (X'WX)^{-1} from the pivoted R factor: P R^{-1} R^{-T} P'.
Eigen::MatrixXd inverse_gram(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr, Eigen::Index p) {
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd unpermuted = r_inv * r_inv.transpose();
  const auto& perm = qr.colsPermutation();
  Eigen::MatrixXd out = perm * unpermuted * perm.transpose();
  return 0.5 * (out + out.transpose());
}

void check_rank(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr, const std::vector<std::string>& labels,
                double tolerance) {
  const Eigen::Index p = qr.cols();
  const auto diag = qr.matrixR().diagonal().cwiseAbs();
  const double max_diag = diag.size() > 0 ? diag.maxCoeff() : 0.0;
  std::vector<std::string> dependent;
  for (Eigen::Index j = 0; j < std::min<Eigen::Index>(p, diag.size()); ++j) {
    if (!(diag(j) > tolerance * max_diag)) {
      dependent.push_back(labels[static_cast<std::size_t>(qr.colsPermutation().indices()(j))]);
    }
  }
  for (Eigen::Index j = diag.size(); j < p; ++j) {
    dependent.push_back(labels[static_cast<std::size_t>(qr.colsPermutation().indices()(j))]);
  }
  if (!dependent.empty()) {
    throw Error(ErrorKind::singular_design, "design is rank deficient; dependent columns: " + join_labels(dependent));
  }
}

}  // namespace

DesignMatrix::DesignMatrix(Eigen::MatrixXd v, std::vector<std::string> l) : values(std::move(v)), labels(std::move(l)) {
  if (static_cast<std::size_t>(values.cols()) != labels.size()) {
    throw Error(ErrorKind::schema, "design has " + std::to_string(values.cols()) + " columns but " +
                                       std::to_string(labels.size()) + " labels");
  }
}

const char* to_string(CovarianceKind kind) { return kind == CovarianceKind::hc0 ? "hc0" : "classical"; }

double FitResult::se(Eigen::Index j) const { return std::sqrt(std::max(0.0, covariance(j, j))); }

Eigen::Index FitResult::index_of(const std::string& label) const {
  const auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw Error(ErrorKind::schema, "fit has no coefficient '" + label + "'");
  return static_cast<Eigen::Index>(it - labels.begin());
}

FitResult fit_wls(const DesignMatrix& design, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                  const WlsOptions& options) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  if (y.size() != n || w.size() != n) throw Error(ErrorKind::dimension, "y and w must have one entry per design row");
  if (p == 0) throw Error(ErrorKind::dimension, "design has no columns");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(w(i) >= 0.0) || !std::isfinite(w(i))) {
      throw Error(ErrorKind::weight, "weight " + std::to_string(i) + " is negative or non-finite");
    }
  }

  std::vector<Eigen::Index> active;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (w(i) > 0.0) active.push_back(i);
  }
  const auto n_pos = static_cast<Eigen::Index>(active.size());
  if (n_pos < p) {
    throw Error(ErrorKind::singular_design, "only " + std::to_string(n_pos) + " positive weights for " +
                                                std::to_string(p) + " coefficients");
  }

  Eigen::MatrixXd xw(n_pos, p);
  Eigen::VectorXd yw(n_pos);
  for (Eigen::Index r = 0; r < n_pos; ++r) {
    const double s = std::sqrt(w(active[static_cast<std::size_t>(r)]));
    xw.row(r) = s * design.values.row(active[static_cast<std::size_t>(r)]);
    yw(r) = s * y(active[static_cast<std::size_t>(r)]);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xw);
  check_rank(qr, design.labels, options.rank_tolerance);

  FitResult fit;
  fit.labels = design.labels;
  fit.n = static_cast<std::size_t>(n);
  fit.p = static_cast<std::size_t>(p);
  fit.coefficients = qr.solve(yw);
  fit.residuals = y - design.values * fit.coefficients;
  fit.rss = (w.array() * fit.residuals.array().square()).sum();

  const Eigen::MatrixXd bread = inverse_gram(qr, p);
  const auto dof = std::max<Eigen::Index>(n_pos - p, 1);
  fit.classical_covariance = (fit.rss / static_cast<double>(dof)) * bread;

  // Meat: sum_i (w_i e_i)^2 x_i x_i'.
  const Eigen::VectorXd we = (w.array() * fit.residuals.array()).matrix();
  const Eigen::MatrixXd scaled = we.asDiagonal() * design.values;
  const Eigen::MatrixXd meat = scaled.transpose() * scaled;
  Eigen::MatrixXd hc0 = bread * meat * bread;
  fit.hc0_covariance = 0.5 * (hc0 + hc0.transpose());

  fit.covariance_kind = options.covariance;
  fit.covariance = options.covariance == CovarianceKind::hc0 ? fit.hc0_covariance : fit.classical_covariance;
  return fit;
}

FitResult fit_ols(const DesignMatrix& design, const Eigen::VectorXd& y, CovarianceKind covariance) {
  WlsOptions options;
  options.covariance = covariance;
  return fit_wls(design, y, Eigen::VectorXd::Ones(design.rows()), options);
}

double probit_loglik(const Eigen::MatrixXd& x, const std::vector<int>& a, const Eigen::VectorXd& gamma) {
  const Eigen::VectorXd eta = x * gamma;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    ll += a[static_cast<std::size_t>(i)] == 1 ? normal::log_cdf(eta(i)) : normal::log_cdf(-eta(i));
  }
  return ll;
}

Eigen::VectorXd probit_score(const Eigen::MatrixXd& x, const std::vector<int>& a, const Eigen::VectorXd& gamma) {
  const Eigen::VectorXd eta = x * gamma;
  Eigen::VectorXd u(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    u(i) = a[static_cast<std::size_t>(i)] == 1 ? normal::mills_ratio(eta(i)) : -normal::mills_ratio(-eta(i));
  }
  return x.transpose() * u;
}

Eigen::MatrixXd probit_information(const Eigen::MatrixXd& x, const Eigen::VectorXd& gamma) {
  const Eigen::VectorXd eta = x * gamma;
  Eigen::VectorXd root_w(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    // phi^2 / (Phi (1 - Phi)) = mills(eta) * mills(-eta)
    root_w(i) = std::sqrt(normal::mills_ratio(eta(i)) * normal::mills_ratio(-eta(i)));
  }
  const Eigen::MatrixXd scaled = root_w.asDiagonal() * x;
  return scaled.transpose() * scaled;
}

FitResult fit_probit(const DesignMatrix& design, const std::vector<int>& a, const ProbitOptions& options) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  if (static_cast<Eigen::Index>(a.size()) != n) throw Error(ErrorKind::dimension, "treatment length mismatch");
  std::size_t treated = 0;
  for (int v : a) {
    if (v != 0 && v != 1) throw Error(ErrorKind::data, "probit response must be 0/1");
    treated += static_cast<std::size_t>(v);
  }
  if (treated == 0 || treated == a.size()) throw Error(ErrorKind::positivity, "probit response has a single class");

  {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.values);
    check_rank(qr, design.labels, 1e-10);
  }

  const auto& x = design.values;
  Eigen::VectorXd gamma = Eigen::VectorXd::Zero(p);
  // Start from the intercept-only MLE when an intercept column leads the design.
  if (p > 0 && (x.col(0).array() == 1.0).all()) {
    gamma(0) = normal::quantile(static_cast<double>(treated) / static_cast<double>(n));
  }

  double ll = probit_loglik(x, a, gamma);
  FitResult fit;
  fit.labels = design.labels;
  fit.n = static_cast<std::size_t>(n);
  fit.p = static_cast<std::size_t>(p);
  fit.converged = false;

  std::size_t iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    const Eigen::VectorXd score = probit_score(x, a, gamma);
    const Eigen::MatrixXd info = probit_information(x, gamma);
    const Eigen::VectorXd step = info.ldlt().solve(score);
    if (!step.allFinite()) throw Error(ErrorKind::numerical, "Fisher scoring step is not finite");

    double scale = 1.0;
    Eigen::VectorXd candidate = gamma + step;
    double ll_new = probit_loglik(x, a, candidate);
    for (int halvings = 0; halvings < 40 && !(ll_new >= ll); ++halvings) {
      scale *= 0.5;
      candidate = gamma + scale * step;
      ll_new = probit_loglik(x, a, candidate);
    }
    if (!(ll_new >= ll)) {
      // No ascent along the scoring direction: at the optimum to working precision.
      fit.converged = true;
      break;
    }
    const double change = std::fabs(ll_new - ll) / std::max(std::fabs(ll), 1e-300);
    gamma = candidate;
    ll = ll_new;
    if (gamma.cwiseAbs().maxCoeff() > options.separation_bound && change > options.tolerance) {
      throw Error(ErrorKind::separation,
                  "probit coefficients exceed " + std::to_string(options.separation_bound) +
                      " with the likelihood still improving; the treatment is (quasi-)completely separated");
    }
    if (change < options.tolerance) {
      fit.converged = true;
      ++iter;
      break;
    }
  }

  // Polish: once the likelihood has stopped moving its differences are round-off,
  // so steps are judged by the score instead.
  if (fit.converged) {
    for (int extra = 0; extra < 3; ++extra) {
      const Eigen::VectorXd score = probit_score(x, a, gamma);
      if (score.norm() < 1e-12 * static_cast<double>(n)) break;
      const Eigen::VectorXd candidate = gamma + probit_information(x, gamma).ldlt().solve(score);
      if (!(probit_score(x, a, candidate).norm() < score.norm())) break;
      gamma = candidate;
      ll = probit_loglik(x, a, candidate);
    }
  }

  fit.iterations = iter;
  fit.coefficients = gamma;
  fit.loglik = ll;
  const Eigen::MatrixXd info = probit_information(x, gamma);
  Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  fit.classical_covariance = 0.5 * (cov + cov.transpose());
  fit.covariance = fit.classical_covariance;
  fit.covariance_kind = CovarianceKind::classical;
  const Eigen::VectorXd eta = x * gamma;
  fit.residuals.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) fit.residuals(i) = a[static_cast<std::size_t>(i)] - normal::cdf(eta(i));
  return fit;
}

Eigen::VectorXd predict_probit(const FitResult& fit, const DesignMatrix& rows) {
  if (rows.labels != fit.labels) {
    throw Error(ErrorKind::schema, "design columns [" + join_labels(rows.labels) + "] do not match the fit [" +
                                       join_labels(fit.labels) + "]");
  }
  const Eigen::VectorXd eta = rows.values * fit.coefficients;
  Eigen::VectorXd out(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    out(i) = std::clamp(normal::cdf(eta(i)), kProbabilityClamp, 1.0 - kProbabilityClamp);
  }
  return out;
}

}  // namespace causalmatch
