#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace causalmatch {

// Regression design: n x p values (intercept column included by the caller)
// with one label per column.
struct DesignMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> labels;

  DesignMatrix() = default;
  DesignMatrix(Eigen::MatrixXd v, std::vector<std::string> l);

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

enum class CovarianceKind { classical, hc0 };

const char* to_string(CovarianceKind kind);

struct FitResult {
  std::vector<std::string> labels;
  Eigen::VectorXd coefficients;
  // The covariance selected by `covariance_kind`.
  Eigen::MatrixXd covariance;
  CovarianceKind covariance_kind = CovarianceKind::classical;
  // WLS fits carry both estimators; probit fits only the classical one
  // (inverse expected information).
  Eigen::MatrixXd classical_covariance;
  Eigen::MatrixXd hc0_covariance;
  Eigen::VectorXd residuals;
  double rss = 0.0;
  double loglik = 0.0;
  std::size_t n = 0;
  std::size_t p = 0;
  bool converged = true;
  std::size_t iterations = 0;

  double se(Eigen::Index j) const;
  Eigen::Index index_of(const std::string& label) const;
};

struct WlsOptions {
  CovarianceKind covariance = CovarianceKind::hc0;
  // Pivoted-QR diagonal below rank_tolerance * max diagonal marks a dependent column.
  double rank_tolerance = 1e-10;
};

// Minimizes sum_i w_i (y_i - x_i' b)^2 by column-pivoted Householder QR of the
// row-scaled design sqrt(W) X.
FitResult fit_wls(const DesignMatrix& design, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                  const WlsOptions& options = {});

FitResult fit_ols(const DesignMatrix& design, const Eigen::VectorXd& y,
                  CovarianceKind covariance = CovarianceKind::hc0);

struct ProbitOptions {
  std::size_t max_iterations = 100;
  double tolerance = 1e-10;
  // Any |coefficient| above this while the likelihood is still improving
  // is treated as (quasi-)complete separation.
  double separation_bound = 15.0;
};

// Probit MLE by Fisher scoring with step halving.
FitResult fit_probit(const DesignMatrix& design, const std::vector<int>& a, const ProbitOptions& options = {});

double probit_loglik(const Eigen::MatrixXd& x, const std::vector<int>& a, const Eigen::VectorXd& gamma);
Eigen::VectorXd probit_score(const Eigen::MatrixXd& x, const std::vector<int>& a, const Eigen::VectorXd& gamma);
Eigen::MatrixXd probit_information(const Eigen::MatrixXd& x, const Eigen::VectorXd& gamma);

inline constexpr double kProbabilityClamp = 1e-6;

// Phi(x' gamma) clamped to [1e-6, 1 - 1e-6]. Column labels must match the fit.
Eigen::VectorXd predict_probit(const FitResult& fit, const DesignMatrix& rows);

}  // namespace causalmatch
