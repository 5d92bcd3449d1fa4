#include "causalmatch/normal.hpp"

#include <cmath>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace causalmatch::normal {

double pdf(double u) { return std::exp(log_pdf(u)); }

double log_pdf(double u) { return -0.5 * u * u - kLogSqrt2Pi; }

double cdf(double u) { return 0.5 * std::erfc(-u * kInvSqrt2); }

double log_cdf(double u) {
  if (u > 5.0) return std::log1p(-0.5 * std::erfc(u * kInvSqrt2));
  if (u >= -8.0) return std::log(cdf(u));
  const double tail = std::erfc(-u * kInvSqrt2);
  if (tail > 1e-300) return std::log(0.5 * tail);
  // Asymptotic expansion of the lower tail once erfc underflows (u < -37).
  const double z2 = 1.0 / (u * u);
  const double series = 1.0 - z2 * (1.0 - 3.0 * z2 * (1.0 - 5.0 * z2));
  return log_pdf(u) - std::log(-u) + std::log(series);
}

double mills_ratio(double u) {
  if (u >= -8.0) return pdf(u) / cdf(u);
  return std::exp(log_pdf(u) - log_cdf(u));
}

double quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

double student_t_quantile(double p, double df) {
  return boost::math::quantile(boost::math::students_t_distribution<double>(df), p);
}

}  // namespace causalmatch::normal
