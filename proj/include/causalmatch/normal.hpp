#pragma once

// Standard normal density, distribution, and the log/ratio forms the probit
// likelihood needs in the tails.

namespace causalmatch::normal {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;
// Two-sided 95% critical value of the standard normal.
inline constexpr double kZ975 = 1.959963984540054;

double pdf(double u);
double log_pdf(double u);
double cdf(double u);

// log(Phi(u)), accurate for large negative u where Phi underflows.
double log_cdf(double u);

// phi(u) / Phi(u) without forming Phi(u) directly.
double mills_ratio(double u);

// Two-sided quantile helpers backed by Boost.Math.
double quantile(double p);
double student_t_quantile(double p, double df);

}  // namespace causalmatch::normal
