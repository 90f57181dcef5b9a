#pragma once

// Log-density primitives and small special functions shared by the models,
// the samplers, and the flow. The templated functions accept plain doubles or
// ad::Var so the same expression serves evaluation and differentiation.

#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "bayesbench/ad/tape.hpp"

namespace bayesbench::math {

inline constexpr double kLogTwoPi = 1.8378770664093454836;
inline constexpr double kSqrtTwoPi = 2.5066282746310005024;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * 0.70710678118654752440); }

// Inverse standard normal CDF. Acklam's rational approximation refined with
// one Halley step; max abs error well below 1e-12 on (0, 1).
inline double probit(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return kNegInf;
    if (p == 1.0) return -kNegInf;
    throw std::domain_error("probit: argument must lie in [0, 1]");
  }
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement against erfc.
  const double e = normal_cdf(x) - p;
  const double u = e * kSqrtTwoPi * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

template <class T>
T normal_logpdf(const T& x, double mean, double sd) {
  const T z = (x - mean) / sd;
  return -0.5 * kLogTwoPi - std::log(sd) - 0.5 * z * z;
}

// log Poisson(n | lambda), exact including the n! term.
template <class T>
T poisson_log_pmf(long n, const T& lambda) {
  using bayesbench::ad::value_of;
  if (n < 0) throw std::invalid_argument("poisson_log_pmf: n must be nonnegative");
  if (!(value_of(lambda) > 0.0))
    throw std::invalid_argument("poisson_log_pmf: lambda must be positive");
  using std::log;
  return static_cast<double>(n) * log(lambda) - lambda -
         std::lgamma(static_cast<double>(n) + 1.0);
}

// Normal(mean, sigma^2) truncated below at `lower`; -inf below the truncation.
template <class T>
T truncnorm_log_pdf(const T& x, double mean, double sigma, double lower) {
  using bayesbench::ad::value_of;
  if (!(sigma > 0.0)) throw std::invalid_argument("truncnorm_log_pdf: sigma must be positive");
  if (value_of(x) < lower) return T(kNegInf);
  const double log_mass_above = std::log(normal_cdf((mean - lower) / sigma));
  return normal_logpdf(x, mean, sigma) - log_mass_above;
}

template <class T>
T sigmoid(const T& v) {
  using bayesbench::ad::value_of;
  using std::exp;
  if (value_of(v) >= 0.0) {
    return 1.0 / (1.0 + exp(-v));
  }
  const T e = exp(v);
  return e / (1.0 + e);
}

// log sigmoid(v), stable for large |v|.
template <class T>
T log_sigmoid(const T& v) {
  using bayesbench::ad::value_of;
  using std::exp;
  using std::log1p;
  if (value_of(v) >= 0.0) return -log1p(exp(-v));
  return v - log1p(exp(v));
}

template <class T>
T logit(const T& u) {
  using std::log;
  using std::log1p;
  return log(u) - log1p(-u);
}

inline double log_sum_exp(std::span<const double> xs) {
  double m = kNegInf;
  for (double x : xs) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

// Streaming log-sum-exp; used by the evidence accumulators.
class LogSumExp {
 public:
  void add(double log_value) {
    if (log_value == kNegInf) return;
    if (log_value <= max_) {
      sum_ += std::exp(log_value - max_);
    } else {
      sum_ = sum_ * std::exp(max_ - log_value) + 1.0;
      max_ = log_value;
    }
  }
  double value() const {
    if (sum_ == 0.0) return kNegInf;
    return max_ + std::log(sum_);
  }
  bool empty() const { return sum_ == 0.0; }

 private:
  double max_ = kNegInf;
  double sum_ = 0.0;
};

}  // namespace bayesbench::math

namespace bayesbench::ad {

inline Var probit(const Var& p) {
  const double z = bayesbench::math::probit(p.val);
  const double d = bayesbench::math::kSqrtTwoPi * std::exp(0.5 * z * z);
  return detail::record_unary(p, z, d);
}

}  // namespace bayesbench::ad
