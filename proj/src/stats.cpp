#include "misp/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "misp/errors.hpp"

namespace misp {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kSqrt2 = std::numbers::sqrt2;
constexpr double kPi = std::numbers::pi;
}  // namespace

double logistic(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log1pexp(double x) {
  if (x > 33.0) return x;
  if (x > -37.0) return std::log1p(std::exp(x));
  return std::exp(x);
}

double normal_logpdf(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * kLog2Pi - std::log(sd) - 0.5 * z * z;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_logcdf(double x) {
  if (x >= -8.0) {
    return std::log(0.5 * std::erfc(-x / kSqrt2));
  }
  // Deep left tail: erfc underflows the log above long before -38, so switch
  // to the asymptotic expansion
  //   Phi(x) = phi(x)/(-x) * sum_k (-1)^k (2k-1)!! / x^{2k},
  // truncated adaptively where the (divergent) series terms stop shrinking.
  const double x2 = x * x;
  double sum = 1.0;
  double term = 1.0;
  double prev = 1.0;
  for (int k = 1; k <= 24; ++k) {
    term *= -(2.0 * k - 1.0) / x2;
    if (std::abs(term) >= prev) break;
    sum += term;
    prev = std::abs(term);
    if (prev < 1e-17) break;
  }
  return -0.5 * x2 - 0.5 * kLog2Pi - std::log(-x) + std::log(sum);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw_error(ErrorCategory::Domain, "normal_quantile requires p in (0, 1)");
  }
  // Acklam's rational approximation, then one Halley step for full precision.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * kPi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double inverse_mills(double x) {
  return std::exp(normal_logpdf(x, 0.0, 1.0) - normal_logcdf(x));
}

double t4_logpdf(double t) {
  // density (3/8)(1 + t^2/4)^{-5/2}
  return std::log(0.375) - 2.5 * std::log1p(0.25 * t * t);
}

double t4_cdf(double t) {
  const double r = std::sqrt(t * t + 4.0);
  if (t >= 0.0) {
    const double s = t / r;
    return 0.25 * (1.0 + s) * (1.0 + s) * (2.0 - s);
  }
  // 1 + s computed rationalized to avoid cancellation for t << 0.
  const double one_plus_s = 4.0 / (r * (r - t));
  const double s = one_plus_s - 1.0;
  return 0.25 * one_plus_s * one_plus_s * (2.0 - s);
}

double t4_logcdf(double t) {
  const double r = std::sqrt(t * t + 4.0);
  if (t >= 0.0) {
    return std::log(t4_cdf(t));
  }
  const double one_plus_s = 4.0 / (r * (r - t));
  const double s = one_plus_s - 1.0;
  return std::log(0.25) + 2.0 * std::log(one_plus_s) + std::log(2.0 - s);
}

double t4_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw_error(ErrorCategory::Domain, "t4_quantile requires p in (0, 1)");
  }
  // F4(t) = (2 + 3s - s^3)/4 with s = t/sqrt(t^2+4), so s solves a depressed
  // cubic with the unique root in (-1, 1) given by the trigonometric form.
  const double s =
      2.0 * std::cos(std::acos(1.0 - 2.0 * p) / 3.0 - 2.0 * kPi / 3.0);
  return 2.0 * s / std::sqrt(std::max((1.0 - s) * (1.0 + s), 1e-300));
}

double t4_inverse_mills(double x) {
  return std::exp(t4_logpdf(x) - t4_logcdf(x));
}

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  if (n == 0) {
    throw_error(ErrorCategory::Domain, "quantile of empty sample");
  }
  const double h = static_cast<double>(n) * q + 0.5;
  if (h <= 1.0) return sorted.front();
  if (h >= static_cast<double>(n)) return sorted.back();
  const double lo = std::floor(h);
  const std::size_t i = static_cast<std::size_t>(lo) - 1;
  const double frac = h - lo;
  return sorted[i] + frac * (sorted[i + 1] - sorted[i]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) throw_error(ErrorCategory::Domain, "mean of empty sample");
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
  if (v.size() < 2) {
    throw_error(ErrorCategory::Domain, "variance needs at least two values");
  }
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace misp
