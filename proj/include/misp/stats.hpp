#pragma once

#include <vector>

namespace misp {

double logistic(double x);
double log1pexp(double x);

double normal_logpdf(double x, double mean, double sd);
double normal_cdf(double x);
// Stable in the deep left tail (asymptotic series below x = -8).
double normal_logcdf(double x);
double normal_quantile(double p);

// Inverse Mills ratio phi(x)/Phi(x), stable for x << 0.
double inverse_mills(double x);

// Student-t with 4 degrees of freedom, standardized. Closed forms throughout.
double t4_logpdf(double t);
double t4_cdf(double t);
double t4_logcdf(double t);
double t4_quantile(double p);
// t4 hazard-style ratio f4(x)/F4(x), stable for x << 0.
double t4_inverse_mills(double x);

// Midpoint-interpolated sample quantile (h = n*q + 1/2 on 1-based order
// statistics). `sorted` must be ascending.
double quantile_sorted(const std::vector<double>& sorted, double q);

double mean(const std::vector<double>& v);
double variance(const std::vector<double>& v);  // denominator n - 1

}  // namespace misp
