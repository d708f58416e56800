#pragma once

// Shared oracles for the test suites: quadrature, finite differences, a KS
// test against an analytic CDF, a brute-force CRPS, and tiny dataset builders.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "misp/data.hpp"
#include "misp/errors.hpp"
#include "misp/geodesy.hpp"

namespace testutil {

// True iff fn throws misp::Error with the given category.
template <typename Fn>
bool throws_category(misp::ErrorCategory cat, Fn&& fn) {
  try {
    fn();
  } catch (const misp::Error& e) {
    return e.category() == cat;
  } catch (...) {
    return false;
  }
  return false;
}

// Adaptive Simpson on [a, b]; handles the piecewise integrands here fine as
// long as tol is not pushed below ~1e-12.
inline double simpson_step(const std::function<double(double)>& f, double a,
                           double b, double fa, double fm, double fb,
                           double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) < 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a,
                        double b, double tol = 1e-10) {
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_step(f, a, b, fa, fm, fb, whole, tol, 40);
}

// Central finite difference of a scalar function of a vector, one coordinate.
inline double fd_partial(const std::function<double(const std::vector<double>&)>& f,
                         std::vector<double> x, std::size_t i,
                         double h = 1e-5) {
  const double xi = x[i];
  x[i] = xi + h;
  const double up = f(x);
  x[i] = xi - h;
  const double dn = f(x);
  return (up - dn) / (2.0 * h);
}

inline double fd_derivative(const std::function<double(double)>& f, double x,
                            double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// One-sample Kolmogorov-Smirnov statistic against an analytic CDF.
inline double ks_statistic(std::vector<double> sample,
                           const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double F = cdf(sample[i]);
    d = std::max(d, std::abs(F - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - F));
  }
  return d;
}

// Asymptotic critical value at alpha = 0.01.
inline double ks_crit_01(std::size_t n) {
  return 1.6276 / std::sqrt(static_cast<double>(n));
}

// O(M^2) CRPS: mean |x - y| - 0.5 mean |x - x'|.
inline double crps_brute(const std::vector<double>& draws, double y) {
  const double M = static_cast<double>(draws.size());
  double term1 = 0.0;
  for (double x : draws) term1 += std::abs(x - y);
  term1 /= M;
  double term2 = 0.0;
  for (double a : draws)
    for (double b : draws) term2 += std::abs(a - b);
  term2 /= 2.0 * M * M;
  return term1 - term2;
}

inline misp::CoreRecord make_core(const std::string& site,
                                  const std::string& campaign, int rep,
                                  std::vector<double> depths,
                                  std::vector<double> densities) {
  misp::CoreRecord core;
  core.site_id = site;
  core.campaign = campaign;
  core.core_rep = rep;
  core.depths = std::move(depths);
  core.densities = std::move(densities);
  core.x_max = core.depths.empty() ? 0.0 : core.depths.back();
  return core;
}

// n sites roughly 2 km apart along a parallel near the pole.
inline std::vector<misp::SiteLocation> line_sites(int n, double lat = -75.0,
                                                  double step_deg = 0.07) {
  std::vector<misp::SiteLocation> sites;
  for (int i = 0; i < n; ++i) sites.push_back({lat, i * step_deg});
  return sites;
}

}  // namespace testutil
