#include "misp/basis.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "misp/errors.hpp"
#include "misp/stats.hpp"

namespace misp {

namespace {

// 4-point Gauss-Legendre on [-1, 1]; exact through degree 7, enough for the
// piecewise-polynomial M-spline integrands up to order 8.
constexpr double kGlNode[4] = {-0.8611363115940526, -0.3399810435848563,
                               0.3399810435848563, 0.8611363115940526};
constexpr double kGlWeight[4] = {0.3478548451374538, 0.6521451548625461,
                                 0.6521451548625461, 0.3478548451374538};

// First-order M-spline over [xi_j, xi_{j+1}]. Intervals are half-open at the
// right except at the global top knot, so that the recursion for higher
// orders stays continuous at interior knots; `closed_right` restores the
// closed-interval convention of the defining display for order-1 configs.
double m1(const std::vector<double>& xi, int j, double x, bool closed_right) {
  const double lo = xi[j - 1];
  const double hi = xi[j];
  if (hi <= lo) return 0.0;
  if (x < lo || x > hi) return 0.0;
  if (x == hi && !closed_right && hi != xi.back()) return 0.0;
  return 1.0 / (hi - lo);
}

double m_rec(const std::vector<double>& xi, int j, int l, double x,
             bool closed_right) {
  if (l == 1) return m1(xi, j, x, closed_right);
  const double lo = xi[j - 1];
  const double hi = xi[j + l - 1];
  if (hi <= lo) return 0.0;
  if (x < lo || x > hi) return 0.0;
  const double left = (x - lo) * m_rec(xi, j, l - 1, x, false);
  const double right = (hi - x) * m_rec(xi, j + 1, l - 1, x, false);
  return l * (left + right) / ((l - 1.0) * (hi - lo));
}

void check_basis_index(const KnotConfig& cfg, int j) {
  const int basis_count = cfg.n_interior() + cfg.order_l;
  if (j < 1 || j > basis_count) {
    throw_error(ErrorCategory::Index,
                "basis index " + std::to_string(j) + " outside 1.." +
                    std::to_string(basis_count));
  }
}

void check_depth_domain(const KnotConfig& cfg, double x) {
  if (!(x >= cfg.x_min && x <= cfg.x_max)) {
    throw_error(ErrorCategory::Domain,
                "depth " + std::to_string(x) + " outside [" +
                    std::to_string(cfg.x_min) + ", " +
                    std::to_string(cfg.x_max) + "]");
  }
}

}  // namespace

void KnotConfig::validate() const {
  if (order_l < 1) {
    throw_error(ErrorCategory::Config, "spline order must be >= 1");
  }
  if (!(x_min < x_max)) {
    throw_error(ErrorCategory::Config, "require x_min < x_max");
  }
  double prev = x_min;
  for (double k : interior_knots) {
    if (!(k > prev)) {
      throw_error(ErrorCategory::Config,
                  "interior knots must be strictly increasing inside (x_min, "
                  "x_max); offending knot " +
                      std::to_string(k));
    }
    prev = k;
  }
  if (!interior_knots.empty() && !(interior_knots.back() < x_max)) {
    throw_error(ErrorCategory::Config,
                "interior knots must lie strictly below x_max");
  }
}

void KernelSpec::validate() const {
  if (family == KernelFamily::MSpline) return;
  if (!(bandwidth > 0.0)) {
    throw_error(ErrorCategory::Config,
                "kernel bandwidth must be > 0 for non-spline families");
  }
  if ((family == KernelFamily::AsymmetricLaplaceLeft ||
       family == KernelFamily::AsymmetricLaplaceRight) &&
      !(asymmetry > 0.0)) {
    throw_error(ErrorCategory::Config,
                "asymmetric Laplace requires asymmetry > 0");
  }
}

int BasisSpec::size() const {
  if (kernel.family == KernelFamily::MSpline) {
    return knots.n_interior() + knots.order_l;
  }
  return knots.n_interior() + 1;
}

void BasisSpec::validate() const {
  knots.validate();
  kernel.validate();
}

std::vector<double> augment_knots(const KnotConfig& cfg) {
  cfg.validate();
  std::vector<double> xi;
  xi.reserve(cfg.n_interior() + 2 * cfg.order_l);
  for (int i = 0; i < cfg.order_l; ++i) xi.push_back(cfg.x_min);
  for (double k : cfg.interior_knots) xi.push_back(k);
  for (int i = 0; i < cfg.order_l; ++i) xi.push_back(cfg.x_max);
  return xi;
}

double mspline_eval(const KnotConfig& cfg, int j, double x) {
  check_basis_index(cfg, j);
  check_depth_domain(cfg, x);
  const std::vector<double> xi = augment_knots(cfg);
  return m_rec(xi, j, cfg.order_l, x, cfg.order_l == 1);
}

double ispline_eval(const KnotConfig& cfg, int j, double x) {
  check_basis_index(cfg, j);
  check_depth_domain(cfg, x);
  const std::vector<double> xi = augment_knots(cfg);
  const int l = cfg.order_l;
  const double support_lo = xi[j - 1];
  const double support_hi = xi[j + l - 1];
  if (x <= support_lo) return 0.0;
  if (x >= support_hi) return 1.0;
  // Exact span-by-span Gauss-Legendre integration of the recursion; the
  // integrand is polynomial of degree l - 1 on each span.
  double acc = 0.0;
  for (int k = j; k <= j + l - 1; ++k) {
    const double a = xi[k - 1];
    const double b = xi[k];
    if (b <= a) continue;
    if (a >= x) break;
    const double ub = std::min(b, x);
    const double half = 0.5 * (ub - a);
    const double mid = 0.5 * (ub + a);
    for (int g = 0; g < 4; ++g) {
      acc += half * kGlWeight[g] *
             m_rec(xi, j, l, mid + half * kGlNode[g], false);
    }
    if (b >= x) break;
  }
  return std::min(acc, 1.0);
}

double kernel_cdf(const KernelSpec& spec, double u) {
  switch (spec.family) {
    case KernelFamily::Gaussian:
      return normal_cdf(u);
    case KernelFamily::Laplace:
      return u < 0.0 ? 0.5 * std::exp(u) : 1.0 - 0.5 * std::exp(-u);
    case KernelFamily::AsymmetricLaplaceLeft:
    case KernelFamily::AsymmetricLaplaceRight: {
      // Standard kappa-form asymmetric Laplace CDF; the Right family mirrors
      // the skew by using 1/kappa.
      const double k = spec.family == KernelFamily::AsymmetricLaplaceLeft
                           ? spec.asymmetry
                           : 1.0 / spec.asymmetry;
      const double k2 = k * k;
      if (u < 0.0) return (k2 / (1.0 + k2)) * std::exp(u / k);
      return 1.0 - (1.0 / (1.0 + k2)) * std::exp(-k * u);
    }
    case KernelFamily::MSpline:
      break;
  }
  throw_error(ErrorCategory::Config,
              "kernel CDF undefined for the spline family");
}

double cdf_kernel_eval(const KernelSpec& spec, double center, double x) {
  spec.validate();
  if (spec.family == KernelFamily::MSpline) {
    throw_error(ErrorCategory::Config,
                "cdf_kernel_eval requires a non-spline family");
  }
  const double h = spec.bandwidth;
  return kernel_cdf(spec, (x - center) / h) -
         kernel_cdf(spec, (0.0 - center) / h);
}

std::vector<double> kernel_centers(const KnotConfig& cfg) {
  cfg.validate();
  std::vector<double> centers;
  centers.reserve(cfg.n_interior() + 1);
  centers.push_back(cfg.x_min);
  for (double k : cfg.interior_knots) centers.push_back(k);
  return centers;
}

double default_bandwidth(const KnotConfig& cfg) {
  cfg.validate();
  const double mean_gap = (cfg.x_max - cfg.x_min) / (cfg.n_interior() + 1.0);
  return 0.5 * mean_gap;
}

std::vector<double> design_row(const BasisSpec& spec, double x) {
  check_depth_domain(spec.knots, x);
  const int J = spec.size();
  std::vector<double> row(J);
  if (spec.kernel.family == KernelFamily::MSpline) {
    for (int j = 1; j <= J; ++j) row[j - 1] = ispline_eval(spec.knots, j, x);
  } else {
    const std::vector<double> centers = kernel_centers(spec.knots);
    for (int j = 0; j < J; ++j) {
      row[j] = cdf_kernel_eval(spec.kernel, centers[j], x);
    }
  }
  return row;
}

std::vector<std::vector<double>> design_matrix(
    const BasisSpec& spec, const std::vector<double>& depths) {
  std::vector<std::vector<double>> rows;
  rows.reserve(depths.size());
  for (double x : depths) rows.push_back(design_row(spec, x));
  return rows;
}

}  // namespace misp
