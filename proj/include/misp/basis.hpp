#pragma once

#include <vector>

namespace misp {

enum class KernelFamily {
  MSpline,
  Gaussian,
  Laplace,
  AsymmetricLaplaceLeft,
  AsymmetricLaplaceRight,
};

// Knot layout shared by the spline and kernel bases. Interior knots must be
// strictly inside (x_min, x_max) and strictly increasing.
struct KnotConfig {
  std::vector<double> interior_knots;
  int order_l = 1;  // spline order; piecewise polynomial degree is order_l - 1
  double x_min = 0.0;
  double x_max = 140.0;

  int n_interior() const { return static_cast<int>(interior_knots.size()); }
  void validate() const;
};

struct KernelSpec {
  KernelFamily family = KernelFamily::MSpline;
  double bandwidth = 0.0;  // required > 0 for non-spline families
  double asymmetry = 1.0;  // ratio kappa, required > 0 for asymmetric Laplace
  void validate() const;
};

// Full basis description. For the MSpline family the design row holds I-spline
// values (J = L + order_l); for CDF-difference kernels it holds K_j(x) with
// centers at {x_min, interior knots} (J = L + 1).
struct BasisSpec {
  KnotConfig knots;
  KernelSpec kernel;

  int size() const;
  void validate() const;
};

// Augmented sequence: order_l copies of x_min, interior knots, order_l copies
// of x_max; length L + 2*order_l.
std::vector<double> augment_knots(const KnotConfig& cfg);

// j is 1-based (1 <= j <= L + order_l), matching the spline literature.
double mspline_eval(const KnotConfig& cfg, int j, double x);
double ispline_eval(const KnotConfig& cfg, int j, double x);

// Standard CDF of the kernel family at u (already scaled by bandwidth).
double kernel_cdf(const KernelSpec& spec, double u);

// K_j(x) = Ktilde((x - center)/h) - Ktilde((0 - center)/h).
double cdf_kernel_eval(const KernelSpec& spec, double center, double x);

// Centers for non-spline families: {x_min, kappa_1..kappa_L}.
std::vector<double> kernel_centers(const KnotConfig& cfg);

// Half the mean inter-knot gap over {x_min, interior knots, x_max}.
double default_bandwidth(const KnotConfig& cfg);

std::vector<double> design_row(const BasisSpec& spec, double x);
std::vector<std::vector<double>> design_matrix(const BasisSpec& spec,
                                               const std::vector<double>& depths);

}  // namespace misp
