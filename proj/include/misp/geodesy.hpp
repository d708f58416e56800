#pragma once

#include <Eigen/Dense>
#include <vector>

namespace misp {

inline constexpr double kEarthRadiusKm = 6371.0;

struct SiteLocation {
  double latitude = 0.0;   // degrees, [-90, 90]
  double longitude = 0.0;  // degrees, (-180, 180]
  void validate() const;
};

enum class DistanceMetric { GreatCircle, Chordal3D };
enum class MaternSmoothness { Half, ThreeHalves, FiveHalves };

// GreatCircle distance is only positive definite with the exponential
// (nu = 1/2) member; the combination check lives in validate().
struct CovarianceSpec {
  DistanceMetric distance = DistanceMetric::GreatCircle;
  MaternSmoothness smoothness = MaternSmoothness::Half;
  void validate() const;
};

double great_circle(const SiteLocation& a, const SiteLocation& b);
double chordal_distance(const SiteLocation& a, const SiteLocation& b);
double site_distance(const CovarianceSpec& spec, const SiteLocation& a,
                     const SiteLocation& b);

// phi in 1/km, d in km.
double matern_corr(const CovarianceSpec& spec, double phi, double d);
// Partial derivative of matern_corr with respect to phi at fixed d.
double matern_corr_dphi(const CovarianceSpec& spec, double phi, double d);

Eigen::MatrixXd distance_matrix(const std::vector<SiteLocation>& sites,
                                const CovarianceSpec& spec);

// sigma2 * correlation with diagonal jitter, verified by Cholesky. Jitter
// starts at jitter_rel * sigma2 and escalates tenfold up to 1e-6 * sigma2
// before raising a conditioning error that names the closest site pair.
Eigen::MatrixXd covariance_matrix(const std::vector<SiteLocation>& sites,
                                  const CovarianceSpec& spec, double phi,
                                  double sigma2, double jitter_rel = 1e-10);

}  // namespace misp
