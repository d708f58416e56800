#include "misp/geodesy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "misp/errors.hpp"

namespace misp {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

// sin^2 of half the central angle (the haversine); shared by both metrics.
double half_angle_sin2(const SiteLocation& a, const SiteLocation& b) {
  const double lat1 = a.latitude * kDegToRad;
  const double lat2 = b.latitude * kDegToRad;
  const double dlat = lat2 - lat1;
  const double dlon = (b.longitude - a.longitude) * kDegToRad;
  const double s1 = std::sin(0.5 * dlat);
  const double s2 = std::sin(0.5 * dlon);
  const double h = s1 * s1 + std::cos(lat1) * std::cos(lat2) * s2 * s2;
  return std::clamp(h, 0.0, 1.0);
}

}  // namespace

void SiteLocation::validate() const {
  if (!(latitude >= -90.0 && latitude <= 90.0)) {
    throw_error(ErrorCategory::Data,
                "latitude " + std::to_string(latitude) + " outside [-90, 90]");
  }
  if (!(longitude > -180.0 && longitude <= 180.0)) {
    throw_error(ErrorCategory::Data, "longitude " + std::to_string(longitude) +
                                         " outside (-180, 180]");
  }
}

void CovarianceSpec::validate() const {
  if (distance == DistanceMetric::GreatCircle &&
      smoothness != MaternSmoothness::Half) {
    throw_error(ErrorCategory::Config,
                "great-circle distance is only valid with smoothness 1/2; use "
                "chordal distance for smoother members");
  }
}

double great_circle(const SiteLocation& a, const SiteLocation& b) {
  a.validate();
  b.validate();
  const double h = half_angle_sin2(a, b);
  return kEarthRadiusKm * 2.0 * std::asin(std::sqrt(h));
}

double chordal_distance(const SiteLocation& a, const SiteLocation& b) {
  a.validate();
  b.validate();
  // chord = 2R sin(theta/2) and sin(theta/2) = sqrt(h) exactly.
  return 2.0 * kEarthRadiusKm * std::sqrt(half_angle_sin2(a, b));
}

double site_distance(const CovarianceSpec& spec, const SiteLocation& a,
                     const SiteLocation& b) {
  return spec.distance == DistanceMetric::GreatCircle ? great_circle(a, b)
                                                      : chordal_distance(a, b);
}

double matern_corr(const CovarianceSpec& spec, double phi, double d) {
  spec.validate();
  if (!(phi > 0.0) || !(d >= 0.0)) {
    throw_error(ErrorCategory::Domain, "matern_corr requires phi > 0, d >= 0");
  }
  const double t = phi * d;
  switch (spec.smoothness) {
    case MaternSmoothness::Half:
      return std::exp(-t);
    case MaternSmoothness::ThreeHalves: {
      const double s = std::sqrt(3.0) * t;
      return (1.0 + s) * std::exp(-s);
    }
    case MaternSmoothness::FiveHalves: {
      const double s = std::sqrt(5.0) * t;
      return (1.0 + s + s * s / 3.0) * std::exp(-s);
    }
  }
  return 0.0;
}

double matern_corr_dphi(const CovarianceSpec& spec, double phi, double d) {
  spec.validate();
  if (!(phi > 0.0) || !(d >= 0.0)) {
    throw_error(ErrorCategory::Domain,
                "matern_corr_dphi requires phi > 0, d >= 0");
  }
  const double t = phi * d;
  switch (spec.smoothness) {
    case MaternSmoothness::Half:
      return -d * std::exp(-t);
    case MaternSmoothness::ThreeHalves: {
      const double s = std::sqrt(3.0) * t;
      return -3.0 * phi * d * d * std::exp(-s);
    }
    case MaternSmoothness::FiveHalves: {
      const double s = std::sqrt(5.0) * t;
      return -(5.0 * phi * d * d / 3.0) * (1.0 + s) * std::exp(-s);
    }
  }
  return 0.0;
}

Eigen::MatrixXd distance_matrix(const std::vector<SiteLocation>& sites,
                                const CovarianceSpec& spec) {
  const int n = static_cast<int>(sites.size());
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int k = i + 1; k < n; ++k) {
      const double dist = site_distance(spec, sites[i], sites[k]);
      d(i, k) = dist;
      d(k, i) = dist;
    }
  }
  return d;
}

Eigen::MatrixXd covariance_matrix(const std::vector<SiteLocation>& sites,
                                  const CovarianceSpec& spec, double phi,
                                  double sigma2, double jitter_rel) {
  if (!(sigma2 > 0.0)) {
    throw_error(ErrorCategory::Domain, "covariance scale must be > 0");
  }
  if (!(jitter_rel > 0.0)) {
    throw_error(ErrorCategory::Domain, "jitter must be > 0");
  }
  const int n = static_cast<int>(sites.size());
  const Eigen::MatrixXd d = distance_matrix(sites, spec);
  Eigen::MatrixXd cov(n, n);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < n; ++k) {
      cov(i, k) = sigma2 * matern_corr(spec, phi, d(i, k));
    }
  }
  double jitter = jitter_rel * sigma2;
  const double jitter_cap = std::max(1e-6 * sigma2, jitter);
  for (;;) {
    Eigen::MatrixXd trial = cov;
    trial.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(trial);
    if (llt.info() == Eigen::Success) return trial;
    if (jitter >= jitter_cap) break;
    jitter = std::min(jitter * 10.0, jitter_cap);
  }
  int ci = 0;
  int ck = n > 1 ? 1 : 0;
  double closest = n > 1 ? d(0, 1) : 0.0;
  for (int i = 0; i < n; ++i) {
    for (int k = i + 1; k < n; ++k) {
      if (d(i, k) < closest) {
        closest = d(i, k);
        ci = i;
        ck = k;
      }
    }
  }
  throw_error(ErrorCategory::Numeric,
              "site covariance is not positive definite after jitter "
              "escalation; closest site pair is (" +
                  std::to_string(ci) + ", " + std::to_string(ck) + ") at " +
                  std::to_string(closest) + " km");
}

}  // namespace misp
