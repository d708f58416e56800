#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "misp/errors.hpp"
#include "misp/geodesy.hpp"
#include "misp/rng.hpp"

using misp::CovarianceSpec;
using misp::DistanceMetric;
using misp::ErrorCategory;
using misp::MaternSmoothness;
using misp::SiteLocation;
using testutil::throws_category;

namespace {

std::vector<SiteLocation> random_sites(int n, misp::Rng& rng) {
  std::vector<SiteLocation> sites;
  for (int i = 0; i < n; ++i) {
    sites.push_back({rng.uniform(-89.0, -60.0), rng.uniform(-179.0, 180.0)});
  }
  return sites;
}

}  // namespace

TEST_CASE("great-circle distances") {
  const double R = misp::kEarthRadiusKm;
  SUBCASE("antipodal points give half the circumference") {
    CHECK(misp::great_circle({0.0, 0.0}, {0.0, 180.0}) ==
          doctest::Approx(M_PI * R).epsilon(1e-12));
    CHECK(misp::great_circle({90.0, 0.0}, {-90.0, 0.0}) ==
          doctest::Approx(M_PI * R).epsilon(1e-12));
  }
  SUBCASE("quarter circumference") {
    CHECK(misp::great_circle({0.0, 0.0}, {0.0, 90.0}) ==
          doctest::Approx(0.5 * M_PI * R).epsilon(1e-12));
    CHECK(misp::great_circle({0.0, 0.0}, {90.0, 0.0}) ==
          doctest::Approx(0.5 * M_PI * R).epsilon(1e-12));
  }
  SUBCASE("coincident points") {
    CHECK(misp::great_circle({-75.0, 123.4}, {-75.0, 123.4}) == 0.0);
  }
  SUBCASE("one degree of meridian") {
    CHECK(misp::great_circle({0.0, 0.0}, {1.0, 0.0}) ==
          doctest::Approx(M_PI * R / 180.0).epsilon(1e-12));
  }
  SUBCASE("meridian segments compose") {
    const double d01 = misp::great_circle({0.0, 10.0}, {1.0, 10.0});
    const double d12 = misp::great_circle({1.0, 10.0}, {2.0, 10.0});
    const double d02 = misp::great_circle({0.0, 10.0}, {2.0, 10.0});
    CHECK(d02 == doctest::Approx(d01 + d12).epsilon(1e-12));
  }
  SUBCASE("symmetry and triangle inequality") {
    misp::Rng rng(5);
    const auto sites = random_sites(12, rng);
    for (std::size_t i = 0; i < sites.size(); ++i) {
      for (std::size_t j = 0; j < sites.size(); ++j) {
        const double dij = misp::great_circle(sites[i], sites[j]);
        CHECK(dij == misp::great_circle(sites[j], sites[i]));
        CHECK(dij >= 0.0);
        for (std::size_t k = 0; k < sites.size(); ++k) {
          CHECK(dij <= misp::great_circle(sites[i], sites[k]) +
                           misp::great_circle(sites[k], sites[j]) + 1e-9);
        }
      }
    }
  }
  SUBCASE("invalid coordinates rejected") {
    CHECK(throws_category(ErrorCategory::Data, [] {
      misp::great_circle({-91.0, 0.0}, {0.0, 0.0});
    }));
    CHECK(throws_category(ErrorCategory::Data, [] {
      misp::great_circle({0.0, 0.0}, {0.0, 180.5});
    }));
    CHECK(throws_category(ErrorCategory::Data, [] {
      misp::great_circle({0.0, -180.0}, {0.0, 0.0});
    }));
  }
}

TEST_CASE("chordal distances") {
  const double R = misp::kEarthRadiusKm;
  SUBCASE("antipodal points give the diameter") {
    CHECK(misp::chordal_distance({0.0, 0.0}, {0.0, 180.0}) ==
          doctest::Approx(2.0 * R).epsilon(1e-12));
  }
  SUBCASE("right central angle gives R sqrt(2)") {
    CHECK(misp::chordal_distance({0.0, 0.0}, {0.0, 90.0}) ==
          doctest::Approx(R * std::sqrt(2.0)).epsilon(1e-12));
  }
  SUBCASE("chord never exceeds the arc") {
    misp::Rng rng(11);
    const auto sites = random_sites(20, rng);
    for (std::size_t i = 0; i + 1 < sites.size(); ++i) {
      const double chord = misp::chordal_distance(sites[i], sites[i + 1]);
      const double arc = misp::great_circle(sites[i], sites[i + 1]);
      CHECK(chord <= arc + 1e-12);
      // chord = 2R sin(arc / 2R)
      CHECK(chord ==
            doctest::Approx(2.0 * R * std::sin(arc / (2.0 * R))).epsilon(1e-10));
    }
  }
  SUBCASE("site_distance dispatches on the metric") {
    const SiteLocation a{-70.0, 10.0};
    const SiteLocation b{-72.0, 30.0};
    CovarianceSpec gc;
    gc.distance = DistanceMetric::GreatCircle;
    CovarianceSpec ch;
    ch.distance = DistanceMetric::Chordal3D;
    CHECK(misp::site_distance(gc, a, b) == misp::great_circle(a, b));
    CHECK(misp::site_distance(ch, a, b) == misp::chordal_distance(a, b));
  }
}

TEST_CASE("Matern correlations") {
  CovarianceSpec gc;  // exponential on great-circle
  CovarianceSpec ch15;
  ch15.distance = DistanceMetric::Chordal3D;
  ch15.smoothness = MaternSmoothness::ThreeHalves;
  CovarianceSpec ch25;
  ch25.distance = DistanceMetric::Chordal3D;
  ch25.smoothness = MaternSmoothness::FiveHalves;

  SUBCASE("closed-form values") {
    CHECK(misp::matern_corr(gc, 0.001, 1000.0) ==
          doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
    const double s3 = std::sqrt(3.0);
    CHECK(misp::matern_corr(ch15, 0.001, 1000.0) ==
          doctest::Approx((1.0 + s3) * std::exp(-s3)).epsilon(1e-12));
    const double s5 = std::sqrt(5.0);
    CHECK(misp::matern_corr(ch25, 0.001, 1000.0) ==
          doctest::Approx((1.0 + s5 + s5 * s5 / 3.0) * std::exp(-s5))
              .epsilon(1e-12));
  }
  SUBCASE("unit at zero distance, decreasing in distance and phi") {
    for (const auto& spec : {gc, ch15, ch25}) {
      CHECK(misp::matern_corr(spec, 0.01, 0.0) == 1.0);
      double prev = 1.0;
      for (double d : {1.0, 10.0, 100.0, 1000.0, 5000.0}) {
        const double c = misp::matern_corr(spec, 0.01, d);
        CHECK(c < prev);
        CHECK(c > 0.0);
        prev = c;
      }
      CHECK(misp::matern_corr(spec, 0.02, 500.0) <
            misp::matern_corr(spec, 0.01, 500.0));
    }
  }
  SUBCASE("phi derivative matches finite differences") {
    for (const auto& spec : {gc, ch15, ch25}) {
      for (double phi : {2e-4, 1e-3, 5e-2}) {
        for (double d : {0.0, 3.0, 120.0, 2200.0}) {
          const double a = misp::matern_corr_dphi(spec, phi, d);
          const double fd = testutil::fd_derivative(
              [&](double p) { return misp::matern_corr(spec, p, d); }, phi,
              phi * 1e-5);
          CHECK(a == doctest::Approx(fd).epsilon(1e-6));
        }
      }
    }
  }
  SUBCASE("great-circle restricted to the exponential member") {
    CovarianceSpec bad;
    bad.distance = DistanceMetric::GreatCircle;
    bad.smoothness = MaternSmoothness::ThreeHalves;
    CHECK(throws_category(ErrorCategory::Config,
                          [&] { misp::matern_corr(bad, 0.01, 1.0); }));
  }
  SUBCASE("domain errors") {
    CHECK(throws_category(ErrorCategory::Domain,
                          [&] { misp::matern_corr(gc, 0.0, 1.0); }));
    CHECK(throws_category(ErrorCategory::Domain,
                          [&] { misp::matern_corr(gc, 0.01, -1.0); }));
  }
}

TEST_CASE("covariance matrices") {
  SUBCASE("single site") {
    const std::vector<SiteLocation> one = {{-75.0, 0.0}};
    const auto cov = misp::covariance_matrix(one, CovarianceSpec{}, 0.01, 2.5);
    REQUIRE(cov.rows() == 1);
    CHECK(cov(0, 0) == doctest::Approx(2.5).epsilon(1e-9));
  }
  SUBCASE("coincident pair saturates at sigma2 plus jitter") {
    const std::vector<SiteLocation> dup = {{-75.0, 0.0}, {-75.0, 0.0}};
    const auto cov = misp::covariance_matrix(dup, CovarianceSpec{}, 0.01, 1.0);
    CHECK(cov(0, 1) == doctest::Approx(1.0));
    CHECK(cov(1, 0) == doctest::Approx(1.0));
    CHECK(cov(0, 0) >= 1.0);
    CHECK(cov(0, 0) <= 1.0 + 1e-6);
  }
  SUBCASE("distance matrix zero diagonal and symmetric") {
    misp::Rng rng(23);
    const auto sites = random_sites(8, rng);
    const auto d = misp::distance_matrix(sites, CovarianceSpec{});
    for (int i = 0; i < 8; ++i) {
      CHECK(d(i, i) == 0.0);
      for (int j = 0; j < 8; ++j) CHECK(d(i, j) == d(j, i));
    }
  }
  SUBCASE("positive semidefinite for many random layouts") {
    misp::Rng rng(37);
    CovarianceSpec ch25;
    ch25.distance = DistanceMetric::Chordal3D;
    ch25.smoothness = MaternSmoothness::FiveHalves;
    for (int trial = 0; trial < 5; ++trial) {
      const auto sites = random_sites(50, rng);
      for (const auto& spec : {CovarianceSpec{}, ch25}) {
        const double sigma2 = rng.uniform(0.1, 5.0);
        const auto cov =
            misp::covariance_matrix(sites, spec, rng.uniform(1e-4, 1e-1),
                                    sigma2);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        CHECK(es.eigenvalues().minCoeff() >= -1e-8 * sigma2);
        Eigen::LLT<Eigen::MatrixXd> llt(cov);
        CHECK(llt.info() == Eigen::Success);
      }
    }
  }
  SUBCASE("scale must be positive") {
    const std::vector<SiteLocation> one = {{-75.0, 0.0}};
    CHECK(throws_category(ErrorCategory::Domain, [&] {
      misp::covariance_matrix(one, CovarianceSpec{}, 0.01, 0.0);
    }));
  }
}
