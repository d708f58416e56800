#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "misp/data.hpp"
#include "misp/errors.hpp"
#include "misp/rng.hpp"
#include "misp/scoring.hpp"
#include "misp/simulate.hpp"

using misp::CoreHoldout;
using misp::CvPlan;
using misp::ErrorCategory;
using misp::HoldoutPoint;
using testutil::throws_category;

TEST_CASE("empirical CRPS") {
  SUBCASE("hand case: draws {0,1}, truth 0") {
    CHECK(misp::crps_empirical({0.0, 1.0}, 0.0) == doctest::Approx(0.25));
    CHECK(misp::crps_empirical({1.0, 0.0}, 0.0) == doctest::Approx(0.25));
  }
  SUBCASE("point mass scores its distance to the truth") {
    const std::vector<double> mass(17, 3.0);
    CHECK(misp::crps_empirical(mass, 5.5) == doctest::Approx(2.5));
    CHECK(misp::crps_empirical(mass, 3.0) == doctest::Approx(0.0));
  }
  SUBCASE("sorted fast path equals the brute-force double sum") {
    misp::Rng rng(101);
    for (int trial = 0; trial < 200; ++trial) {
      const int m = 2 + static_cast<int>(rng.uniform_index(499));
      std::vector<double> draws(m);
      for (auto& d : draws) d = rng.normal(rng.uniform(-2.0, 2.0), 1.5);
      const double y = rng.normal(0.0, 2.0);
      const double fast = misp::crps_empirical(draws, y);
      const double brute = testutil::crps_brute(draws, y);
      CHECK(std::abs(fast - brute) < 1e-12);
      CHECK(fast >= 0.0);
    }
  }
  SUBCASE("translation and scale equivariance") {
    misp::Rng rng(102);
    std::vector<double> draws(40);
    for (auto& d : draws) d = rng.normal();
    const double y = 0.3;
    const double base = misp::crps_empirical(draws, y);
    std::vector<double> shifted = draws;
    for (auto& d : shifted) d += 7.5;
    CHECK(misp::crps_empirical(shifted, y + 7.5) ==
          doctest::Approx(base).epsilon(1e-12));
    std::vector<double> scaled = draws;
    for (auto& d : scaled) d *= 3.0;
    CHECK(misp::crps_empirical(scaled, 3.0 * y) ==
          doctest::Approx(3.0 * base).epsilon(1e-12));
  }
  SUBCASE("fewer than two draws is a data error") {
    CHECK(throws_category(ErrorCategory::Data,
                          [] { misp::crps_empirical({}, 0.0); }));
    CHECK(throws_category(ErrorCategory::Data,
                          [] { misp::crps_empirical({1.0}, 0.0); }));
  }
}

TEST_CASE("integrated errors") {
  auto point = [](double depth, double truth, double pred) {
    HoldoutPoint pt;
    pt.depth = depth;
    pt.truth = truth;
    pt.draws = {pred, pred};  // mean prediction == pred
    return pt;
  };

  SUBCASE("hand case") {
    CoreHoldout core;
    core.site_id = "a";
    core.x_max = 10.0;
    core.n = 2;
    core.points = {point(3.0, 0.5, 0.6), point(8.0, 0.7, 0.9)};
    // squared errors {0.01, 0.04}, abs errors {0.1, 0.2}
    const auto ie = misp::integrated_errors({core});
    CHECK(ie.ise == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(ie.iae == doctest::Approx(1.5).epsilon(1e-12));
  }
  SUBCASE("doubling the core length doubles the integral") {
    CoreHoldout core;
    core.site_id = "a";
    core.x_max = 10.0;
    core.n = 2;
    core.points = {point(3.0, 0.5, 0.6), point(8.0, 0.7, 0.9)};
    CoreHoldout longer = core;
    longer.x_max = 20.0;
    CHECK(misp::integrated_errors({longer}).ise ==
          doctest::Approx(2.0 * misp::integrated_errors({core}).ise));
  }
  SUBCASE("additivity over cores") {
    CoreHoldout a;
    a.site_id = "a";
    a.x_max = 10.0;
    a.n = 1;
    a.points = {point(3.0, 0.5, 0.6)};
    CoreHoldout b;
    b.site_id = "b";
    b.x_max = 50.0;
    b.n = 2;
    b.points = {point(8.0, 0.7, 0.9), point(20.0, 0.8, 0.75)};
    const auto ia = misp::integrated_errors({a});
    const auto ib = misp::integrated_errors({b});
    const auto both = misp::integrated_errors({a, b});
    CHECK(both.ise == doctest::Approx(ia.ise + ib.ise).epsilon(1e-12));
    CHECK(both.iae == doctest::Approx(ia.iae + ib.iae).epsilon(1e-12));
  }
  SUBCASE("mean of the predictive draws is what is scored") {
    CoreHoldout core;
    core.site_id = "a";
    core.x_max = 6.0;
    core.n = 1;
    HoldoutPoint pt;
    pt.depth = 2.0;
    pt.truth = 1.0;
    pt.draws = {0.0, 2.0, 4.0};  // mean 2 -> err 1
    core.points = {pt};
    CHECK(misp::integrated_errors({core}).ise == doctest::Approx(6.0));
  }
  SUBCASE("metadata and draw contracts") {
    CoreHoldout core;
    core.site_id = "a";
    core.x_max = 0.0;
    core.n = 2;
    CHECK(throws_category(ErrorCategory::Data,
                          [&] { misp::integrated_errors({core}); }));
    core.x_max = 5.0;
    core.n = 0;
    CHECK(throws_category(ErrorCategory::Data,
                          [&] { misp::integrated_errors({core}); }));
    core.n = 1;
    HoldoutPoint empty;
    empty.depth = 1.0;
    empty.truth = 0.4;
    core.points = {empty};
    CHECK(throws_category(ErrorCategory::Data,
                          [&] { misp::integrated_errors({core}); }));
  }
}

TEST_CASE("CRPS totals and ratios") {
  SUBCASE("total sums every holdout point") {
    CoreHoldout a;
    a.site_id = "a";
    a.x_max = 10.0;
    a.n = 2;
    HoldoutPoint p1;
    p1.truth = 0.0;
    p1.draws = {0.0, 1.0};
    HoldoutPoint p2;
    p2.truth = 3.0;
    p2.draws = {3.0, 3.0, 3.0};
    a.points = {p1, p2};
    CHECK(misp::total_crps({a}) == doctest::Approx(0.25));
  }
  SUBCASE("published ratio arithmetic") {
    const auto rel = misp::relative_crps({1.3712e-2, 1.4867e-2});
    REQUIRE(rel.size() == 2);
    CHECK(rel[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rel[1] ==
          doctest::Approx(1.4867e-2 / 1.3712e-2).epsilon(1e-12));
    CHECK(std::abs(rel[1] - 1.0843) <= 1e-4);
  }
  SUBCASE("best model pins the scale at one") {
    const auto rel = misp::relative_crps({4.0, 2.0, 3.0});
    CHECK(rel[0] == doctest::Approx(2.0));
    CHECK(rel[1] == doctest::Approx(1.0));
    CHECK(rel[2] == doctest::Approx(1.5));
  }
  SUBCASE("degenerate totals rejected") {
    CHECK(throws_category(ErrorCategory::Data,
                          [] { misp::relative_crps({}); }));
    CHECK(throws_category(ErrorCategory::Data,
                          [] { misp::relative_crps({1.0, 0.0}); }));
    CHECK(throws_category(ErrorCategory::Data,
                          [] { misp::relative_crps({1.0, -2.0}); }));
  }
}

namespace {

misp::Dataset two_site_dataset() {
  std::vector<misp::CoreRecord> cores;
  cores.push_back(testutil::make_core("a", "c1", 0, {2, 10, 30, 70},
                                      {0.36, 0.48, 0.66, 0.85}));
  cores.push_back(testutil::make_core("a", "c1", 1, {3, 12, 35, 80},
                                      {0.37, 0.50, 0.68, 0.86}));
  cores.push_back(testutil::make_core("b", "c1", 0, {2, 8, 25, 60},
                                      {0.40, 0.47, 0.63, 0.82}));
  cores.push_back(testutil::make_core("b", "c1", 1, {4, 15, 40, 90},
                                      {0.42, 0.55, 0.70, 0.88}));
  const auto sites = testutil::line_sites(2);
  return misp::build_dataset(
      cores, {sites[0], sites[0], sites[1], sites[1]});
}

}  // namespace

TEST_CASE("cross-validation plans") {
  const misp::Dataset data = two_site_dataset();

  SUBCASE("replicate cores at one site travel together") {
    const CvPlan plan = misp::make_cv_plan(data, 2, 7);
    REQUIRE(plan.assignment.size() == 4);
    CHECK(plan.assignment[0] == plan.assignment[1]);
    CHECK(plan.assignment[2] == plan.assignment[3]);
    CHECK(plan.assignment[0] != plan.assignment[2]);
  }
  SUBCASE("deterministic in the seed, shuffled across seeds") {
    const CvPlan p1 = misp::make_cv_plan(data, 2, 7);
    const CvPlan p2 = misp::make_cv_plan(data, 2, 7);
    CHECK(p1.assignment == p2.assignment);
    // with two groups the only variation is which site lands in fold 0
    bool saw_flip = false;
    for (std::uint64_t s = 0; s < 16 && !saw_flip; ++s) {
      saw_flip = misp::make_cv_plan(data, 2, s).assignment != p1.assignment;
    }
    CHECK(saw_flip);
  }
  SUBCASE("more folds than cores is a plan error") {
    CHECK(throws_category(ErrorCategory::Plan,
                          [&] { misp::make_cv_plan(data, 5, 0); }));
  }
  SUBCASE("validation rejects malformed plans") {
    CvPlan plan;
    plan.n_folds = 2;
    plan.assignment = {0, 0, 1};  // wrong size for 4 cores
    CHECK(throws_category(ErrorCategory::Plan, [&] { plan.validate(4); }));
    plan.assignment = {0, 0, 0, 0};  // fold 1 empty, fold 0 holds all
    CHECK(throws_category(ErrorCategory::Plan, [&] { plan.validate(4); }));
    plan.assignment = {0, 0, 1, 3};  // fold index out of range
    CHECK(throws_category(ErrorCategory::Plan, [&] { plan.validate(4); }));
    plan.n_folds = 1;
    plan.assignment = {0, 0, 0, 0};
    CHECK(throws_category(ErrorCategory::Plan, [&] { plan.validate(4); }));
    plan.n_folds = 2;
    plan.assignment = {0, 1, 0, 1};
    plan.validate(4);  // sane plan passes
  }
}

TEST_CASE("cross-validation run mechanics") {
  const misp::Dataset data = two_site_dataset();
  misp::ModelConfig cfg = misp::default_model_config();
  cfg.label = "full";

  misp::SamplerConfig sampler;
  sampler.n_chains = 2;
  sampler.n_warmup = 200;
  sampler.n_keep = 200;
  sampler.seed = 99;

  const CvPlan plan = misp::make_cv_plan(data, 2, 3);
  const misp::CvMetrics metrics = misp::run_cv(data, cfg, sampler, plan);

  SUBCASE("metrics are labelled, finite, and positive") {
    CHECK(metrics.model_label == "full");
    CHECK(std::isfinite(metrics.ise));
    CHECK(std::isfinite(metrics.iae));
    CHECK(std::isfinite(metrics.crps));
    CHECK(metrics.ise > 0.0);
    CHECK(metrics.iae > 0.0);
    CHECK(metrics.crps > 0.0);
  }
  SUBCASE("deterministic under the plan and seed") {
    const misp::CvMetrics again = misp::run_cv(data, cfg, sampler, plan);
    CHECK(again.ise == metrics.ise);
    CHECK(again.iae == metrics.iae);
    CHECK(again.crps == metrics.crps);
  }
  SUBCASE("a different plan changes the holdouts") {
    const CvPlan flipped = misp::make_cv_plan(data, 2, 1);
    if (flipped.assignment != plan.assignment) {
      const misp::CvMetrics other = misp::run_cv(data, cfg, sampler, flipped);
      CHECK(other.crps != metrics.crps);
    }
  }
}
