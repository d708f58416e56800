#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "misp/data.hpp"
#include "misp/inference.hpp"
#include "misp/model.hpp"

namespace misp {

// One held-out measurement with its posterior-predictive draws.
struct HoldoutPoint {
  double depth = 0.0;
  double truth = 0.0;
  std::vector<double> draws;
};

// All held-out points of one core, with the weighting metadata of that core.
struct CoreHoldout {
  std::string site_id;
  int core_rep = 0;
  double x_max = 0.0;
  int n = 0;
  std::vector<HoldoutPoint> points;
};

struct IntegratedErrors {
  double ise = 0.0;
  double iae = 0.0;
};

// Empirical CRPS: mean |draw - truth| minus half the mean pairwise draw
// distance, via the O(M log M) sorted form.
double crps_empirical(const std::vector<double>& draws, double truth);

// Core-length-weighted integrated squared/absolute error of the predictive
// mean: per core, (x_max / n) * sum of (mean prediction - truth)^2 resp. |.|.
IntegratedErrors integrated_errors(const std::vector<CoreHoldout>& cores);

// CRPS summed over every held-out point.
double total_crps(const std::vector<CoreHoldout>& cores);

// Each total divided by the smallest; the best model scores 1.
std::vector<double> relative_crps(const std::vector<double>& totals);

struct CvPlan {
  int n_folds = 19;
  std::vector<int> assignment;  // core index -> fold
  void validate(int n_cores) const;
};

// Whole cores are dealt to folds; replicate cores at one site travel
// together so no fold trains at distance zero from its own holdout.
CvPlan make_cv_plan(const Dataset& data, int n_folds = 19,
                    std::uint64_t seed = 0);

struct CvMetrics {
  std::string model_label;
  double ise = 0.0;
  double iae = 0.0;
  double crps = 0.0;  // summed over holdout points
};

// One fit per fold on the retained cores, noisy-measurement prediction at
// each held-out core's own depths and weighting, metrics accumulated over
// all folds.
CvMetrics run_cv(const Dataset& data, const ModelConfig& cfg,
                 const SamplerConfig& sampler, const CvPlan& plan,
                 int threads = 1);

}  // namespace misp
