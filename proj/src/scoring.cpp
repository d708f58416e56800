#include "misp/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "misp/errors.hpp"
#include "misp/predict.hpp"
#include "misp/rng.hpp"
#include "misp/stats.hpp"

namespace misp {

double crps_empirical(const std::vector<double>& draws, double truth) {
  const int m = static_cast<int>(draws.size());
  if (m < 2) {
    throw_error(ErrorCategory::Data,
                "CRPS needs at least two predictive draws");
  }
  std::vector<double> x = draws;
  std::sort(x.begin(), x.end());
  double abs_term = 0.0;
  double pair_term = 0.0;
  for (int i = 0; i < m; ++i) {
    abs_term += std::abs(x[i] - truth);
    pair_term += (2.0 * i + 1.0 - m) * x[i];
  }
  return abs_term / m - pair_term / (static_cast<double>(m) * m);
}

IntegratedErrors integrated_errors(const std::vector<CoreHoldout>& cores) {
  IntegratedErrors out;
  for (const auto& core : cores) {
    if (core.n < 1 || !(core.x_max > 0.0)) {
      throw_error(ErrorCategory::Data,
                  "holdout core " + core.site_id +
                      " is missing its (n, x_max) metadata");
    }
    double se = 0.0;
    double ae = 0.0;
    for (const auto& pt : core.points) {
      if (pt.draws.empty()) {
        throw_error(ErrorCategory::Data,
                    "holdout point without predictive draws");
      }
      const double err = mean(pt.draws) - pt.truth;
      se += err * err;
      ae += std::abs(err);
    }
    out.ise += core.x_max / core.n * se;
    out.iae += core.x_max / core.n * ae;
  }
  return out;
}

double total_crps(const std::vector<CoreHoldout>& cores) {
  double total = 0.0;
  for (const auto& core : cores) {
    for (const auto& pt : core.points) {
      total += crps_empirical(pt.draws, pt.truth);
    }
  }
  return total;
}

std::vector<double> relative_crps(const std::vector<double>& totals) {
  if (totals.empty()) {
    throw_error(ErrorCategory::Data, "no CRPS totals to compare");
  }
  double lo = totals[0];
  for (double t : totals) {
    if (!(t > 0.0)) {
      throw_error(ErrorCategory::Data,
                  "CRPS totals must be positive for relative comparison");
    }
    lo = std::min(lo, t);
  }
  std::vector<double> out;
  out.reserve(totals.size());
  for (double t : totals) out.push_back(t / lo);
  return out;
}

void CvPlan::validate(int n_cores) const {
  if (static_cast<int>(assignment.size()) != n_cores) {
    throw_error(ErrorCategory::Plan,
                "fold assignment must cover every core exactly once");
  }
  if (n_folds < 2 || n_folds > n_cores) {
    throw_error(ErrorCategory::Plan,
                "fold count must lie in [2, n_cores]");
  }
  std::vector<int> sizes(n_folds, 0);
  for (int f : assignment) {
    if (f < 0 || f >= n_folds) {
      throw_error(ErrorCategory::Plan,
                  "fold index " + std::to_string(f) + " out of range");
    }
    ++sizes[f];
  }
  for (int f = 0; f < n_folds; ++f) {
    if (sizes[f] == 0) {
      throw_error(ErrorCategory::Plan,
                  "fold " + std::to_string(f) + " holds no cores");
    }
    if (sizes[f] == n_cores) {
      throw_error(ErrorCategory::Plan,
                  "fold " + std::to_string(f) + " leaves no training cores");
    }
  }
}

CvPlan make_cv_plan(const Dataset& data, int n_folds, std::uint64_t seed) {
  const int n_cores = data.n_cores();
  if (n_folds > n_cores) {
    throw_error(ErrorCategory::Plan, "more folds than cores");
  }
  // Site groups, in first-seen order, then a seeded shuffle of the groups.
  std::vector<std::vector<int>> groups(data.n_sites());
  for (int c = 0; c < n_cores; ++c) {
    groups[data.cores[c].site_index].push_back(c);
  }
  Rng rng(seed);
  for (int i = static_cast<int>(groups.size()) - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_index(i + 1));
    std::swap(groups[i], groups[j]);
  }
  CvPlan plan;
  plan.n_folds = n_folds;
  plan.assignment.assign(n_cores, -1);
  int g = 0;
  for (const auto& group : groups) {
    for (int c : group) plan.assignment[c] = g % n_folds;
    ++g;
  }
  plan.validate(n_cores);
  return plan;
}

CvMetrics run_cv(const Dataset& data, const ModelConfig& cfg,
                 const SamplerConfig& sampler, const CvPlan& plan,
                 int threads) {
  data.validate(cfg.rho_ice);
  plan.validate(data.n_cores());
  std::vector<CoreHoldout> holdouts;
  for (int fold = 0; fold < plan.n_folds; ++fold) {
    std::vector<int> train;
    std::vector<int> held;
    for (int c = 0; c < data.n_cores(); ++c) {
      (plan.assignment[c] == fold ? held : train).push_back(c);
    }
    const Dataset train_data = subset_dataset(data, train);
    DensityModel model(cfg, train_data);
    SamplerConfig fold_cfg = sampler;
    fold_cfg.seed = derive_seed(sampler.seed, "cv-fold", fold);
    const PosteriorSamples samples = fit(model, fold_cfg, threads);

    for (int c : held) {
      const CoreRecord& core = data.cores[c];
      PredictionRequest req;
      req.targets = {data.sites[core.site_index]};
      req.target_labels = {core.site_id};
      req.depths = core.depths;
      req.mode = PredictionMode::NoisyMeasurement;
      req.weighting = {core.campaign, core.n(), core.x_max};
      req.seed = derive_seed(sampler.seed, "cv-pred", c);
      const PredictiveDraws pred = predict_curves(samples, req, model, threads);

      CoreHoldout hold;
      hold.site_id = core.site_id;
      hold.core_rep = core.core_rep;
      hold.x_max = core.x_max;
      hold.n = core.n();
      for (int k = 0; k < core.n(); ++k) {
        HoldoutPoint pt;
        pt.depth = core.depths[k];
        pt.truth = core.densities[k];
        pt.draws.resize(pred.n_draws());
        for (int r = 0; r < pred.n_draws(); ++r) {
          pt.draws[r] = pred.draws[r](0, k);
        }
        hold.points.push_back(std::move(pt));
      }
      holdouts.push_back(std::move(hold));
    }
  }
  const IntegratedErrors ie = integrated_errors(holdouts);
  CvMetrics out;
  out.model_label = cfg.label;
  out.ise = ie.ise;
  out.iae = ie.iae;
  out.crps = total_crps(holdouts);
  return out;
}

}  // namespace misp
