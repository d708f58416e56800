#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "misp/geodesy.hpp"
#include "misp/inference.hpp"
#include "misp/model.hpp"
#include "misp/rng.hpp"

namespace misp {

enum class PredictionMode { MeanCurve, NoisyMeasurement };

// Noise context for NoisyMeasurement: which campaign's noise scale applies
// and the core-length weighting of the pretend measurement column.
struct WeightingContext {
  std::string campaign;
  int n = 0;
  double x_max = 0.0;
};

struct PredictionRequest {
  std::vector<SiteLocation> targets;
  std::vector<std::string> target_labels;  // empty -> target_1, target_2, ...
  std::vector<double> depths;
  PredictionMode mode = PredictionMode::MeanCurve;
  WeightingContext weighting;  // required for NoisyMeasurement
  std::uint64_t seed = 0;
  int thin = 1;  // keep every thin-th retained draw
  void validate(const ModelConfig& cfg) const;
};

// Gaussian conditional of one latent field at the requested targets.
struct FieldConditional {
  Eigen::VectorXd mean;
  Eigen::VectorXd variance;
  Eigen::VectorXd sample;
};

// Conditions field (0 = alpha, 1..J = log_z_j) of one posterior draw on its
// observed-site values. Targets coincident with an observed site (within
// 1e-12 km) get that site's value exactly with zero variance.
FieldConditional condition_field(const ParameterState& draw, int field,
                                 const std::vector<SiteLocation>& targets,
                                 const DensityModel& model, Rng& rng);

struct PredictiveDraws {
  std::vector<std::string> labels;
  std::vector<double> depths;
  std::vector<Eigen::MatrixXd> draws;  // per retained draw: targets x depths
  Eigen::MatrixXd mean;                // targets x depths summaries
  Eigen::MatrixXd q025;
  Eigen::MatrixXd q975;
  PredictionMode mode = PredictionMode::MeanCurve;
  int n_draws() const { return static_cast<int>(draws.size()); }
};

// Per-draw joint conditioning of all J+1 fields at the targets, curve
// assembly through the link, and (for NoisyMeasurement) a truncated noise
// draw per cell. Draws partition across threads with per-draw RNG streams.
PredictiveDraws predict_curves(const PosteriorSamples& samples,
                               const PredictionRequest& req,
                               const DensityModel& model, int threads = 1);

// predict_curves specialised to an observed site: the conditional is
// degenerate there, so each draw reproduces its own in-sample mean curve on
// the (possibly deeper) grid.
PredictiveDraws extend_curve(const PosteriorSamples& samples,
                             const std::string& site_id,
                             const std::vector<double>& depths,
                             const DensityModel& model, int threads = 1);

}  // namespace misp
