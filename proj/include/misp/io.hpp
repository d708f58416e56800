#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "misp/data.hpp"
#include "misp/inference.hpp"
#include "misp/model.hpp"
#include "misp/predict.hpp"
#include "misp/scoring.hpp"
#include "misp/simulate.hpp"

namespace misp {

inline constexpr const char* kVersion = "0.1.0";

// 10 significant digits; enough for every oracle comparison in the suite.
std::string format_double(double v);

// FNV-1a 64-bit over raw bytes, hex-encoded; used by the run manifest.
std::string fnv1a_hex(const std::string& bytes);

// Measurement CSV with header
// site_id,lat,lon,campaign,core_rep,depth_m,density_g_cm3.
Dataset ingest(const std::string& path);
std::string dataset_summary(const Dataset& data);

struct PredictSettings {
  std::vector<SiteLocation> targets;
  std::vector<std::string> labels;      // one per explicit target, optional
  std::vector<std::string> site_refs;   // observed-site labels to predict at
  std::vector<double> depths;           // empty -> even n_depths grid
  int n_depths = 141;
  std::string mode = "mean_curve";  // mean_curve | noisy_measurement | both
  WeightingContext weighting;
  int thin = 1;
  std::string samples_path;  // empty -> <out>/samples.csv
};

struct SimulateSettings {
  std::string mode = "dataset";  // dataset | prior_curves
  SimulationSpec spec;           // seed is overwritten by the run seed
  bool zero_mean_gamma = false;  // prior_curves comparison panel
  int n_curves = 1000;
  int curve_points = 101;
};

struct RunConfig {
  ModelConfig model;
  SamplerConfig sampler;
  int cv_folds = 19;
  PredictSettings predict;
  SimulateSettings simulate;
  std::string source_text;  // raw config file, kept for the manifest
};

RunConfig default_run_config();
// Strict sectioned key=value file; unknown sections/keys and malformed
// values are config errors naming the line.
RunConfig parse_run_config(const std::string& path);

void write_samples_csv(const std::string& path,
                       const PosteriorSamples& samples);
// expected_names empty -> accept whatever the header declares.
PosteriorSamples read_samples_csv(const std::string& path,
                                  const std::vector<std::string>& expected_names = {});

void write_summary_csv(const std::string& path,
                       const PosteriorSamples& samples);
void write_diagnostics_csv(const std::string& path,
                           const PosteriorSamples& samples);
// Long-format traces (chain, draw, parameter, value), strided so each
// chain/parameter series keeps at most max_per_chain rows.
void write_traces_csv(const std::string& path, const PosteriorSamples& samples,
                      int max_per_chain = 1000);
void write_curves_csv(const std::string& path,
                      const std::vector<PredictiveDraws>& bundles);
void write_cv_report_csv(const std::string& path,
                         const std::vector<CvMetrics>& rows,
                         const std::vector<double>& relative);
void write_dataset_csv(const std::string& path, const Dataset& data);
void write_truth_csv(const std::string& path,
                     const std::vector<std::string>& names,
                     const Eigen::VectorXd& values);
// draw-indexed curve bundle from prior-predictive simulation
void write_prior_curves_csv(const std::string& path,
                            const std::vector<double>& depths,
                            const std::vector<Eigen::VectorXd>& curves);

void write_manifest(const std::string& path, const std::string& command,
                    const RunConfig& cfg, const std::string& data_path,
                    const std::string& data_bytes, std::uint64_t seed,
                    int threads, const std::vector<std::string>& outputs);

}  // namespace misp
