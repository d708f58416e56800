#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "misp/data.hpp"
#include "misp/model.hpp"
#include "misp/rng.hpp"

namespace misp {

enum class TruthSource { PriorDraw, Supplied };

struct SimulationSpec {
  std::vector<SiteLocation> sites;  // explicit layout; wins when non-empty
  int n_sites = 0;                  // random layout size when sites is empty
  double region_km = 1500.0;        // side of the random square patch
  int cores_per_site = 1;
  std::vector<double> depths;  // explicit per-core depth grid
  int n_depths = 0;            // even grid over the basis domain when empty
  std::vector<std::string> campaigns;  // dealt round-robin; default {"sim"}
  TruthSource truth = TruthSource::PriorDraw;
  ParameterState supplied;  // generating state when truth == Supplied
  std::uint64_t seed = 0;
  void validate(const ModelConfig& cfg) const;
};

struct SimulatedData {
  Dataset data;
  ParameterState truth;
};

// n sites uniform on a region_km x region_km patch of the pole-centred
// azimuthal-equidistant plane, mapped back to lat/lon.
std::vector<SiteLocation> random_region_sites(int n, double region_km,
                                              Rng& rng);

// Fills alpha and log_z from their GP layers given the hyperparameters
// already present in state.
void draw_prior_fields(const ModelConfig& cfg,
                       const std::vector<SiteLocation>& sites,
                       ParameterState& state, Rng& rng);

// Hyperparameters from the priors, then fields via draw_prior_fields.
// n_tau is the number of noise-scale components to draw.
ParameterState draw_prior_state(const ModelConfig& cfg,
                                const std::vector<SiteLocation>& sites,
                                int n_tau, Rng& rng);
ParameterState draw_prior_state(const ModelConfig& cfg,
                                const std::vector<SiteLocation>& sites,
                                int n_tau, std::uint64_t seed);

// Measurements drawn from the configured truncated data model around the
// state's mean curve; redraws the rare exceedance above rho_ice so the
// result satisfies the dataset contract. Deterministic under spec.seed.
SimulatedData generate_dataset(const SimulationSpec& spec,
                               const ModelConfig& cfg);

}  // namespace misp
