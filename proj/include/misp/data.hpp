#pragma once

#include <string>
#include <vector>

#include "misp/geodesy.hpp"

namespace misp {

// One physical core: a column of depth-density measurements. Replicate cores
// at a site share the site's latent fields but keep their own noise weights.
struct CoreRecord {
  std::string site_id;
  int site_index = -1;  // into Dataset::sites
  std::string campaign;
  int campaign_index = -1;  // into Dataset::campaigns
  int core_rep = 0;
  std::vector<double> depths;
  std::vector<double> densities;
  double x_max = 0.0;  // core length (m)

  int n() const { return static_cast<int>(depths.size()); }
};

struct Dataset {
  std::vector<CoreRecord> cores;
  std::vector<SiteLocation> sites;        // deduplicated
  std::vector<std::string> site_labels;   // parallel to sites
  std::vector<std::string> campaigns;     // deduplicated, in first-seen order

  int n_sites() const { return static_cast<int>(sites.size()); }
  int n_cores() const { return static_cast<int>(cores.size()); }
  int n_measurements() const;

  void validate(double rho_ice) const;
};

// Links raw cores to deduplicated sites/campaigns by exact (lat, lon) match
// and first-seen order. Each core must carry site_id, campaign, location.
Dataset build_dataset(const std::vector<CoreRecord>& cores,
                      const std::vector<SiteLocation>& core_locations);

// Restriction to a subset of cores with sites/campaigns re-deduplicated
// (used by cross-validation folds).
Dataset subset_dataset(const Dataset& data,
                       const std::vector<int>& core_indices);

}  // namespace misp
