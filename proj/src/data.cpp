#include "misp/data.hpp"

#include <map>
#include <set>
#include <string>
#include <utility>

#include "misp/errors.hpp"

namespace misp {

int Dataset::n_measurements() const {
  int total = 0;
  for (const auto& c : cores) total += c.n();
  return total;
}

void Dataset::validate(double rho_ice) const {
  if (sites.size() != site_labels.size()) {
    throw_error(ErrorCategory::Data, "site list and label list differ in size");
  }
  for (const auto& s : sites) s.validate();
  std::map<std::string, int> label_site;
  for (const auto& core : cores) {
    if (core.site_index < 0 || core.site_index >= n_sites()) {
      throw_error(ErrorCategory::Data,
                  "core " + core.site_id + " has unresolved site index");
    }
    if (core.campaign_index < 0 ||
        core.campaign_index >= static_cast<int>(campaigns.size())) {
      throw_error(ErrorCategory::Data,
                  "core " + core.site_id + " has unresolved campaign index");
    }
    auto [it, inserted] = label_site.emplace(core.site_id, core.site_index);
    if (!inserted && it->second != core.site_index) {
      throw_error(ErrorCategory::Data, "site_id " + core.site_id +
                                           " maps to more than one location");
    }
    if (core.depths.size() != core.densities.size()) {
      throw_error(ErrorCategory::Data,
                  "core " + core.site_id + " has mismatched depth/density "
                  "lengths");
    }
    if (core.n() == 0) {
      throw_error(ErrorCategory::Data,
                  "core " + core.site_id + " has no measurements");
    }
    if (!(core.x_max > 0.0)) {
      throw_error(ErrorCategory::Data,
                  "core " + core.site_id + " has nonpositive length");
    }
    for (int i = 0; i < core.n(); ++i) {
      const double x = core.depths[i];
      const double rho = core.densities[i];
      if (!(x >= 0.0 && x <= core.x_max)) {
        throw_error(ErrorCategory::Data,
                    "core " + core.site_id + ": depth " + std::to_string(x) +
                        " outside [0, x_max=" + std::to_string(core.x_max) +
                        "]");
      }
      if (!(rho > 0.0 && rho < rho_ice)) {
        throw_error(ErrorCategory::Data,
                    "core " + core.site_id + ": density " +
                        std::to_string(rho) + " outside (0, " +
                        std::to_string(rho_ice) + ")");
      }
    }
  }
}

Dataset build_dataset(const std::vector<CoreRecord>& cores,
                      const std::vector<SiteLocation>& core_locations) {
  if (cores.size() != core_locations.size()) {
    throw_error(ErrorCategory::Data,
                "one location per core required by build_dataset");
  }
  Dataset out;
  std::map<std::pair<double, double>, int> site_of;
  std::map<std::string, int> campaign_of;
  for (std::size_t i = 0; i < cores.size(); ++i) {
    CoreRecord core = cores[i];
    const SiteLocation& loc = core_locations[i];
    loc.validate();
    const std::pair<double, double> key{loc.latitude, loc.longitude};
    auto sit = site_of.find(key);
    if (sit == site_of.end()) {
      sit = site_of.emplace(key, out.n_sites()).first;
      out.sites.push_back(loc);
      out.site_labels.push_back(core.site_id);
    }
    core.site_index = sit->second;
    auto cit = campaign_of.find(core.campaign);
    if (cit == campaign_of.end()) {
      cit = campaign_of
                .emplace(core.campaign, static_cast<int>(out.campaigns.size()))
                .first;
      out.campaigns.push_back(core.campaign);
    }
    core.campaign_index = cit->second;
    out.cores.push_back(std::move(core));
  }
  return out;
}

Dataset subset_dataset(const Dataset& data,
                       const std::vector<int>& core_indices) {
  std::vector<CoreRecord> cores;
  std::vector<SiteLocation> locations;
  std::set<int> seen;
  for (int idx : core_indices) {
    if (idx < 0 || idx >= data.n_cores()) {
      throw_error(ErrorCategory::Index,
                  "core index " + std::to_string(idx) + " out of range");
    }
    if (!seen.insert(idx).second) {
      throw_error(ErrorCategory::Index,
                  "core index " + std::to_string(idx) + " repeated in subset");
    }
    cores.push_back(data.cores[idx]);
    locations.push_back(data.sites[data.cores[idx].site_index]);
  }
  return build_dataset(cores, locations);
}

}  // namespace misp
