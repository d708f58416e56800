#include "misp/simulate.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "misp/errors.hpp"
#include "misp/geodesy.hpp"

namespace misp {

namespace {
constexpr double kCorrJitter = 1e-8;
}

void SimulationSpec::validate(const ModelConfig& cfg) const {
  cfg.validate();
  if (sites.empty() && n_sites < 1) {
    throw_error(ErrorCategory::Config, "simulation needs at least one site");
  }
  for (const auto& s : sites) s.validate();
  if (sites.empty() && !(region_km > 0.0)) {
    throw_error(ErrorCategory::Config, "region side must be positive");
  }
  if (cores_per_site < 1) {
    throw_error(ErrorCategory::Config, "cores_per_site must be positive");
  }
  if (depths.empty() && n_depths < 1) {
    throw_error(ErrorCategory::Config, "simulation needs at least one depth");
  }
  for (double d : depths) {
    if (!(d >= cfg.basis.knots.x_min && d <= cfg.basis.knots.x_max)) {
      throw_error(ErrorCategory::Config,
                  "simulated depth " + std::to_string(d) +
                      " lies outside the basis domain");
    }
  }
  const int total_cores =
      cores_per_site *
      (sites.empty() ? n_sites : static_cast<int>(sites.size()));
  if (!campaigns.empty() &&
      static_cast<int>(campaigns.size()) > total_cores) {
    throw_error(ErrorCategory::Config,
                "more campaigns than cores; some would never appear");
  }
}

std::vector<SiteLocation> random_region_sites(int n, double region_km,
                                              Rng& rng) {
  std::vector<SiteLocation> sites;
  sites.reserve(n);
  const double half = 0.5 * region_km;
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform(-half, half);
    const double y = rng.uniform(-half, half);
    const double r = std::hypot(x, y);
    // Azimuthal equidistant plane tangent at the south pole.
    const double lat = -90.0 + (r / kEarthRadiusKm) * (180.0 / std::numbers::pi);
    double lon = std::atan2(y, x) * (180.0 / std::numbers::pi);
    if (lon <= -180.0) lon += 360.0;
    sites.push_back({lat, lon});
  }
  return sites;
}

void draw_prior_fields(const ModelConfig& cfg,
                       const std::vector<SiteLocation>& sites,
                       ParameterState& state, Rng& rng) {
  const int J = static_cast<int>(cfg.basis.size());
  const int n_s = static_cast<int>(sites.size());
  state.alpha.resize(n_s);
  state.log_z.resize(n_s, J);
  if (n_s == 0) return;

  Eigen::MatrixXd corr(n_s, n_s);
  const Eigen::MatrixXd dist = distance_matrix(sites, cfg.covariance);
  for (int i = 0; i < n_s; ++i) {
    for (int j = 0; j < n_s; ++j) {
      corr(i, j) = matern_corr(cfg.covariance, state.phi, dist(i, j));
    }
  }
  corr.diagonal().array() += kCorrJitter;
  Eigen::LLT<Eigen::MatrixXd> llt(corr);
  if (llt.info() != Eigen::Success) {
    throw_error(ErrorCategory::Numeric,
                "site correlation matrix is not positive definite");
  }
  const Eigen::MatrixXd L = llt.matrixL();
  for (int f = 0; f <= J; ++f) {
    Eigen::VectorXd z(n_s);
    for (int i = 0; i < n_s; ++i) z(i) = rng.normal();
    const Eigen::VectorXd v =
        Eigen::VectorXd::Constant(n_s, state.gamma(f)) +
        std::sqrt(state.sigma2(f)) * (L * z);
    if (f == 0) {
      state.alpha = v;
    } else {
      state.log_z.col(f - 1) = v;
    }
  }
}

ParameterState draw_prior_state(const ModelConfig& cfg,
                                const std::vector<SiteLocation>& sites,
                                int n_tau, Rng& rng) {
  cfg.validate();
  if (n_tau < 1) {
    throw_error(ErrorCategory::Config,
                "need at least one noise-scale component");
  }
  const PriorSpec& pr = cfg.priors;
  const int J = static_cast<int>(cfg.basis.size());
  ParameterState st;
  st.gamma.resize(J + 1);
  st.gamma(0) = rng.normal(pr.gamma0_mean, pr.gamma0_sd);
  for (int j = 1; j <= J; ++j) {
    st.gamma(j) = rng.normal(pr.gammaj_mean, pr.gammaj_sd);
  }
  st.sigma2.resize(J + 1);
  st.sigma2(0) = rng.inv_gamma(pr.sigma2_0_shape, pr.sigma2_0_scale);
  for (int j = 1; j <= J; ++j) {
    st.sigma2(j) = rng.inv_gamma(pr.sigma2_j_shape, pr.sigma2_j_scale);
  }
  st.phi = rng.uniform(pr.phi_lower, pr.phi_upper);
  // Keep phi strictly interior so the logit transform stays finite.
  st.phi = std::max(st.phi, std::nextafter(pr.phi_lower, pr.phi_upper));
  st.tau2.resize(n_tau);
  for (int k = 0; k < n_tau; ++k) {
    st.tau2(k) = rng.gamma(pr.tau2_shape, pr.tau2_rate);
  }
  draw_prior_fields(cfg, sites, st, rng);
  return st;
}

ParameterState draw_prior_state(const ModelConfig& cfg,
                                const std::vector<SiteLocation>& sites,
                                int n_tau, std::uint64_t seed) {
  Rng rng(seed);
  return draw_prior_state(cfg, sites, n_tau, rng);
}

SimulatedData generate_dataset(const SimulationSpec& spec,
                               const ModelConfig& cfg) {
  spec.validate(cfg);
  Rng rng(spec.seed);
  const std::vector<SiteLocation> sites =
      spec.sites.empty() ? random_region_sites(spec.n_sites, spec.region_km, rng)
                         : spec.sites;

  std::vector<double> depths = spec.depths;
  if (depths.empty()) {
    const double x_min = cfg.basis.knots.x_min;
    const double x_max = cfg.basis.knots.x_max;
    depths.reserve(spec.n_depths);
    for (int i = 1; i <= spec.n_depths; ++i) {
      depths.push_back(x_min + (x_max - x_min) * i / spec.n_depths);
    }
  }
  const std::vector<std::string> campaigns =
      spec.campaigns.empty() ? std::vector<std::string>{"sim"}
                             : spec.campaigns;
  const int n_tau = cfg.variance_mode == VarianceMode::FixedWeightedCampaign
                        ? static_cast<int>(campaigns.size())
                        : 1;

  ParameterState truth;
  if (spec.truth == TruthSource::PriorDraw) {
    truth = draw_prior_state(cfg, sites, n_tau, rng);
  } else {
    truth = spec.supplied;
    const int J = static_cast<int>(cfg.basis.size());
    if (truth.gamma.size() != J + 1 || truth.sigma2.size() != J + 1 ||
        truth.tau2.size() < n_tau ||
        truth.alpha.size() != static_cast<int>(sites.size()) ||
        truth.log_z.rows() != static_cast<int>(sites.size()) ||
        truth.log_z.cols() != J) {
      throw_error(ErrorCategory::Config,
                  "supplied truth does not match the site/basis layout");
    }
  }

  std::vector<CoreRecord> cores;
  std::vector<SiteLocation> locations;
  int core_counter = 0;
  for (std::size_t s = 0; s < sites.size(); ++s) {
    for (int rep = 1; rep <= spec.cores_per_site; ++rep, ++core_counter) {
      CoreRecord core;
      core.site_id = "site_" + std::to_string(s + 1);
      core.site_index = static_cast<int>(s);
      core.campaign = campaigns[core_counter % campaigns.size()];
      core.campaign_index =
          cfg.variance_mode == VarianceMode::FixedWeightedCampaign
              ? core_counter % static_cast<int>(campaigns.size())
              : 0;
      core.core_rep = rep;
      core.depths = depths;
      core.x_max = *std::max_element(depths.begin(), depths.end());
      const double v = obs_variance(truth, cfg, core);
      core.densities.resize(depths.size());
      for (std::size_t i = 0; i < depths.size(); ++i) {
        const double mu =
            mean_density(truth, cfg, static_cast<int>(s), depths[i]);
        double draw;
        do {
          draw = cfg.data_model == DataModel::TruncNormal
                     ? sample_trunc_normal(mu, v, 0.0, rng)
                     : sample_trunc_t4(mu, v, 0.0, rng);
        } while (draw >= cfg.rho_ice);
        core.densities[i] = draw;
      }
      cores.push_back(std::move(core));
      locations.push_back(sites[s]);
    }
  }

  SimulatedData out;
  out.data = build_dataset(cores, locations);
  out.truth = truth;
  out.data.validate(cfg.rho_ice);
  return out;
}

}  // namespace misp
