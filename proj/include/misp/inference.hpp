#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "misp/model.hpp"

namespace misp {

// Generic differentiable log-density for the sampler. value_grad returns the
// log density at u and, when grad is non-null, fills the gradient.
struct LogDensityTarget {
  int dim = 0;
  std::function<double(const Eigen::VectorXd&, Eigen::VectorXd*)> value_grad;
};

enum class ChainInit { PriorDraw, Supplied };

struct SamplerConfig {
  int n_chains = 4;
  int n_warmup = 5000;
  int n_keep = 12500;  // per chain; 4 chains give 50000 retained draws
  int leapfrog_steps = 32;
  double target_accept = 0.8;
  std::uint64_t seed = 0;
  ChainInit init = ChainInit::PriorDraw;
  void validate() const;
};

struct LeapfrogResult {
  Eigen::VectorXd u;
  Eigen::VectorXd p;
  double value = 0.0;     // log density at the final position
  Eigen::VectorXd grad;   // gradient at the final position
  bool divergent = false;  // non-finite value or gradient along the path
};

// Symmetric leapfrog with kinetic energy p' diag(inv_mass) p / 2.
LeapfrogResult leapfrog(const Eigen::VectorXd& u, const Eigen::VectorXd& p,
                        double eps, int steps, const LogDensityTarget& target,
                        const Eigen::VectorXd& inv_mass);

struct ChainResult {
  Eigen::MatrixXd draws;  // n_keep x dim, post-warmup only
  double accept_rate = 0.0;
  double step_size = 0.0;
  Eigen::VectorXd inv_mass;
  int n_divergent = 0;  // post-warmup
  int n_divergent_warmup = 0;
};

struct RawSamples {
  std::vector<ChainResult> chains;
  std::vector<std::string> warnings;
  int n_chains() const { return static_cast<int>(chains.size()); }
  int n_keep() const { return chains.empty() ? 0 : static_cast<int>(chains[0].draws.rows()); }
  int dim() const { return chains.empty() ? 0 : static_cast<int>(chains[0].draws.cols()); }
};

// Static-trajectory HMC. Warmup adapts the step size by dual averaging toward
// target_accept and, when n_warmup >= 40, a diagonal inverse mass from
// variances accumulated over warmup's third quarter. One init point per chain.
RawSamples sample(const SamplerConfig& cfg, const LogDensityTarget& target,
                  const std::vector<Eigen::VectorXd>& init_points,
                  int threads = 1);

// Posterior draws on the constrained scale with parameter names, produced by
// running the sampler on a DensityModel.
struct PosteriorSamples {
  std::vector<std::string> names;
  std::vector<Eigen::MatrixXd> chain_draws;  // per chain: n_keep x dim
  std::vector<double> accept_rates;
  std::vector<double> step_sizes;
  std::vector<int> divergences;
  std::vector<std::string> warnings;
  int n_chains() const { return static_cast<int>(chain_draws.size()); }
  int n_keep() const {
    return chain_draws.empty() ? 0
                               : static_cast<int>(chain_draws[0].rows());
  }
  int dim() const { return static_cast<int>(names.size()); }
  int total_draws() const { return n_chains() * n_keep(); }
  // All chains stacked, chain-major.
  Eigen::MatrixXd pooled() const;
};

PosteriorSamples fit(const DensityModel& model, const SamplerConfig& cfg,
                     int threads = 1);

}  // namespace misp
