#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "misp/basis.hpp"
#include "misp/data.hpp"
#include "misp/geodesy.hpp"
#include "misp/rng.hpp"

namespace misp {

enum class VarianceMode { Homoscedastic, FixedWeighted, FixedWeightedCampaign };
enum class DataModel { TruncNormal, TruncT4 };

struct PriorSpec {
  double gamma0_mean = -0.5;
  double gamma0_sd = 1.0;
  double gammaj_mean = -1.5;
  double gammaj_sd = 1.0;
  double sigma2_0_shape = 10.0;  // inverse-gamma a (mean scale/(a-1))
  double sigma2_0_scale = 3.0;   // inverse-gamma b
  double sigma2_j_shape = 4.0;
  double sigma2_j_scale = 3.0;
  double phi_lower = 1e-5;  // uniform bounds, 1/km
  double phi_upper = 1e-1;
  double tau2_shape = 1.0;  // gamma shape (mean shape/rate)
  double tau2_rate = 100.0;
  void validate() const;
};

struct ModelConfig {
  double rho_ice = 0.917;  // g/cm^3, fixed asymptote of the link
  BasisSpec basis;
  CovarianceSpec covariance;
  VarianceMode variance_mode = VarianceMode::FixedWeightedCampaign;
  DataModel data_model = DataModel::TruncNormal;
  PriorSpec priors;
  std::string label = "model";
  void validate() const;
};

// Defaults for the full model: order-1 I-splines on interior knots
// {5,15,30,45,75} over [0,140], great-circle exponential covariance,
// campaign-weighted truncated-normal errors.
ModelConfig default_model_config();

// One point in the posterior, on the constrained scale except log_z, which is
// stored on the log scale so z*_j(s) = exp(log_z(s,j)) > 0 by construction.
struct ParameterState {
  Eigen::VectorXd gamma;   // length J+1: intercept mean, then J log-coef means
  Eigen::VectorXd sigma2;  // length J+1, > 0
  double phi = 1e-3;       // in (phi_lower, phi_upper)
  Eigen::VectorXd tau2;    // length n_tau, > 0
  Eigen::VectorXd alpha;   // per site
  Eigen::MatrixXd log_z;   // n_sites x J
};

int n_tau_components(const ModelConfig& cfg, const Dataset& data);

// Constrained-scale parameter names in the canonical stacking order; used for
// CSV headers and error messages.
std::vector<std::string> parameter_names(const ModelConfig& cfg,
                                         const Dataset& data);

double latent_w(const ParameterState& state, const ModelConfig& cfg, int site,
                double x);
double mean_density(const ParameterState& state, const ModelConfig& cfg,
                    int site, double x);
double obs_variance(const ParameterState& state, const ModelConfig& cfg,
                    const CoreRecord& core);

// Log-density of N(mu, v) truncated to (lower, inf); returns -inf for
// x <= lower.
double trunc_normal_logpdf(double x, double mu, double v, double lower = 0.0);
// Same with a scaled t4 kernel.
double trunc_t4_logpdf(double x, double mu, double v, double lower = 0.0);

double sample_trunc_normal(double mu, double v, double lower, Rng& rng);
double sample_trunc_t4(double mu, double v, double lower, Rng& rng);

double log_prior(const ParameterState& state, const ModelConfig& cfg,
                 const Dataset& data);
double log_likelihood(const ParameterState& state, const ModelConfig& cfg,
                      const Dataset& data);

// Binds config and data; precomputes design rows, measurement maps, and the
// site distance matrix for fast repeated log-posterior evaluation.
class DensityModel {
 public:
  DensityModel(ModelConfig cfg, Dataset data);

  const ModelConfig& config() const { return cfg_; }
  const Dataset& data() const { return data_; }
  int basis_size() const { return J_; }
  int n_sites() const { return data_.n_sites(); }
  int n_tau() const { return n_tau_; }
  int dim() const { return dim_; }
  const std::vector<std::string>& names() const { return names_; }
  const Eigen::MatrixXd& site_distances() const { return dist_; }

  // Unconstrained stacking order: gamma (J+1) | log sigma2 (J+1) | scaled
  // logit of phi (1) | log tau2 (n_tau) | alpha (n_sites) | log_z site-major.
  Eigen::VectorXd to_unconstrained(const ParameterState& state) const;
  ParameterState from_unconstrained(const Eigen::VectorXd& u) const;

  // Constrained-scale flat row in the same order (matches names()).
  Eigen::VectorXd constrained_row(const ParameterState& state) const;
  ParameterState state_from_row(const Eigen::VectorXd& row) const;

  // Log posterior plus the transform log-Jacobian, with exact gradient when
  // grad is non-null.
  double log_posterior_unconstrained(const Eigen::VectorXd& u,
                                     Eigen::VectorXd* grad) const;

 private:
  ModelConfig cfg_;
  Dataset data_;
  int J_ = 0;
  int n_tau_ = 0;
  int dim_ = 0;
  std::vector<std::string> names_;
  Eigen::MatrixXd design_;       // n_measurements x J
  Eigen::VectorXd rho_;          // measurement densities
  std::vector<int> meas_site_;   // measurement -> site index
  std::vector<int> meas_tau_;    // measurement -> tau2 component
  Eigen::VectorXd meas_weight_;  // 1 or n/x_max per measurement
  Eigen::MatrixXd dist_;         // n_sites x n_sites
};

}  // namespace misp
