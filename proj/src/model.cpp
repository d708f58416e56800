#include "misp/model.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "misp/errors.hpp"
#include "misp/stats.hpp"

namespace misp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
// Fixed relative jitter on GP correlation diagonals. Constant in phi, so the
// log posterior stays smooth for the gradient checks.
constexpr double kCorrJitter = 1e-8;

double inv_gamma_logpdf(double x, double shape, double scale) {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(scale) - std::lgamma(shape) -
         (shape + 1.0) * std::log(x) - scale / x;
}

double gamma_logpdf(double x, double shape, double rate) {
  if (!(x > 0.0)) return kNegInf;
  return shape * std::log(rate) - std::lgamma(shape) +
         (shape - 1.0) * std::log(x) - rate * x;
}

// Correlation matrix (plus jitter) and its elementwise phi-derivative,
// assembled from a precomputed distance matrix.
void correlation_and_dphi(const Eigen::MatrixXd& dist,
                          const CovarianceSpec& spec, double phi,
                          Eigen::MatrixXd* R, Eigen::MatrixXd* dR) {
  const auto& D = dist.array();
  switch (spec.smoothness) {
    case MaternSmoothness::Half: {
      Eigen::ArrayXXd E = (-phi * D).exp();
      *R = E.matrix();
      if (dR) *dR = (-D * E).matrix();
      break;
    }
    case MaternSmoothness::ThreeHalves: {
      const double c = std::sqrt(3.0) * phi;
      Eigen::ArrayXXd E = (-c * D).exp();
      *R = ((1.0 + c * D) * E).matrix();
      if (dR) *dR = (-3.0 * phi * D.square() * E).matrix();
      break;
    }
    case MaternSmoothness::FiveHalves: {
      const double c = std::sqrt(5.0) * phi;
      Eigen::ArrayXXd S = c * D;
      Eigen::ArrayXXd E = (-S).exp();
      *R = ((1.0 + S + S.square() / 3.0) * E).matrix();
      if (dR) *dR = (-(5.0 * phi / 3.0) * D.square() * (1.0 + S) * E).matrix();
      break;
    }
  }
  R->diagonal().array() += kCorrJitter;
}

struct LikTerms {
  double ll = 0.0;
  double dmu = 0.0;  // d ll / d mu
  double dv = 0.0;   // d ll / d v
};

LikTerms trunc_normal_terms(double rho, double mu, double v) {
  LikTerms t;
  const double sd = std::sqrt(v);
  const double z = (rho - mu) / sd;
  const double a = mu / sd;
  t.ll = -0.5 * kLog2Pi - 0.5 * std::log(v) - 0.5 * z * z - normal_logcdf(a);
  const double lam = inverse_mills(a);
  t.dmu = (rho - mu) / v - lam / sd;
  t.dv = -0.5 / v + (rho - mu) * (rho - mu) / (2.0 * v * v) +
         lam * mu / (2.0 * v * sd);
  return t;
}

LikTerms trunc_t4_terms(double rho, double mu, double v) {
  LikTerms t;
  const double sd = std::sqrt(v);
  const double u = (rho - mu) / sd;
  const double a = mu / sd;
  t.ll = t4_logpdf(u) - 0.5 * std::log(v) - t4_logcdf(a);
  const double lam = t4_inverse_mills(a);
  t.dmu = 5.0 * u / ((4.0 + u * u) * sd) - lam / sd;
  t.dv = -0.5 / v + 5.0 * u * u / (2.0 * v * (4.0 + u * u)) +
         lam * a / (2.0 * v);
  return t;
}

void check_state_dims(const ParameterState& state, int J, int n_tau,
                      int n_sites) {
  if (state.gamma.size() != J + 1 || state.sigma2.size() != J + 1 ||
      state.tau2.size() != n_tau || state.alpha.size() != n_sites ||
      state.log_z.rows() != n_sites || state.log_z.cols() != J) {
    throw_error(ErrorCategory::Index,
                "parameter state dimensions do not match model layout");
  }
}

}  // namespace

void PriorSpec::validate() const {
  if (!(gamma0_sd > 0.0 && gammaj_sd > 0.0)) {
    throw_error(ErrorCategory::Config, "prior sds must be > 0");
  }
  if (!(sigma2_0_shape > 0.0 && sigma2_0_scale > 0.0 &&
        sigma2_j_shape > 0.0 && sigma2_j_scale > 0.0)) {
    throw_error(ErrorCategory::Config,
                "inverse-gamma hyperparameters must be > 0");
  }
  if (!(phi_lower > 0.0 && phi_lower < phi_upper)) {
    throw_error(ErrorCategory::Config,
                "phi prior bounds must satisfy 0 < lower < upper");
  }
  if (!(tau2_shape > 0.0 && tau2_rate > 0.0)) {
    throw_error(ErrorCategory::Config, "gamma hyperparameters must be > 0");
  }
}

void ModelConfig::validate() const {
  if (!(rho_ice > 0.0)) {
    throw_error(ErrorCategory::Config, "rho_ice must be > 0");
  }
  basis.validate();
  covariance.validate();
  priors.validate();
}

ModelConfig default_model_config() {
  ModelConfig cfg;
  cfg.basis.knots.interior_knots = {5.0, 15.0, 30.0, 45.0, 75.0};
  cfg.basis.knots.order_l = 1;
  cfg.basis.knots.x_min = 0.0;
  cfg.basis.knots.x_max = 140.0;
  cfg.basis.kernel.family = KernelFamily::MSpline;
  return cfg;
}

int n_tau_components(const ModelConfig& cfg, const Dataset& data) {
  if (cfg.variance_mode == VarianceMode::FixedWeightedCampaign) {
    return std::max<int>(1, static_cast<int>(data.campaigns.size()));
  }
  return 1;
}

std::vector<std::string> parameter_names(const ModelConfig& cfg,
                                         const Dataset& data) {
  const int J = cfg.basis.size();
  const int n_tau = n_tau_components(cfg, data);
  std::vector<std::string> names;
  for (int j = 0; j <= J; ++j) names.push_back("gamma[" + std::to_string(j) + "]");
  for (int j = 0; j <= J; ++j) names.push_back("sigma2[" + std::to_string(j) + "]");
  names.push_back("phi");
  if (cfg.variance_mode == VarianceMode::FixedWeightedCampaign &&
      !data.campaigns.empty()) {
    for (const auto& c : data.campaigns) names.push_back("tau2[" + c + "]");
  } else {
    for (int k = 0; k < n_tau; ++k) names.push_back("tau2");
  }
  for (const auto& label : data.site_labels) {
    names.push_back("alpha[" + label + "]");
  }
  for (const auto& label : data.site_labels) {
    for (int j = 1; j <= J; ++j) {
      names.push_back("log_z[" + label + "][" + std::to_string(j) + "]");
    }
  }
  return names;
}

double latent_w(const ParameterState& state, const ModelConfig& cfg, int site,
                double x) {
  if (site < 0 || site >= state.alpha.size()) {
    throw_error(ErrorCategory::Index,
                "site index " + std::to_string(site) + " out of range");
  }
  const std::vector<double> k = design_row(cfg.basis, x);
  double w = state.alpha(site);
  for (int j = 0; j < static_cast<int>(k.size()); ++j) {
    w += k[j] * std::exp(state.log_z(site, j));
  }
  return w;
}

double mean_density(const ParameterState& state, const ModelConfig& cfg,
                    int site, double x) {
  const double mu = cfg.rho_ice * logistic(latent_w(state, cfg, site, x));
  // logistic saturates in floating point once |w| passes ~37; nudge back
  // inside the open interval (0, rho_ice) the link guarantees exactly.
  return std::min(std::max(mu, std::numeric_limits<double>::min()),
                  std::nextafter(cfg.rho_ice, 0.0));
}

double obs_variance(const ParameterState& state, const ModelConfig& cfg,
                    const CoreRecord& core) {
  switch (cfg.variance_mode) {
    case VarianceMode::Homoscedastic:
      return state.tau2(0);
    case VarianceMode::FixedWeighted:
      return state.tau2(0) * core.n() / core.x_max;
    case VarianceMode::FixedWeightedCampaign:
      if (core.campaign_index < 0 ||
          core.campaign_index >= state.tau2.size()) {
        throw_error(ErrorCategory::Config,
                    "campaign '" + core.campaign +
                        "' has no noise-scale component in this model");
      }
      return state.tau2(core.campaign_index) * core.n() / core.x_max;
  }
  throw_error(ErrorCategory::Config, "unknown variance mode");
}

double trunc_normal_logpdf(double x, double mu, double v, double lower) {
  if (!(v > 0.0)) {
    throw_error(ErrorCategory::Domain,
                "trunc_normal_logpdf requires variance > 0");
  }
  if (x <= lower) return kNegInf;
  const double sd = std::sqrt(v);
  return normal_logpdf(x, mu, sd) - normal_logcdf((mu - lower) / sd);
}

double trunc_t4_logpdf(double x, double mu, double v, double lower) {
  if (!(v > 0.0)) {
    throw_error(ErrorCategory::Domain, "trunc_t4_logpdf requires variance > 0");
  }
  if (x <= lower) return kNegInf;
  const double sd = std::sqrt(v);
  return t4_logpdf((x - mu) / sd) - std::log(sd) -
         t4_logcdf((mu - lower) / sd);
}

double sample_trunc_normal(double mu, double v, double lower, Rng& rng) {
  if (!(v > 0.0)) {
    throw_error(ErrorCategory::Domain,
                "sample_trunc_normal requires variance > 0");
  }
  const double sd = std::sqrt(v);
  const double a = (lower - mu) / sd;
  double z;
  if (a < 0.5) {
    // Most of the mass survives the cut: plain rejection.
    do {
      z = rng.normal();
    } while (z < a);
  } else {
    // Deep truncation: translated-exponential proposal.
    const double lam = 0.5 * (a + std::sqrt(a * a + 4.0));
    for (;;) {
      z = a + rng.exponential(lam);
      const double d = z - lam;
      if (rng.uniform() <= std::exp(-0.5 * d * d)) break;
    }
  }
  return mu + sd * z;
}

double sample_trunc_t4(double mu, double v, double lower, Rng& rng) {
  if (!(v > 0.0)) {
    throw_error(ErrorCategory::Domain, "sample_trunc_t4 requires variance > 0");
  }
  const double sd = std::sqrt(v);
  const double a = (lower - mu) / sd;
  const double below = t4_cdf(a);
  const double mass = t4_cdf(-a);  // 1 - F4(a), computed without cancellation
  if (mass < 1e-300) return mu + sd * a;
  double y = below + rng.uniform() * mass;
  y = std::min(std::max(y, 1e-16), 1.0 - 1e-16);
  return mu + sd * t4_quantile(y);
}

double log_prior(const ParameterState& state, const ModelConfig& cfg,
                 const Dataset& data) {
  const int J = cfg.basis.size();
  const int n_tau = n_tau_components(cfg, data);
  const int ns = data.n_sites();
  check_state_dims(state, J, n_tau, ns);
  const PriorSpec& pr = cfg.priors;
  if (!(state.phi > pr.phi_lower && state.phi < pr.phi_upper)) return kNegInf;
  for (int f = 0; f <= J; ++f) {
    if (!(state.sigma2(f) > 0.0)) return kNegInf;
  }
  for (int k = 0; k < n_tau; ++k) {
    if (!(state.tau2(k) > 0.0)) return kNegInf;
  }

  double lp = normal_logpdf(state.gamma(0), pr.gamma0_mean, pr.gamma0_sd);
  for (int j = 1; j <= J; ++j) {
    lp += normal_logpdf(state.gamma(j), pr.gammaj_mean, pr.gammaj_sd);
  }
  lp += inv_gamma_logpdf(state.sigma2(0), pr.sigma2_0_shape, pr.sigma2_0_scale);
  for (int j = 1; j <= J; ++j) {
    lp += inv_gamma_logpdf(state.sigma2(j), pr.sigma2_j_shape,
                           pr.sigma2_j_scale);
  }
  lp += -std::log(pr.phi_upper - pr.phi_lower);
  for (int k = 0; k < n_tau; ++k) {
    lp += gamma_logpdf(state.tau2(k), pr.tau2_shape, pr.tau2_rate);
  }

  if (ns > 0) {
    const Eigen::MatrixXd dist = distance_matrix(data.sites, cfg.covariance);
    Eigen::MatrixXd R;
    correlation_and_dphi(dist, cfg.covariance, state.phi, &R, nullptr);
    Eigen::LLT<Eigen::MatrixXd> llt(R);
    if (llt.info() != Eigen::Success) return kNegInf;
    const double logdet =
        2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    for (int f = 0; f <= J; ++f) {
      const Eigen::VectorXd field =
          f == 0 ? state.alpha : Eigen::VectorXd(state.log_z.col(f - 1));
      const Eigen::VectorXd r = field.array() - state.gamma(f);
      const Eigen::VectorXd u = llt.solve(r);
      lp += -0.5 * ns * kLog2Pi - 0.5 * ns * std::log(state.sigma2(f)) -
            0.5 * logdet - r.dot(u) / (2.0 * state.sigma2(f));
    }
  }
  return lp;
}

double log_likelihood(const ParameterState& state, const ModelConfig& cfg,
                      const Dataset& data) {
  double ll = 0.0;
  for (const auto& core : data.cores) {
    const double v = obs_variance(state, cfg, core);
    for (int i = 0; i < core.n(); ++i) {
      const double mu = mean_density(state, cfg, core.site_index,
                                     core.depths[i]);
      ll += cfg.data_model == DataModel::TruncNormal
                ? trunc_normal_logpdf(core.densities[i], mu, v)
                : trunc_t4_logpdf(core.densities[i], mu, v);
    }
  }
  return ll;
}

DensityModel::DensityModel(ModelConfig cfg, Dataset data)
    : cfg_(std::move(cfg)), data_(std::move(data)) {
  cfg_.validate();
  data_.validate(cfg_.rho_ice);
  J_ = cfg_.basis.size();
  n_tau_ = n_tau_components(cfg_, data_);
  names_ = parameter_names(cfg_, data_);
  const int ns = data_.n_sites();
  dim_ = 2 * (J_ + 1) + 1 + n_tau_ + ns + ns * J_;

  const int N = data_.n_measurements();
  design_.resize(N, J_);
  rho_.resize(N);
  meas_site_.resize(N);
  meas_tau_.resize(N);
  meas_weight_.resize(N);
  int m = 0;
  for (const auto& core : data_.cores) {
    const double weight = cfg_.variance_mode == VarianceMode::Homoscedastic
                              ? 1.0
                              : core.n() / core.x_max;
    const int tau_idx =
        cfg_.variance_mode == VarianceMode::FixedWeightedCampaign
            ? core.campaign_index
            : 0;
    for (int i = 0; i < core.n(); ++i, ++m) {
      const std::vector<double> row = design_row(cfg_.basis, core.depths[i]);
      for (int j = 0; j < J_; ++j) design_(m, j) = row[j];
      rho_(m) = core.densities[i];
      meas_site_[m] = core.site_index;
      meas_tau_[m] = tau_idx;
      meas_weight_(m) = weight;
    }
  }
  dist_ = distance_matrix(data_.sites, cfg_.covariance);
}

Eigen::VectorXd DensityModel::to_unconstrained(
    const ParameterState& state) const {
  check_state_dims(state, J_, n_tau_, data_.n_sites());
  const PriorSpec& pr = cfg_.priors;
  if (!(state.phi > pr.phi_lower && state.phi < pr.phi_upper)) {
    throw_error(ErrorCategory::Domain,
                "phi must lie strictly inside its prior bounds");
  }
  Eigen::VectorXd u(dim_);
  int off = 0;
  u.segment(off, J_ + 1) = state.gamma;
  off += J_ + 1;
  u.segment(off, J_ + 1) = state.sigma2.array().log();
  off += J_ + 1;
  const double p = (state.phi - pr.phi_lower) / (pr.phi_upper - pr.phi_lower);
  u(off++) = std::log(p) - std::log1p(-p);
  u.segment(off, n_tau_) = state.tau2.array().log();
  off += n_tau_;
  u.segment(off, data_.n_sites()) = state.alpha;
  off += data_.n_sites();
  for (int s = 0; s < data_.n_sites(); ++s) {
    for (int j = 0; j < J_; ++j) u(off++) = state.log_z(s, j);
  }
  return u;
}

ParameterState DensityModel::from_unconstrained(
    const Eigen::VectorXd& u) const {
  if (u.size() != dim_) {
    throw_error(ErrorCategory::Index, "unconstrained vector has wrong length");
  }
  const PriorSpec& pr = cfg_.priors;
  ParameterState st;
  int off = 0;
  st.gamma = u.segment(off, J_ + 1);
  off += J_ + 1;
  st.sigma2 = u.segment(off, J_ + 1).array().exp();
  off += J_ + 1;
  st.phi = pr.phi_lower + (pr.phi_upper - pr.phi_lower) * logistic(u(off++));
  st.tau2 = u.segment(off, n_tau_).array().exp();
  off += n_tau_;
  const int ns = data_.n_sites();
  st.alpha = u.segment(off, ns);
  off += ns;
  st.log_z.resize(ns, J_);
  for (int s = 0; s < ns; ++s) {
    for (int j = 0; j < J_; ++j) st.log_z(s, j) = u(off++);
  }
  return st;
}

Eigen::VectorXd DensityModel::constrained_row(
    const ParameterState& state) const {
  check_state_dims(state, J_, n_tau_, data_.n_sites());
  Eigen::VectorXd row(dim_);
  int off = 0;
  row.segment(off, J_ + 1) = state.gamma;
  off += J_ + 1;
  row.segment(off, J_ + 1) = state.sigma2;
  off += J_ + 1;
  row(off++) = state.phi;
  row.segment(off, n_tau_) = state.tau2;
  off += n_tau_;
  const int ns = data_.n_sites();
  row.segment(off, ns) = state.alpha;
  off += ns;
  for (int s = 0; s < ns; ++s) {
    for (int j = 0; j < J_; ++j) row(off++) = state.log_z(s, j);
  }
  return row;
}

ParameterState DensityModel::state_from_row(const Eigen::VectorXd& row) const {
  if (row.size() != dim_) {
    throw_error(ErrorCategory::Index, "constrained row has wrong length");
  }
  ParameterState st;
  int off = 0;
  st.gamma = row.segment(off, J_ + 1);
  off += J_ + 1;
  st.sigma2 = row.segment(off, J_ + 1);
  off += J_ + 1;
  st.phi = row(off++);
  st.tau2 = row.segment(off, n_tau_);
  off += n_tau_;
  const int ns = data_.n_sites();
  st.alpha = row.segment(off, ns);
  off += ns;
  st.log_z.resize(ns, J_);
  for (int s = 0; s < ns; ++s) {
    for (int j = 0; j < J_; ++j) st.log_z(s, j) = row(off++);
  }
  return st;
}

double DensityModel::log_posterior_unconstrained(const Eigen::VectorXd& u,
                                                 Eigen::VectorXd* grad) const {
  if (u.size() != dim_) {
    throw_error(ErrorCategory::Index, "unconstrained vector has wrong length");
  }
  for (int i = 0; i < dim_; ++i) {
    if (!std::isfinite(u(i))) {
      throw_error(ErrorCategory::Numeric,
                  "non-finite input at coordinate " + names_[i]);
    }
  }
  const PriorSpec& pr = cfg_.priors;
  const int Jp1 = J_ + 1;
  const int ns = data_.n_sites();
  int off = 0;
  const auto gamma = u.segment(off, Jp1);
  off += Jp1;
  const Eigen::VectorXd sigma2 = u.segment(off, Jp1).array().exp();
  off += Jp1;
  const double traw = u(off++);
  const double s_phi = logistic(traw);
  const double phi_span = pr.phi_upper - pr.phi_lower;
  const double phi = pr.phi_lower + phi_span * s_phi;
  const Eigen::VectorXd tau2 = u.segment(off, n_tau_).array().exp();
  const int tau_off = off;
  off += n_tau_;
  const auto alpha = u.segment(off, ns);
  off += ns;
  using RowMajorMat =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMajorMat> log_z(u.data() + off, ns, J_);

  double value = 0.0;
  Eigen::VectorXd g_gamma = Eigen::VectorXd::Zero(Jp1);
  Eigen::VectorXd g_sigma2 = Eigen::VectorXd::Zero(Jp1);
  Eigen::VectorXd g_tau2 = Eigen::VectorXd::Zero(n_tau_);
  Eigen::VectorXd g_alpha = Eigen::VectorXd::Zero(ns);
  Eigen::MatrixXd g_logz = Eigen::MatrixXd::Zero(ns, J_);
  double g_phi = 0.0;

  // Likelihood.
  const Eigen::MatrixXd Z = log_z.array().exp();
  const double rho_ice = cfg_.rho_ice;
  const int N = static_cast<int>(rho_.size());
  const bool use_t4 = cfg_.data_model == DataModel::TruncT4;
  for (int m = 0; m < N; ++m) {
    const int s = meas_site_[m];
    const double w = alpha(s) + design_.row(m).dot(Z.row(s));
    const double mu = rho_ice * logistic(w);
    const double v = tau2(meas_tau_[m]) * meas_weight_(m);
    const LikTerms t = use_t4 ? trunc_t4_terms(rho_(m), mu, v)
                              : trunc_normal_terms(rho_(m), mu, v);
    value += t.ll;
    const double gw = t.dmu * mu * (rho_ice - mu) / rho_ice;
    g_alpha(s) += gw;
    g_logz.row(s) += gw * design_.row(m).cwiseProduct(Z.row(s));
    g_tau2(meas_tau_[m]) += t.dv * meas_weight_(m);
  }

  // GP and LGP layers, sharing one Cholesky of the common correlation.
  if (ns > 0) {
    Eigen::MatrixXd R, dR;
    correlation_and_dphi(dist_, cfg_.covariance, phi, &R, &dR);
    Eigen::LLT<Eigen::MatrixXd> llt(R);
    if (llt.info() != Eigen::Success) {
      if (grad) grad->setZero(dim_);
      return kNegInf;
    }
    const double logdet =
        2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    const Eigen::MatrixXd Rinv =
        llt.solve(Eigen::MatrixXd::Identity(ns, ns));
    g_phi += -0.5 * Jp1 * (Rinv.array() * dR.array()).sum();
    for (int f = 0; f < Jp1; ++f) {
      const Eigen::VectorXd field =
          f == 0 ? Eigen::VectorXd(alpha) : Eigen::VectorXd(log_z.col(f - 1));
      const Eigen::VectorXd r = field.array() - gamma(f);
      const Eigen::VectorXd uf = llt.solve(r);
      const double qf = r.dot(uf);
      const double s2 = sigma2(f);
      value += -0.5 * ns * kLog2Pi - 0.5 * ns * std::log(s2) - 0.5 * logdet -
               qf / (2.0 * s2);
      g_gamma(f) += uf.sum() / s2;
      g_sigma2(f) += -0.5 * ns / s2 + qf / (2.0 * s2 * s2);
      if (f == 0) {
        g_alpha -= uf / s2;
      } else {
        g_logz.col(f - 1) -= uf / s2;
      }
      g_phi += uf.dot(dR * uf) / (2.0 * s2);
    }
  }

  // Hyperpriors.
  value += normal_logpdf(gamma(0), pr.gamma0_mean, pr.gamma0_sd);
  g_gamma(0) += -(gamma(0) - pr.gamma0_mean) / (pr.gamma0_sd * pr.gamma0_sd);
  for (int j = 1; j < Jp1; ++j) {
    value += normal_logpdf(gamma(j), pr.gammaj_mean, pr.gammaj_sd);
    g_gamma(j) += -(gamma(j) - pr.gammaj_mean) / (pr.gammaj_sd * pr.gammaj_sd);
  }
  for (int f = 0; f < Jp1; ++f) {
    const double a = f == 0 ? pr.sigma2_0_shape : pr.sigma2_j_shape;
    const double b = f == 0 ? pr.sigma2_0_scale : pr.sigma2_j_scale;
    const double s2 = sigma2(f);
    value += inv_gamma_logpdf(s2, a, b);
    g_sigma2(f) += -(a + 1.0) / s2 + b / (s2 * s2);
  }
  value += -std::log(phi_span);
  for (int k = 0; k < n_tau_; ++k) {
    value += gamma_logpdf(tau2(k), pr.tau2_shape, pr.tau2_rate);
    g_tau2(k) += (pr.tau2_shape - 1.0) / tau2(k) - pr.tau2_rate;
  }

  // Log-Jacobians of the constraining transforms.
  value += u.segment(Jp1, Jp1).sum();
  value += u.segment(tau_off, n_tau_).sum();
  value += std::log(phi_span) - log1pexp(-traw) - log1pexp(traw);

  if (grad) {
    grad->resize(dim_);
    int go = 0;
    grad->segment(go, Jp1) = g_gamma;
    go += Jp1;
    grad->segment(go, Jp1) =
        (g_sigma2.array() * sigma2.array() + 1.0).matrix();
    go += Jp1;
    (*grad)(go++) =
        g_phi * phi_span * s_phi * (1.0 - s_phi) + (1.0 - 2.0 * s_phi);
    grad->segment(go, n_tau_) = (g_tau2.array() * tau2.array() + 1.0).matrix();
    go += n_tau_;
    grad->segment(go, ns) = g_alpha;
    go += ns;
    for (int s = 0; s < ns; ++s) {
      for (int j = 0; j < J_; ++j) (*grad)(go++) = g_logz(s, j);
    }
  }
  return value;
}

}  // namespace misp
