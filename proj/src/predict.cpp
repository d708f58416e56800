#include "misp/predict.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <string>

#include "misp/errors.hpp"
#include "misp/parallel.hpp"
#include "misp/stats.hpp"

namespace misp {

namespace {

constexpr double kCorrJitter = 1e-8;
constexpr double kCoincidentKm = 1e-12;

// Which observed site, if any, each target coincides with.
std::vector<int> match_targets(const std::vector<SiteLocation>& targets,
                               const Dataset& data, const CovarianceSpec& cov) {
  std::vector<int> match(targets.size(), -1);
  for (std::size_t t = 0; t < targets.size(); ++t) {
    for (int s = 0; s < data.n_sites(); ++s) {
      if (site_distance(cov, targets[t], data.sites[s]) < kCoincidentKm) {
        match[t] = s;
        break;
      }
    }
  }
  return match;
}

Eigen::MatrixXd cross_distances(const std::vector<SiteLocation>& a,
                                const std::vector<SiteLocation>& b,
                                const CovarianceSpec& cov) {
  Eigen::MatrixXd d(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      d(i, j) = site_distance(cov, a[i], b[j]);
    }
  }
  return d;
}

Eigen::MatrixXd corr_from(const Eigen::MatrixXd& d, double phi,
                          const CovarianceSpec& cov) {
  Eigen::MatrixXd c(d.rows(), d.cols());
  for (int i = 0; i < d.rows(); ++i) {
    for (int j = 0; j < d.cols(); ++j) {
      c(i, j) = matern_corr(cov, phi, d(i, j));
    }
  }
  return c;
}

// Conditioning plan shared by all J+1 fields of one draw: correlation depends
// only on phi, so B and chol(C) are computed once per draw.
struct DrawPlan {
  Eigen::MatrixXd b;       // n_free x n_obs
  Eigen::MatrixXd chol_c;  // lower factor of the conditional correlation
  bool has_free = false;
};

DrawPlan build_plan(double phi, const Eigen::MatrixXd& d_oo,
                    const Eigen::MatrixXd& d_fo, const Eigen::MatrixXd& d_ff,
                    const CovarianceSpec& cov) {
  DrawPlan plan;
  const int n_free = static_cast<int>(d_fo.rows());
  if (n_free == 0) return plan;
  plan.has_free = true;
  Eigen::MatrixXd r_oo = corr_from(d_oo, phi, cov);
  r_oo.diagonal().array() += kCorrJitter;
  Eigen::LLT<Eigen::MatrixXd> llt(r_oo);
  if (llt.info() != Eigen::Success) {
    throw_error(ErrorCategory::Numeric,
                "observed-site correlation matrix is not positive definite");
  }
  const Eigen::MatrixXd r_fo = corr_from(d_fo, phi, cov);
  plan.b = llt.solve(r_fo.transpose()).transpose();
  Eigen::MatrixXd c = corr_from(d_ff, phi, cov);
  c.diagonal().array() += kCorrJitter;
  c -= plan.b * r_fo.transpose();
  Eigen::LLT<Eigen::MatrixXd> lltc(c);
  if (lltc.info() != Eigen::Success) {
    throw_error(ErrorCategory::Numeric,
                "conditional covariance is not positive semidefinite after "
                "jitter");
  }
  plan.chol_c = lltc.matrixL();
  return plan;
}

Eigen::VectorXd field_values(const ParameterState& st, int field) {
  return field == 0 ? st.alpha : Eigen::VectorXd(st.log_z.col(field - 1));
}

}  // namespace

void PredictionRequest::validate(const ModelConfig& cfg) const {
  if (targets.empty()) {
    throw_error(ErrorCategory::Config, "prediction needs at least one target");
  }
  for (const auto& t : targets) t.validate();
  if (!target_labels.empty() && target_labels.size() != targets.size()) {
    throw_error(ErrorCategory::Config,
                "target_labels must match targets in length");
  }
  if (depths.empty()) {
    throw_error(ErrorCategory::Config, "prediction needs at least one depth");
  }
  for (double d : depths) {
    if (!(d >= cfg.basis.knots.x_min && d <= cfg.basis.knots.x_max)) {
      throw_error(ErrorCategory::Domain,
                  "prediction depth " + std::to_string(d) +
                      " lies outside the basis domain");
    }
  }
  if (thin < 1) {
    throw_error(ErrorCategory::Config, "thin must be a positive stride");
  }
  if (mode == PredictionMode::NoisyMeasurement &&
      cfg.variance_mode != VarianceMode::Homoscedastic) {
    if (weighting.n < 1 || !(weighting.x_max > 0.0)) {
      throw_error(ErrorCategory::Config,
                  "noisy-measurement prediction needs a weighting context "
                  "(n >= 1, x_max > 0)");
    }
  }
}

FieldConditional condition_field(const ParameterState& draw, int field,
                                 const std::vector<SiteLocation>& targets,
                                 const DensityModel& model, Rng& rng) {
  const ModelConfig& cfg = model.config();
  const Dataset& data = model.data();
  const int J = model.basis_size();
  if (field < 0 || field > J) {
    throw_error(ErrorCategory::Index,
                "field index " + std::to_string(field) + " out of range");
  }
  const std::vector<int> match = match_targets(targets, data, cfg.covariance);
  std::vector<SiteLocation> free;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (match[t] < 0) free.push_back(targets[t]);
  }
  const DrawPlan plan = build_plan(
      draw.phi, model.site_distances(),
      cross_distances(free, data.sites, cfg.covariance),
      cross_distances(free, free, cfg.covariance),
      cfg.covariance);

  const double gam = draw.gamma(field);
  const double s2 = draw.sigma2(field);
  const Eigen::VectorXd v = field_values(draw, field);
  Eigen::VectorXd free_mean, free_var, free_sample;
  if (plan.has_free) {
    const int n_free = static_cast<int>(free.size());
    free_mean = Eigen::VectorXd::Constant(n_free, gam) +
                plan.b * (v - Eigen::VectorXd::Constant(v.size(), gam));
    // Net out the stabilising jitter so a far target reports exactly the
    // prior variance and conditioning never "adds" variance.
    free_var =
        s2 * (plan.chol_c.cwiseProduct(plan.chol_c).rowwise().sum().array() -
              kCorrJitter)
                 .max(0.0)
                 .matrix();
    Eigen::VectorXd z(n_free);
    for (int i = 0; i < n_free; ++i) z(i) = rng.normal();
    free_sample = free_mean + std::sqrt(s2) * (plan.chol_c * z);
  }

  FieldConditional out;
  out.mean.resize(targets.size());
  out.variance.resize(targets.size());
  out.sample.resize(targets.size());
  int fi = 0;
  for (std::size_t t = 0; t < targets.size(); ++t) {
    if (match[t] >= 0) {
      out.mean(t) = v(match[t]);
      out.variance(t) = 0.0;
      out.sample(t) = v(match[t]);
    } else {
      out.mean(t) = free_mean(fi);
      out.variance(t) = free_var(fi);
      out.sample(t) = free_sample(fi);
      ++fi;
    }
  }
  return out;
}

PredictiveDraws predict_curves(const PosteriorSamples& samples,
                               const PredictionRequest& req,
                               const DensityModel& model, int threads) {
  const ModelConfig& cfg = model.config();
  const Dataset& data = model.data();
  req.validate(cfg);
  if (samples.names != model.names()) {
    throw_error(ErrorCategory::Data,
                "posterior samples do not match the model's parameter layout");
  }
  if (samples.total_draws() == 0) {
    throw_error(ErrorCategory::Data, "no posterior draws to predict from");
  }

  const int J = model.basis_size();
  const int n_t = static_cast<int>(req.targets.size());
  const int n_d = static_cast<int>(req.depths.size());
  const std::vector<int> match =
      match_targets(req.targets, data, cfg.covariance);
  std::vector<SiteLocation> free;
  for (int t = 0; t < n_t; ++t) {
    if (match[t] < 0) free.push_back(req.targets[t]);
  }
  const Eigen::MatrixXd d_fo =
      cross_distances(free, data.sites, cfg.covariance);
  const Eigen::MatrixXd d_ff =
      cross_distances(free, free, cfg.covariance);
  const int n_free = static_cast<int>(free.size());

  Eigen::MatrixXd design(n_d, J);
  for (int k = 0; k < n_d; ++k) {
    const std::vector<double> row = design_row(cfg.basis, req.depths[k]);
    for (int j = 0; j < J; ++j) design(k, j) = row[j];
  }

  // Campaign resolution for the noise scale; unseen campaigns fall back to
  // the prior on tau^2, drawn per retained draw.
  int tau_index = 0;
  bool tau_from_prior = false;
  if (req.mode == PredictionMode::NoisyMeasurement) {
    switch (cfg.variance_mode) {
      case VarianceMode::Homoscedastic:
      case VarianceMode::FixedWeighted:
        tau_index = 0;
        break;
      case VarianceMode::FixedWeightedCampaign: {
        const auto it = std::find(data.campaigns.begin(),
                                  data.campaigns.end(), req.weighting.campaign);
        if (it == data.campaigns.end()) {
          tau_from_prior = true;
        } else {
          tau_index = static_cast<int>(it - data.campaigns.begin());
        }
        break;
      }
    }
  }
  const double weight =
      cfg.variance_mode == VarianceMode::Homoscedastic
          ? 1.0
          : static_cast<double>(req.weighting.n) / req.weighting.x_max;

  const Eigen::MatrixXd pool = samples.pooled();
  std::vector<int> kept;
  for (int m = 0; m < samples.total_draws(); m += req.thin) kept.push_back(m);
  const int R = static_cast<int>(kept.size());

  PredictiveDraws out;
  out.mode = req.mode;
  out.depths = req.depths;
  out.labels = req.target_labels;
  if (out.labels.empty()) {
    for (int t = 0; t < n_t; ++t) {
      out.labels.push_back("target_" + std::to_string(t + 1));
    }
  }
  out.draws.assign(R, Eigen::MatrixXd());

  parallel_for(R, threads, [&](int r) {
    const int m = kept[r];
    Rng rng(derive_seed(req.seed, "predict", m));
    const ParameterState st = model.state_from_row(pool.row(m));
    const DrawPlan plan = build_plan(st.phi, model.site_distances(), d_fo,
                                     d_ff, cfg.covariance);
    // Field draws happen for fields 0..J in order so the stream is fixed.
    Eigen::MatrixXd fields(n_t, J + 1);
    for (int f = 0; f <= J; ++f) {
      const Eigen::VectorXd v = field_values(st, f);
      Eigen::VectorXd free_sample;
      if (plan.has_free) {
        const double gam = st.gamma(f);
        Eigen::VectorXd z(n_free);
        for (int i = 0; i < n_free; ++i) z(i) = rng.normal();
        free_sample = Eigen::VectorXd::Constant(n_free, gam) +
                      plan.b * (v - Eigen::VectorXd::Constant(v.size(), gam)) +
                      std::sqrt(st.sigma2(f)) * (plan.chol_c * z);
      }
      int fi = 0;
      for (int t = 0; t < n_t; ++t) {
        fields(t, f) = match[t] >= 0 ? v(match[t]) : free_sample(fi++);
      }
    }
    double tau2 = 0.0;
    if (req.mode == PredictionMode::NoisyMeasurement) {
      tau2 = tau_from_prior
                 ? rng.gamma(cfg.priors.tau2_shape, cfg.priors.tau2_rate)
                 : st.tau2(tau_index);
    }
    Eigen::MatrixXd cells(n_t, n_d);
    for (int t = 0; t < n_t; ++t) {
      Eigen::VectorXd zstar(J);
      for (int j = 0; j < J; ++j) zstar(j) = std::exp(fields(t, j + 1));
      for (int k = 0; k < n_d; ++k) {
        const double w = fields(t, 0) + design.row(k).dot(zstar);
        double value = cfg.rho_ice * logistic(w);
        if (req.mode == PredictionMode::NoisyMeasurement) {
          const double v_obs = tau2 * weight;
          value = cfg.data_model == DataModel::TruncNormal
                      ? sample_trunc_normal(value, v_obs, 0.0, rng)
                      : sample_trunc_t4(value, v_obs, 0.0, rng);
        }
        cells(t, k) = value;
      }
    }
    out.draws[r] = std::move(cells);
  });

  out.mean.resize(n_t, n_d);
  out.q025.resize(n_t, n_d);
  out.q975.resize(n_t, n_d);
  std::vector<double> cell(R);
  for (int t = 0; t < n_t; ++t) {
    for (int k = 0; k < n_d; ++k) {
      for (int r = 0; r < R; ++r) cell[r] = out.draws[r](t, k);
      out.mean(t, k) = mean(cell);
      std::sort(cell.begin(), cell.end());
      out.q025(t, k) = quantile_sorted(cell, 0.025);
      out.q975(t, k) = quantile_sorted(cell, 0.975);
    }
  }
  return out;
}

PredictiveDraws extend_curve(const PosteriorSamples& samples,
                             const std::string& site_id,
                             const std::vector<double>& depths,
                             const DensityModel& model, int threads) {
  const Dataset& data = model.data();
  int site = -1;
  for (int s = 0; s < data.n_sites(); ++s) {
    if (data.site_labels[s] == site_id) {
      site = s;
      break;
    }
  }
  if (site < 0) {
    throw_error(ErrorCategory::Data,
                "site_id '" + site_id + "' is not in the dataset");
  }
  PredictionRequest req;
  req.targets = {data.sites[site]};
  req.target_labels = {site_id};
  req.depths = depths;
  req.mode = PredictionMode::MeanCurve;
  return predict_curves(samples, req, model, threads);
}

}  // namespace misp
