#include "misp/inference.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "misp/errors.hpp"
#include "misp/parallel.hpp"
#include "misp/rng.hpp"
#include "misp/simulate.hpp"

namespace misp {

namespace {

constexpr double kDivergenceThreshold = 1000.0;  // on the Hamiltonian error

// Dual averaging with the standard constants gamma=0.05, t0=10, kappa=0.75.
struct DualAveraging {
  double mu = 0.0;
  double log_eps = 0.0;
  double log_eps_bar = 0.0;
  double h_bar = 0.0;
  int m = 0;
  double delta = 0.8;

  void reset(double eps0, double delta_target) {
    mu = std::log(10.0 * eps0);
    log_eps = std::log(eps0);
    log_eps_bar = std::log(eps0);
    h_bar = 0.0;
    m = 0;
    delta = delta_target;
  }
  void update(double accept_prob) {
    m += 1;
    const double eta = 1.0 / (m + 10.0);
    h_bar = (1.0 - eta) * h_bar + eta * (delta - accept_prob);
    log_eps = mu - std::sqrt(static_cast<double>(m)) / 0.05 * h_bar;
    const double w = std::pow(static_cast<double>(m), -0.75);
    log_eps_bar = w * log_eps + (1.0 - w) * log_eps_bar;
  }
  double current() const { return std::exp(log_eps); }
  double averaged() const { return std::exp(log_eps_bar); }
};

struct Welford {
  Eigen::VectorXd mean;
  Eigen::VectorXd m2;
  long n = 0;

  void init(int dim) {
    mean = Eigen::VectorXd::Zero(dim);
    m2 = Eigen::VectorXd::Zero(dim);
    n = 0;
  }
  void add(const Eigen::VectorXd& x) {
    n += 1;
    const Eigen::VectorXd delta = x - mean;
    mean += delta / static_cast<double>(n);
    m2 += delta.cwiseProduct(x - mean);
  }
  Eigen::VectorXd variance() const {
    return m2 / static_cast<double>(n - 1);
  }
};

double kinetic(const Eigen::VectorXd& p, const Eigen::VectorXd& inv_mass) {
  return 0.5 * p.dot(inv_mass.cwiseProduct(p));
}

struct Transition {
  double accept_prob = 0.0;
  bool divergent = false;
};

class ChainRunner {
 public:
  ChainRunner(const SamplerConfig& cfg, const LogDensityTarget& target,
              const Eigen::VectorXd& init, std::uint64_t seed)
      : cfg_(cfg), target_(target), rng_(seed), u_(init) {
    inv_mass_ = Eigen::VectorXd::Ones(target.dim);
    Eigen::VectorXd grad(target.dim);
    value_ = target_.value_grad(u_, &grad);
    if (!std::isfinite(value_)) {
      throw_error(ErrorCategory::Numeric,
                  "chain initial point has non-finite log density");
    }
  }

  ChainResult run() {
    const int W = cfg_.n_warmup;
    const bool adapt_mass = W >= 40;
    double eps = find_reasonable_epsilon();
    DualAveraging da;
    da.reset(eps, cfg_.target_accept);

    // Step-size-only buffers bracket a sequence of doubling mass-estimation
    // windows; each window end refits the diagonal inverse mass from that
    // window's draws alone, then re-finds the step size under the new metric.
    int init_buf = 0;
    int term_start = W;
    std::vector<int> window_ends;
    if (adapt_mass) {
      int base = 25;
      if (W >= 150) {
        init_buf = 75;
        term_start = W - std::max(50, W / 5);
      } else {
        init_buf = (3 * W) / 20;
        term_start = W - W / 10;
        base = std::max((term_start - init_buf) / 4, 2);
      }
      int start = init_buf;
      int size = base;
      while (start < term_start) {
        int end = start + size;
        if (end + 2 * size > term_start) end = term_start;
        window_ends.push_back(end);
        start = end;
        size *= 2;
      }
    }
    Welford wf;
    if (adapt_mass) wf.init(target_.dim);

    int warm_div = 0;
    std::size_t next_window = 0;
    for (int it = 0; it < W; ++it) {
      const Transition t = transition(da.current());
      if (t.divergent) ++warm_div;
      da.update(t.accept_prob);
      if (adapt_mass && it >= init_buf && it < term_start) {
        wf.add(u_);
        if (next_window < window_ends.size() &&
            it + 1 == window_ends[next_window]) {
          if (wf.n >= 10) {
            const double n = static_cast<double>(wf.n);
            inv_mass_ = (n / (n + 5.0)) * wf.variance().array() +
                        (5.0 / (n + 5.0)) * 1e-3;
            inv_mass_ = inv_mass_.cwiseMax(1e-12);
            da.reset(find_reasonable_epsilon(), cfg_.target_accept);
          }
          wf.init(target_.dim);
          ++next_window;
        }
      }
    }
    if (W > 0 && warm_div == W) {
      throw_error(ErrorCategory::Numeric,
                  "every warmup transition diverged (dim=" +
                      std::to_string(target_.dim) +
                      ", last step size=" + std::to_string(da.current()) +
                      ", leapfrog_steps=" +
                      std::to_string(cfg_.leapfrog_steps) +
                      "); the target may be ill-conditioned at the start "
                      "point");
    }
    const double eps_final = W > 0 ? da.averaged() : eps;

    ChainResult res;
    res.draws.resize(cfg_.n_keep, target_.dim);
    res.step_size = eps_final;
    double accept_sum = 0.0;
    for (int it = 0; it < cfg_.n_keep; ++it) {
      const Transition t = transition(eps_final);
      if (t.divergent) ++res.n_divergent;
      accept_sum += t.accept_prob;
      res.draws.row(it) = u_;
    }
    res.accept_rate = accept_sum / cfg_.n_keep;
    res.inv_mass = inv_mass_;
    res.n_divergent_warmup = warm_div;
    return res;
  }

 private:
  Eigen::VectorXd draw_momentum() {
    Eigen::VectorXd p(target_.dim);
    for (int i = 0; i < target_.dim; ++i) {
      p(i) = rng_.normal() / std::sqrt(inv_mass_(i));
    }
    return p;
  }

  Transition transition(double eps) {
    const Eigen::VectorXd p = draw_momentum();
    const double h0 = -value_ + kinetic(p, inv_mass_);
    // +-20% step-size jitter breaks the trajectory-length resonance that
    // static HMC exhibits on near-Gaussian targets.
    const double jitter = 0.8 + 0.4 * rng_.uniform();
    const LeapfrogResult lr = leapfrog(u_, p, eps * jitter,
                                       cfg_.leapfrog_steps, target_,
                                       inv_mass_);
    const double u_acc = rng_.uniform();
    Transition t;
    if (lr.divergent) {
      t.divergent = true;
      return t;
    }
    const double h1 = -lr.value + kinetic(lr.p, inv_mass_);
    const double dh = h1 - h0;
    if (!std::isfinite(dh) || dh > kDivergenceThreshold) {
      t.divergent = true;
      return t;
    }
    t.accept_prob = dh <= 0.0 ? 1.0 : std::exp(-dh);
    if (u_acc < t.accept_prob || dh <= 0.0) {
      u_ = lr.u;
      value_ = lr.value;
    }
    return t;
  }

  // Doubling/halving heuristic for the starting step size: aim for a full
  // trajectory acceptance ratio near 1/2, so dual averaging starts close to
  // its equilibrium even with a short terminal window.
  double find_reasonable_epsilon() {
    double eps = 1.0;
    const Eigen::VectorXd p = draw_momentum();
    const double h0 = -value_ + kinetic(p, inv_mass_);
    auto log_ratio = [&](double e) {
      const LeapfrogResult lr =
          leapfrog(u_, p, e, cfg_.leapfrog_steps, target_, inv_mass_);
      if (lr.divergent) return -std::numeric_limits<double>::infinity();
      const double h1 = -lr.value + kinetic(lr.p, inv_mass_);
      return h0 - h1;
    };
    double lr0 = log_ratio(eps);
    const double a = lr0 > std::log(0.5) ? 1.0 : -1.0;
    const double log2 = std::log(2.0);
    while (a * lr0 > -a * log2) {
      eps *= a > 0 ? 2.0 : 0.5;
      if (eps > 1e7 || eps < 1e-10) break;
      lr0 = log_ratio(eps);
    }
    return eps;
  }

  const SamplerConfig& cfg_;
  const LogDensityTarget& target_;
  Rng rng_;
  Eigen::VectorXd u_;
  double value_ = 0.0;
  Eigen::VectorXd inv_mass_;
};

}  // namespace

void SamplerConfig::validate() const {
  if (n_chains < 1 || n_keep < 1 || leapfrog_steps < 1 || n_warmup < 0) {
    throw_error(ErrorCategory::Config,
                "sampler counts must be positive (warmup may be zero)");
  }
  if (!(target_accept > 0.0 && target_accept < 1.0)) {
    throw_error(ErrorCategory::Config, "target_accept must lie in (0, 1)");
  }
}

LeapfrogResult leapfrog(const Eigen::VectorXd& u, const Eigen::VectorXd& p,
                        double eps, int steps, const LogDensityTarget& target,
                        const Eigen::VectorXd& inv_mass) {
  LeapfrogResult r;
  r.u = u;
  r.p = p;
  Eigen::VectorXd grad(target.dim);
  r.value = target.value_grad(r.u, &grad);
  r.grad = grad;
  if (!std::isfinite(r.value) || !grad.allFinite()) {
    r.divergent = true;
    return r;
  }
  for (int s = 0; s < steps; ++s) {
    r.p += 0.5 * eps * grad;
    r.u += eps * inv_mass.cwiseProduct(r.p);
    r.value = target.value_grad(r.u, &grad);
    if (!std::isfinite(r.value) || !grad.allFinite()) {
      r.divergent = true;
      return r;
    }
    r.p += 0.5 * eps * grad;
    r.grad = grad;
  }
  return r;
}

RawSamples sample(const SamplerConfig& cfg, const LogDensityTarget& target,
                  const std::vector<Eigen::VectorXd>& init_points,
                  int threads) {
  cfg.validate();
  if (target.dim <= 0 || !target.value_grad) {
    throw_error(ErrorCategory::Config, "sampler target is not set up");
  }
  if (static_cast<int>(init_points.size()) != cfg.n_chains) {
    throw_error(ErrorCategory::Index,
                "need exactly one initial point per chain");
  }
  for (const auto& u0 : init_points) {
    if (u0.size() != target.dim) {
      throw_error(ErrorCategory::Index,
                  "initial point dimension does not match target");
    }
  }
  RawSamples out;
  out.chains.resize(cfg.n_chains);
  parallel_for(cfg.n_chains, threads, [&](int c) {
    ChainRunner runner(cfg, target, init_points[c],
                       derive_seed(cfg.seed, "chain", c));
    out.chains[c] = runner.run();
  });
  for (int c = 0; c < cfg.n_chains; ++c) {
    const auto& ch = out.chains[c];
    const double frac =
        static_cast<double>(ch.n_divergent) / std::max(1, cfg.n_keep);
    if (frac > 0.10) {
      out.warnings.push_back(
          "chain " + std::to_string(c) + ": " +
          std::to_string(ch.n_divergent) + " of " +
          std::to_string(cfg.n_keep) +
          " post-warmup transitions diverged; results are unreliable");
    }
  }
  return out;
}

Eigen::MatrixXd PosteriorSamples::pooled() const {
  Eigen::MatrixXd all(total_draws(), dim());
  int row = 0;
  for (const auto& ch : chain_draws) {
    all.middleRows(row, ch.rows()) = ch;
    row += static_cast<int>(ch.rows());
  }
  return all;
}

PosteriorSamples fit(const DensityModel& model, const SamplerConfig& cfg,
                     int threads) {
  cfg.validate();
  if (cfg.init != ChainInit::PriorDraw) {
    throw_error(ErrorCategory::Config,
                "fit() initializes chains from prior draws; supply start "
                "points through sample() for other schemes");
  }
  LogDensityTarget target;
  target.dim = model.dim();
  target.value_grad = [&model](const Eigen::VectorXd& u,
                               Eigen::VectorXd* grad) {
    return model.log_posterior_unconstrained(u, grad);
  };
  std::vector<Eigen::VectorXd> inits;
  inits.reserve(cfg.n_chains);
  for (int c = 0; c < cfg.n_chains; ++c) {
    Rng rng(derive_seed(cfg.seed, "init", c));
    const ParameterState st = draw_prior_state(
        model.config(), model.data().sites, model.n_tau(), rng);
    inits.push_back(model.to_unconstrained(st));
  }
  const RawSamples raw = sample(cfg, target, inits, threads);

  PosteriorSamples out;
  out.names = model.names();
  out.warnings = raw.warnings;
  for (const auto& ch : raw.chains) {
    Eigen::MatrixXd rows(ch.draws.rows(), model.dim());
    for (int i = 0; i < ch.draws.rows(); ++i) {
      rows.row(i) =
          model.constrained_row(model.from_unconstrained(ch.draws.row(i)));
    }
    out.chain_draws.push_back(std::move(rows));
    out.accept_rates.push_back(ch.accept_rate);
    out.step_sizes.push_back(ch.step_size);
    out.divergences.push_back(ch.n_divergent);
  }
  return out;
}

}  // namespace misp
