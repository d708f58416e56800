#include "misp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>

#include "misp/errors.hpp"
#include "misp/stats.hpp"

namespace misp {

namespace {

void check_chains(const std::vector<std::vector<double>>& chains) {
  if (chains.size() < 2) {
    throw_error(ErrorCategory::Data,
                "convergence diagnostics need at least two chains");
  }
  const std::size_t len = chains[0].size();
  for (const auto& c : chains) {
    if (c.size() != len) {
      throw_error(ErrorCategory::Data, "chains must have equal lengths");
    }
  }
  if (len < 4) {
    throw_error(ErrorCategory::Data,
                "chains must hold at least four draws each");
  }
}

bool all_equal(const std::vector<std::vector<double>>& chains) {
  const double first = chains[0][0];
  for (const auto& c : chains) {
    for (double v : c) {
      if (v != first) return false;
    }
  }
  return true;
}

// Pool in chain order, rank-normalize, split each chain into halves (middle
// draw dropped when the length is odd).
std::vector<std::vector<double>> split_normalized(
    const std::vector<std::vector<double>>& chains) {
  const int n = static_cast<int>(chains[0].size());
  std::vector<double> pooled;
  pooled.reserve(chains.size() * n);
  for (const auto& c : chains) pooled.insert(pooled.end(), c.begin(), c.end());
  const std::vector<double> z = rank_normalize(pooled);

  const int h = n / 2;
  std::vector<std::vector<double>> out;
  out.reserve(2 * chains.size());
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const double* base = z.data() + c * n;
    out.emplace_back(base, base + h);
    out.emplace_back(base + (n - h), base + n);
  }
  return out;
}

struct Moments {
  double within = 0.0;    // W: mean within-chain variance
  double var_plus = 0.0;  // pooled variance estimate
  int m = 0;              // number of (split) chains
  int h = 0;              // split chain length
  std::vector<double> means;
};

Moments split_moments(const std::vector<std::vector<double>>& split) {
  Moments mo;
  mo.m = static_cast<int>(split.size());
  mo.h = static_cast<int>(split[0].size());
  mo.means.resize(mo.m);
  double w_sum = 0.0;
  for (int c = 0; c < mo.m; ++c) {
    mo.means[c] = mean(split[c]);
    w_sum += variance(split[c]);
  }
  mo.within = w_sum / mo.m;
  const double grand =
      std::accumulate(mo.means.begin(), mo.means.end(), 0.0) / mo.m;
  double b = 0.0;
  for (double mu : mo.means) b += (mu - grand) * (mu - grand);
  b *= static_cast<double>(mo.h) / (mo.m - 1);
  mo.var_plus = (mo.h - 1.0) / mo.h * mo.within + b / mo.h;
  return mo;
}

}  // namespace

std::vector<double> rank_normalize(const std::vector<double>& pooled) {
  const std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return pooled[a] < pooled[b];
  });
  std::vector<double> z(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    // Ties share the average of their 1-based ranks i+1 .. j+1.
    const double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    const double score = normal_quantile((r - 0.375) / (n + 0.25));
    for (std::size_t k = i; k <= j; ++k) z[order[k]] = score;
    i = j + 1;
  }
  return z;
}

DiagnosticResult split_rhat(const std::vector<std::vector<double>>& chains) {
  check_chains(chains);
  if (all_equal(chains)) return {0.0, false};
  const auto split = split_normalized(chains);
  const Moments mo = split_moments(split);
  if (!(mo.within > 0.0)) return {0.0, false};
  return {std::sqrt(mo.var_plus / mo.within), true};
}

DiagnosticResult effective_sample_size(
    const std::vector<std::vector<double>>& chains) {
  check_chains(chains);
  if (all_equal(chains)) return {0.0, false};
  const auto split = split_normalized(chains);
  const Moments mo = split_moments(split);
  if (!(mo.var_plus > 0.0)) return {0.0, false};
  const int m = mo.m;
  const int h = mo.h;

  // Lag-t autocovariances (divide-by-n convention) are computed lazily: the
  // Geyer rule usually stops after a handful of lags.
  auto acov = [&](int c, int t) {
    const auto& x = split[c];
    const double mu = mo.means[c];
    double s = 0.0;
    for (int i = 0; i + t < h; ++i) s += (x[i] - mu) * (x[i + t] - mu);
    return s / h;
  };
  auto rho = [&](int t) {
    double a = 0.0;
    for (int c = 0; c < m; ++c) a += acov(c, t);
    a /= m;
    return 1.0 - (mo.within - a) / mo.var_plus;
  };

  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 0; 2 * k + 1 < h; ++k) {
    double pair = rho(2 * k) + rho(2 * k + 1);
    if (!std::isfinite(pair) || pair < 0.0) break;
    pair = std::min(pair, prev);
    sum += pair;
    prev = pair;
  }
  if (sum <= 0.0) return {0.0, false};
  const double tau = -1.0 + 2.0 * sum;
  if (!(tau > 0.0)) return {0.0, false};
  return {static_cast<double>(m) * h / tau, true};
}

}  // namespace misp
