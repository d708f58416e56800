#pragma once

#include <vector>

namespace misp {

// Value plus a defined flag so constant chains report "undefined" instead of
// propagating NaN into summaries.
struct DiagnosticResult {
  double value = 0.0;
  bool defined = false;
};

// Normal scores of the pooled sample: average ranks for ties, then
// z = Phi^{-1}((r - 3/8) / (n + 1/4)).
std::vector<double> rank_normalize(const std::vector<double>& pooled);

// Rank-normalized split R-hat over >= 2 equal-length chains (length >= 4).
DiagnosticResult split_rhat(const std::vector<std::vector<double>>& chains);

// Rank-normalized ESS with Geyer initial-monotone truncation of the
// multichain autocorrelation sequence.
DiagnosticResult effective_sample_size(
    const std::vector<std::vector<double>>& chains);

}  // namespace misp
