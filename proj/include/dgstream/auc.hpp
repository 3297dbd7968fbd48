#pragma once

#include <algorithm>
#include <cstddef>
#include <vector>

#include "dgstream/errors.hpp"

namespace dgstream {

struct ScoredSample {
  double score;
  int label;  // 1 positive, 0 negative
};

/// Rank-based AUC: (concordant + 0.5 * tied) / (P * N), computed via midranks
/// so ties contribute half. Requires at least one sample of each class.
inline double compute_auc(const std::vector<ScoredSample>& samples) {
  std::size_t pos = 0, neg = 0;
  for (const auto& s : samples) (s.label ? pos : neg) += 1;
  if (pos == 0 || neg == 0) {
    raise(Errc::DegenerateInput, "AUC needs both classes (pos=" + std::to_string(pos) +
                                     ", neg=" + std::to_string(neg) + ")");
  }
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return samples[a].score < samples[b].score;
  });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && samples[order[j]].score == samples[order[i]].score) ++j;
    double midrank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (samples[order[k]].label) rank_sum_pos += midrank;
    }
    i = j;
  }
  double p = static_cast<double>(pos);
  double n = static_cast<double>(neg);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n);
}

}  // namespace dgstream
