#pragma once

#include <vector>

#include "core/common.hpp"

namespace splitnet {

// Clean is the positive class throughout.
struct SplitMetrics {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

SplitMetrics split_metrics(const std::vector<bool>& predicted_clean,
                           const std::vector<bool>& truly_clean);

struct PseudoLabelCounts {
  std::size_t correct = 0;
  std::size_t wrong = 0;
};

// Among masked-in samples, how many pseudo-labels match the true label.
PseudoLabelCounts pseudo_label_counts(std::span<const int> pseudo, std::span<const int> truth,
                                      const std::vector<bool>& mask);

}  // namespace splitnet
