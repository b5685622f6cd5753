#include "core/metrics.hpp"

namespace splitnet {

SplitMetrics split_metrics(const std::vector<bool>& predicted_clean,
                           const std::vector<bool>& truly_clean) {
  require(predicted_clean.size() == truly_clean.size(), ErrorCode::ShapeMismatch,
          "split_metrics: prediction and truth lengths differ");
  SplitMetrics m;
  for (std::size_t i = 0; i < truly_clean.size(); ++i) {
    if (predicted_clean[i]) {
      truly_clean[i] ? ++m.tp : ++m.fp;
    } else {
      truly_clean[i] ? ++m.fn : ++m.tn;
    }
  }
  const auto d = [](std::size_t x) { return static_cast<double>(x); };
  m.precision = m.tp + m.fp ? d(m.tp) / d(m.tp + m.fp) : 0.0;
  m.recall = m.tp + m.fn ? d(m.tp) / d(m.tp + m.fn) : 0.0;
  const double pr = m.precision + m.recall;
  m.f1 = pr > 0.0 ? 2.0 * m.precision * m.recall / pr : 0.0;
  const std::size_t n = truly_clean.size();
  m.accuracy = n ? d(m.tp + m.tn) / d(n) : 0.0;
  return m;
}

PseudoLabelCounts pseudo_label_counts(std::span<const int> pseudo, std::span<const int> truth,
                                      const std::vector<bool>& mask) {
  require(pseudo.size() == truth.size() && mask.size() == truth.size(), ErrorCode::ShapeMismatch,
          "pseudo_label_counts: inputs must align");
  PseudoLabelCounts out;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    pseudo[i] == truth[i] ? ++out.correct : ++out.wrong;
  }
  return out;
}

}  // namespace splitnet
