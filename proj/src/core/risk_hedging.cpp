#include "core/risk_hedging.hpp"

#include <cmath>

namespace splitnet {

PosteriorStats hedge_stats(std::span<const double> w) {
  require(!w.empty(), ErrorCode::InvalidArgument, "hedge_stats on an empty posterior");
  const double n = static_cast<double>(w.size());
  double mean = 0.0;
  for (double v : w) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : w) var += (v - mean) * (v - mean);
  return {mean, var / n};
}

ThresholdPair compute_thresholds(double mean, double variance, double pivot) {
  require(pivot > 0.0 && pivot < 1.0, ErrorCode::InvalidArgument, "pivot must lie in (0, 1)");
  require(mean >= 0.0 && mean <= 1.0, ErrorCode::InvalidArgument,
          "posterior mean must lie in [0, 1]");
  require(variance >= 0.0 && variance <= 0.25 + 1e-12, ErrorCode::InvalidArgument,
          "posterior variance exceeds the [0, 1] bound of 1/4");
  variance = std::min(variance, 0.25);

  ThresholdPair t;
  t.pivot = pivot;
  t.mean = mean;
  t.variance = variance;
  t.spread_factor = 1.0 - 4.0 * variance;
  t.tau_mu = pivot + (1.0 - pivot) * (1.0 - mean) * t.spread_factor;
  t.tau_nu = pivot * (1.0 - mean * t.spread_factor);
  return t;
}

HedgedSet select_hedged_set(std::span<const double> w, std::span<const int> noisy_labels,
                            const ThresholdPair& t) {
  require(w.size() == noisy_labels.size(), ErrorCode::ShapeMismatch,
          "posterior and label vectors differ in length");
  require(t.tau_nu <= t.tau_mu, ErrorCode::InvalidArgument, "tau_nu must not exceed tau_mu");
  HedgedSet out;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (w[i] >= t.tau_mu) {
      out.entries.push_back({i, SplitLabel::Clean});
      ++out.clean_count;
    } else if (w[i] <= t.tau_nu) {
      out.entries.push_back({i, SplitLabel::Noisy});
      ++out.noisy_count;
    }
  }
  return out;
}

HedgedSet label_all(std::span<const double> w, double cut) {
  HedgedSet out;
  out.entries.reserve(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const bool clean = w[i] >= cut;
    out.entries.push_back({i, clean ? SplitLabel::Clean : SplitLabel::Noisy});
    clean ? ++out.clean_count : ++out.noisy_count;
  }
  return out;
}

}  // namespace splitnet
