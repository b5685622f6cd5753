#pragma once

#include <vector>

#include "core/common.hpp"

namespace splitnet {

struct PosteriorStats {
  double mean = 0.0;
  double variance = 0.0;  // population variance
};

PosteriorStats hedge_stats(std::span<const double> w);

// Thresholds that bracket the pivot:
//   P(sigma) = 1 - 4 sigma^2
//   tau_mu   = z + (1 - z)(1 - mu) P(sigma)
//   tau_nu   = z (1 - mu P(sigma))
// so 0 <= tau_nu <= z <= tau_mu <= 1 whenever mu in [0, 1] and sigma^2 <= 1/4.
struct ThresholdPair {
  double tau_mu = 1.0;
  double tau_nu = 0.0;
  double pivot = 0.5;
  double mean = 0.0;
  double variance = 0.0;
  double spread_factor = 0.0;  // P(sigma)
};

ThresholdPair compute_thresholds(double mean, double variance, double pivot = 0.5);

enum class SplitLabel : std::uint8_t { Clean = 0, Noisy = 1 };

struct HedgedEntry {
  std::size_t index;
  SplitLabel label;
};

struct HedgedSet {
  std::vector<HedgedEntry> entries;
  std::size_t clean_count = 0;
  std::size_t noisy_count = 0;

  std::size_t size() const { return entries.size(); }
};

// CLEAN where w >= tau_mu, NOISY where w <= tau_nu, everything else left out.
// The CLEAN test runs first, so w == tau_mu == tau_nu lands in CLEAN.
HedgedSet select_hedged_set(std::span<const double> w, std::span<const int> noisy_labels,
                            const ThresholdPair& thresholds);

// Ablation: every sample labeled by w >= cut.
HedgedSet label_all(std::span<const double> w, double cut = 0.5);

}  // namespace splitnet
