#pragma once

#include <array>
#include <vector>

#include "core/common.hpp"
#include "core/nn.hpp"

namespace splitnet {

inline constexpr double kVarianceFloor = 1e-6;

// loss_i = -log p(x_i)[y_i] under the eval-mode network, no augmentation.
Vector per_sample_losses(const Mlp& net, const TrainingSet& data);

// Min-max to [0, 1]; a spread below 1e-9 maps everything to 0.5.
Vector normalize_losses(const Vector& losses);

struct GmmParams {
  std::array<double, 2> mean{};
  std::array<double, 2> var{};
  std::array<double, 2> weight{};
  int clean_component = 0;  // index of the lower-mean component
  int iterations = 0;
  // Total log-likelihood before the first step and after every EM step.
  std::vector<double> log_likelihood;
};

// Two-component 1-D EM. Means start at the 10th/90th percentiles with equal
// weights and the sample variance; stops when the log-likelihood gain drops
// below tol. The seed only breaks the tie when both start means coincide.
GmmParams fit_gmm_1d(std::span<const double> values, double tol = 1e-6, int max_iter = 200,
                     std::uint64_t seed = 0);

// Responsibility of the clean component at every value.
Vector clean_posterior(const GmmParams& gmm, std::span<const double> values);

inline std::span<const double> as_span(const Vector& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace splitnet
