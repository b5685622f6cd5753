#include "core/loss_gmm.hpp"

#include <algorithm>
#include <cmath>

namespace splitnet {

Vector per_sample_losses(const Mlp& net, const TrainingSet& data) {
  require(net.output_dim() == data.num_classes, ErrorCode::ShapeMismatch,
          "network output width does not match the class count");
  Matrix logp = log_softmax(net.predict(data.features));
  Vector losses(logp.rows());
  for (Eigen::Index i = 0; i < logp.rows(); ++i) {
    losses(i) = -logp(i, data.labels[static_cast<std::size_t>(i)]);
  }
  return losses;
}

Vector normalize_losses(const Vector& losses) {
  require(losses.size() > 0, ErrorCode::InvalidArgument, "no losses to normalize");
  require(losses.allFinite(), ErrorCode::NonFinite, "non-finite per-sample loss");
  const double lo = losses.minCoeff();
  const double hi = losses.maxCoeff();
  if (hi - lo < 1e-9) return Vector::Constant(losses.size(), 0.5);
  return (losses.array() - lo) / (hi - lo);
}

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double log_normal(double x, double mean, double var) {
  const double d = x - mean;
  return -kLogSqrt2Pi - 0.5 * std::log(var) - 0.5 * d * d / var;
}

double percentile(std::vector<double> sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

// Per-sample log joint densities and the total log-likelihood.
double e_step(std::span<const double> values, const GmmParams& g, std::vector<double>& resp0) {
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double a = std::log(g.weight[0]) + log_normal(values[i], g.mean[0], g.var[0]);
    const double b = std::log(g.weight[1]) + log_normal(values[i], g.mean[1], g.var[1]);
    const double m = std::max(a, b);
    const double lse = m + std::log(std::exp(a - m) + std::exp(b - m));
    resp0[i] = std::exp(a - lse);
    total += lse;
  }
  return total;
}

}  // namespace

GmmParams fit_gmm_1d(std::span<const double> values, double tol, int max_iter, std::uint64_t seed) {
  require(values.size() >= 2, ErrorCode::InvalidArgument, "GMM fit needs at least two values");
  require(max_iter >= 1, ErrorCode::InvalidArgument, "GMM max_iter must be positive");
  for (double v : values) require(std::isfinite(v), ErrorCode::NonFinite, "non-finite GMM input");

  const double n = static_cast<double>(values.size());
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var = std::max(var / n, kVarianceFloor);

  GmmParams g;
  g.mean = {percentile(sorted, 0.1), percentile(sorted, 0.9)};
  if (g.mean[0] == g.mean[1]) {
    Rng rng(seed);
    const double nudge = 1e-3 * (1.0 + std::uniform_real_distribution<double>(0.0, 1.0)(rng));
    g.mean[0] -= nudge;
    g.mean[1] += nudge;
  }
  g.var = {var, var};
  g.weight = {0.5, 0.5};

  std::vector<double> resp0(values.size());
  double ll = e_step(values, g, resp0);
  g.log_likelihood.push_back(ll);

  for (int it = 0; it < max_iter; ++it) {
    double n0 = 0.0, s0 = 0.0, s1 = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      n0 += resp0[i];
      s0 += resp0[i] * values[i];
      s1 += (1.0 - resp0[i]) * values[i];
    }
    const double n1 = n - n0;
    // A component that lost all support keeps its previous parameters.
    if (n0 > 0.0) g.mean[0] = s0 / n0;
    if (n1 > 0.0) g.mean[1] = s1 / n1;
    double v0 = 0.0, v1 = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double d0 = values[i] - g.mean[0];
      const double d1 = values[i] - g.mean[1];
      v0 += resp0[i] * d0 * d0;
      v1 += (1.0 - resp0[i]) * d1 * d1;
    }
    if (n0 > 0.0) g.var[0] = std::max(v0 / n0, kVarianceFloor);
    if (n1 > 0.0) g.var[1] = std::max(v1 / n1, kVarianceFloor);
    g.weight = {std::clamp(n0 / n, 1e-300, 1.0), std::clamp(n1 / n, 1e-300, 1.0)};
    const double total = g.weight[0] + g.weight[1];
    g.weight[0] /= total;
    g.weight[1] /= total;

    const double next = e_step(values, g, resp0);
    g.log_likelihood.push_back(next);
    g.iterations = it + 1;
    // EM never decreases the likelihood; anything beyond round-off is a bug.
    require(next >= ll - 1e-9 * (1.0 + std::abs(ll)), ErrorCode::Internal,
            "EM log-likelihood decreased");
    const double gain = next - ll;
    ll = next;
    if (gain < tol) break;
  }
  g.clean_component = g.mean[0] <= g.mean[1] ? 0 : 1;
  return g;
}

Vector clean_posterior(const GmmParams& gmm, std::span<const double> values) {
  const int c = gmm.clean_component;
  const int o = 1 - c;
  require(gmm.var[0] > 0.0 && gmm.var[1] > 0.0, ErrorCode::InvalidArgument,
          "GMM variances must be positive");
  Vector w(static_cast<Eigen::Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double a = std::log(gmm.weight[c]) + log_normal(values[i], gmm.mean[c], gmm.var[c]);
    const double b = std::log(gmm.weight[o]) + log_normal(values[i], gmm.mean[o], gmm.var[o]);
    // Logistic form of a / (a + b) in log space.
    const double p = 1.0 / (1.0 + std::exp(b - a));
    w(static_cast<Eigen::Index>(i)) = std::clamp(p, 0.0, 1.0);
  }
  return w;
}

}  // namespace splitnet
