#pragma once

#include <filesystem>
#include <optional>
#include <variant>
#include <vector>

#include "core/common.hpp"

namespace splitnet {

enum class Mode { Train, Eval };

struct Dense {
  Matrix weight;  // in x out
  RowVector bias;
  Matrix grad_weight;
  RowVector grad_bias;

  Dense(int in, int out);
  int in_dim() const { return static_cast<int>(weight.rows()); }
  int out_dim() const { return static_cast<int>(weight.cols()); }
};

struct BatchNorm {
  RowVector gamma;
  RowVector beta;
  RowVector running_mean;
  RowVector running_var;
  RowVector grad_gamma;
  RowVector grad_beta;
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNorm(int dim, double momentum = 0.1, double eps = 1e-5);
  int dim() const { return static_cast<int>(gamma.size()); }
};

struct Relu {
  int dim = 0;
};

using Layer = std::variant<Dense, BatchNorm, Relu>;

// Mutable view of one parameter tensor and its gradient.
struct ParamSlot {
  std::span<double> value;
  std::span<double> grad;
};

struct MlpSpec {
  int input_dim = 0;
  std::vector<int> hidden;
  int output_dim = 0;
  bool batch_norm = true;
};

// Feed-forward network of Dense [-> BatchNorm] -> ReLU blocks and a final
// Dense projection producing logits.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<Layer> layers);

  // He-uniform dense init, gamma = 1, beta = 0.
  static Mlp build(const MlpSpec& spec, Rng& rng);

  int input_dim() const;
  int output_dim() const;
  const std::vector<Layer>& layers() const { return layers_; }
  std::vector<Layer>& layers() { return layers_; }

  Mode mode() const { return mode_; }
  void set_mode(Mode m) { mode_ = m; }

  // Uses the current mode. Train mode updates running statistics and keeps
  // the activations needed by backward().
  Matrix forward(const Matrix& batch);
  // Eval-mode forward; a pure function of (batch, stored parameters).
  Matrix predict(const Matrix& batch) const;

  // Accumulates nothing: gradients are overwritten from dlogits.
  void backward(const Matrix& dlogits);

  std::vector<ParamSlot> parameters();
  std::size_t parameter_count() const;
  bool has_batch_norm() const;

 private:
  struct Cache {
    std::vector<Matrix> inputs;  // input to each layer
    std::vector<Matrix> xhat;    // normalized activations for BatchNorm layers
    std::vector<RowVector> inv_std;
  };

  std::vector<Layer> layers_;
  Mode mode_ = Mode::Train;
  std::optional<Cache> cache_;
};

// Row-wise softmax with max subtraction.
Matrix softmax(const Matrix& logits);
Matrix log_softmax(const Matrix& logits);

struct LossAndGrad {
  double loss = 0.0;
  Matrix grad;  // dLoss/dLogits
};

// Mean cross-entropy against one-hot or soft targets.
LossAndGrad softmax_cross_entropy(const Matrix& logits, const Matrix& targets);

struct SgdConfig {
  double lr = 0.02;
  double momentum = 0.9;
  double weight_decay = 5e-4;
};

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;
};

class Optimizer {
 public:
  explicit Optimizer(SgdConfig cfg);
  explicit Optimizer(AdamWConfig cfg);

  void step(std::span<const ParamSlot> params);
  double lr() const;
  void set_lr(double lr);

 private:
  void ensure_buffers(std::span<const ParamSlot> params);

  std::variant<SgdConfig, AdamWConfig> cfg_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  long steps_ = 0;
};

struct MixupResult {
  Matrix features;
  Matrix targets;
  double lambda = 1.0;
};

double sample_beta(double a, double b, Rng& rng);

MixupResult mixup_with_lambda(const Matrix& batch_a, const Matrix& targets_a, const Matrix& batch_b,
                              const Matrix& targets_b, double lambda);
// lambda ~ Beta(alpha, alpha), one draw per call.
MixupResult mixup(const Matrix& batch_a, const Matrix& targets_a, const Matrix& batch_b,
                  const Matrix& targets_b, double alpha, Rng& rng);

// <prefix>.json holds the layer manifest; <prefix>.bin the parameters as
// little-endian float64 in manifest order.
void save_checkpoint(const Mlp& net, const std::filesystem::path& prefix);
Mlp load_checkpoint(const std::filesystem::path& prefix);

}  // namespace splitnet
