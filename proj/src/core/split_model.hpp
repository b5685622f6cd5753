#pragma once

#include <optional>
#include <vector>

#include "core/common.hpp"
#include "core/nn.hpp"
#include "core/risk_hedging.hpp"

namespace splitnet {

// Main-model class distributions for the current and the previous outer
// iteration. `previous` is all zeros until the second push.
struct PredictionHistory {
  Matrix current;
  Matrix previous;

  PredictionHistory(std::size_t n, int num_classes);
  void push(Matrix predictions);
};

// Row i = [current_i | current_i - previous_i | one_hot(y_i)], width 3r.
// With use_delta = false the middle block is zeroed (ablation).
Matrix build_input(const PredictionHistory& history, std::span<const int> noisy_labels,
                   bool use_delta = true);

struct SplitNetConfig {
  int hidden = 64;
  int blocks = 3;
  bool batch_norm = true;
  bool use_delta = true;
  int epochs = 5;
  int batch_size = 128;
  AdamWConfig optimizer{};
};

struct SplitScore {
  double clean = 0.5;
  double noisy = 0.5;

  double confidence() const { return clean >= noisy ? clean : noisy; }
};

// Output unit 0 scores CLEAN, unit 1 NOISY.
class SplitNetModel {
 public:
  SplitNetModel(int num_classes, const SplitNetConfig& cfg, std::uint64_t seed);

  const SplitNetConfig& config() const { return cfg_; }
  int num_classes() const { return num_classes_; }
  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  Optimizer& optimizer() { return optimizer_; }
  bool trained() const { return trained_; }
  void mark_trained() { trained_ = true; }

 private:
  int num_classes_;
  SplitNetConfig cfg_;
  Mlp net_;
  Optimizer optimizer_;
  bool trained_ = false;
};

enum class SplitTrainOutcome { Trained, Skipped };

// Smallest hedged set worth training on: two batch-norm-sized batches with
// both labels present.
inline constexpr std::size_t kMinHedgedBatch = 2;

// Cross-entropy on the hedged labels with AdamW over shuffled mini-batches.
// Reads only the rows of `inputs` named by the hedged set; `access_log`, when
// given, receives every row index read. Leaves the model in eval mode.
SplitTrainOutcome train_splitnet(SplitNetModel& model, const HedgedSet& hedged,
                                 const Matrix& inputs, int epochs, int batch_size, Rng& rng,
                                 std::vector<std::size_t>* access_log = nullptr);

std::vector<SplitScore> split_scores(const SplitNetModel& model, const Matrix& inputs);

}  // namespace splitnet
