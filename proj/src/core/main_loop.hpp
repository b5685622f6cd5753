#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "core/common.hpp"
#include "core/dataset.hpp"
#include "core/loss_gmm.hpp"
#include "core/nn.hpp"
#include "core/risk_hedging.hpp"
#include "core/split_model.hpp"

namespace splitnet {

// Where per-sample split scores come from each epoch.
enum class ScoreSource {
  SplitNet,  // learned splitter trained on the hedged set
  Gmm,       // s_clean = w straight from the mixture (no SplitNet)
};

struct LoopConfig {
  double beta1 = 0.95;  // upper bound of the dynamic threshold
  double beta2 = 0.5;   // lower bound
  double tau_label = 0.95;
  double pivot = 0.5;
  int epochs = 30;
  double lr = 0.02;
  double lr_decay = 0.1;
  int lr_decay_epoch = -1;  // -1: two thirds of the way through
  double momentum = 0.9;
  double weight_decay = 5e-4;
  int batch_size = 128;
  SplitNetConfig splitnet{};
  double gmm_tol = 1e-6;
  int gmm_max_iter = 200;
  ScoreSource score_source = ScoreSource::SplitNet;
  bool hedging = true;  // false: SplitNet learns every sample's GMM label at 0.5
  std::optional<double> fixed_threshold;  // replaces the dynamic threshold

  void validate() const;
  int decay_epoch() const;
  double lr_at(int epoch) const;
};

struct PseudoLabels {
  std::vector<int> label;
  std::vector<double> confidence;
};

// argmax / max of the eval-mode prediction on an already weak-augmented batch.
PseudoLabels make_pseudo_labels(const Mlp& net, const Matrix& weak_batch);
PseudoLabels make_pseudo_labels(const Mlp& net, const Matrix& batch, const Augmenter& augment,
                                Rng& rng);

// (1 - max(s)) beta1 + max(s) beta2
double dynamic_threshold(const SplitScore& score, double beta1, double beta2);

struct ConsistencyTerm {
  double loss = 0.0;
  std::size_t mask_count = 0;
  std::vector<bool> mask;
  Matrix grad;  // dLoss/dLogits of the strong view
};

// Masked cross-entropy between pseudo-labels and strong-view logits, averaged
// over every row (masked-out rows count in the denominator).
ConsistencyTerm consistency_term(const Matrix& strong_logits, const PseudoLabels& q,
                                 std::span<const double> thresholds);

// Augments the batch, pseudo-labels the weak view and scores the strong view
// with the network in its current mode.
ConsistencyTerm unsupervised_loss(Mlp& net, const Matrix& batch, std::span<const SplitScore> scores,
                                  const Augmenter& augment, double beta1, double beta2, Rng& rng);

std::vector<std::size_t> clean_set(std::span<const SplitScore> scores, double tau_label);

struct CombinedLoss {
  double eta = 0.0;
  double loss = 0.0;
};

// eta = |C| / N; loss = eta L_C + (1 - eta) L_U.
CombinedLoss total_loss(double loss_clean, double loss_unlabeled, std::size_t clean_count,
                        std::size_t n);

// Scores used before any SplitNet exists: hard GMM split at w >= 0.5.
std::vector<SplitScore> gmm_hard_scores(std::span<const double> w);
std::vector<SplitScore> gmm_soft_scores(std::span<const double> w);

// Snapshot handed to the observer after every epoch's update.
struct EpochState {
  int epoch = 0;
  double lr = 0.0;
  const Vector* losses = nullptr;
  const Vector* normalized = nullptr;
  const Vector* w = nullptr;
  const GmmParams* gmm = nullptr;
  ThresholdPair thresholds;
  std::size_t hedged_clean = 0;
  std::size_t hedged_noisy = 0;
  const HedgedSet* hedged = nullptr;
  bool splitnet_trained_this_epoch = false;
  const std::vector<SplitScore>* scores = nullptr;
  std::size_t clean_count = 0;
  double eta = 0.0;
  const std::vector<int>* pseudo_label = nullptr;
  const std::vector<bool>* pseudo_mask = nullptr;
  std::size_t mask_count = 0;
  double mean_loss = 0.0;
  const Mlp* net = nullptr;
};

using EpochObserver = std::function<void(const EpochState&)>;

// Per-epoch record of which observed labels the supervised term read.
struct LoopAudit {
  std::vector<std::vector<std::size_t>> supervised_reads;
  std::vector<std::vector<std::size_t>> clean_sets;
};

struct LoopOutcome {
  std::size_t splitnet_skips = 0;
};

// Alternating loop, one refresh per epoch: losses -> GMM -> hedging ->
// SplitNet -> scores, then SGD over the epoch on eta L_C + (1 - eta) L_U.
LoopOutcome run_training(Mlp& net, const TrainingSet& data, const Augmenter& augment,
                         const LoopConfig& cfg, std::uint64_t seed,
                         const EpochObserver& observer = {}, LoopAudit* audit = nullptr);

}  // namespace splitnet
