#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "core/common.hpp"
#include "core/dataset.hpp"
#include "core/nn.hpp"

namespace splitnet {

struct FoldPlan {
  int k = 0;
  std::vector<int> fold_of;  // fold index per sample

  std::vector<std::size_t> members(int fold) const;
  std::vector<std::size_t> complement(int fold) const;
};

// Random permutation sliced into k folds whose sizes differ by at most one.
FoldPlan kfold_partition(std::size_t n, int k, std::uint64_t seed);

// Architecture and SGD settings shared by the main and filtering networks.
struct NetTrainConfig {
  std::vector<int> hidden{64, 64};
  bool batch_norm = true;
  SgdConfig sgd{};
  int batch_size = 128;

  MlpSpec spec(int input_dim, int num_classes) const;
};

struct FilteredSet {
  std::vector<std::size_t> indices;  // sorted, presumed clean

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
};

// Which rows each fold's filter trained on and which it judged.
struct CrossFilterAudit {
  std::vector<std::vector<std::size_t>> trained_on;
  std::vector<std::vector<std::size_t>> evaluated;
};

// One plain cross-entropy epoch over `indices` with observed labels. Returns
// the mean batch loss.
double train_supervised_epoch(Mlp& net, Optimizer& opt, const Matrix& features,
                              const LabelView& labels, int num_classes,
                              std::span<const std::size_t> indices, int batch_size, Rng& rng,
                              const Augmenter* augment = nullptr);

// For every fold a fresh network trains on the other folds, then admits a
// held-out sample iff its observed label equals the filter argmax and the
// filter confidence reaches tau_label.
FilteredSet cross_filter(const TrainingSet& data, const FoldPlan& plan, const NetTrainConfig& net,
                         double tau_label, int epochs, std::uint64_t seed,
                         CrossFilterAudit* audit = nullptr);

struct WarmupConfig {
  double mixup_alpha = 4.0;
  int epochs = 10;
  double tau_fixed = 0.95;
  int batch_size = 128;
};

struct WarmupStats {
  double supervised_loss = 0.0;    // last epoch mean
  double consistency_loss = 0.0;   // last epoch mean
  std::size_t masked_in = 0;       // last epoch pseudo-labels passing tau_fixed
};

// Mixup cross-entropy on pairs drawn from the filtered set plus fixed-threshold
// consistency on every sample (weak view pseudo-label vs strong view), equally
// weighted. Only labels of filtered samples are read (`label_log` records them).
WarmupStats warmup_train(Mlp& net, Optimizer& opt, const TrainingSet& data,
                         const FilteredSet& filtered, const Augmenter& augment,
                         const WarmupConfig& cfg, std::uint64_t seed,
                         std::vector<std::size_t>* label_log = nullptr);

// Ordinary cross-entropy on all observed labels (weak augmentation).
void train_plain_ce(Mlp& net, Optimizer& opt, const TrainingSet& data, const Augmenter& augment,
                    int epochs, int batch_size, std::uint64_t seed);

// Cached filtered set; the key fields must match for a cache hit.
struct FilterCacheKey {
  std::size_t n = 0;
  int k = 0;
  std::uint64_t seed = 0;
  double tau_label = 0.0;
  int epochs = 0;
};

void save_filtered_set(const FilteredSet& set, const FilterCacheKey& key,
                       const std::filesystem::path& path);
std::optional<FilteredSet> load_filtered_set(const FilterCacheKey& key,
                                             const std::filesystem::path& path);

}  // namespace splitnet
