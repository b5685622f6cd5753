#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "core/common.hpp"

namespace splitnet {

struct CleanDataset {
  Matrix features;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
};

enum class NoiseKind { Symmetric, Asymmetric };

std::string to_string(NoiseKind kind);
NoiseKind parse_noise_kind(const std::string& s);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::Symmetric;
  double ratio = 0.0;
  // Asymmetric only. Empty means the default shift map c -> (c + 1) mod r.
  // Classes mapped to themselves are left untouched.
  std::vector<int> pair_map;

  std::vector<int> resolved_pair_map(int num_classes) const;
  void validate(int num_classes) const;
};

// Hidden evaluation data. Only metric code should read it.
struct GroundTruth {
  std::vector<int> true_labels;
  std::vector<bool> clean_mask;
};

class NoisyDataset {
 public:
  NoisyDataset(Matrix features, std::vector<int> noisy_labels, std::vector<int> true_labels,
               int num_classes);

  std::size_t size() const { return noisy_labels_.size(); }
  int num_classes() const { return num_classes_; }
  int feature_dim() const { return static_cast<int>(features_.cols()); }
  const Matrix& features() const { return features_; }
  std::span<const int> noisy_labels() const { return noisy_labels_; }

  TrainingSet training_set() const { return {features_, noisy_labels_, num_classes_}; }

  // Every call is counted; training code must never need this.
  const GroundTruth& ground_truth() const {
    ++truth_reads_;
    return truth_;
  }
  std::size_t truth_reads() const { return truth_reads_; }
  std::size_t noisy_count() const;

 private:
  Matrix features_;
  std::vector<int> noisy_labels_;
  int num_classes_;
  GroundTruth truth_;
  mutable std::size_t truth_reads_ = 0;
};

// Gaussian clusters with means on a scaled simplex (d >= r) or a unit circle
// in the first two coordinates (d < r), unit pairwise scale.
CleanDataset generate_blobs(int num_classes, int per_class, int feature_dim, double spread,
                            std::uint64_t seed);

// Exactly round(ratio * N) samples are corrupted, chosen without replacement.
NoisyDataset inject_noise(const CleanDataset& ds, const NoiseSpec& spec, std::uint64_t seed);

struct AugmentSpec {
  double weak_sigma = 0.1;
  double strong_sigma = 0.3;
  double mask_fraction = 0.25;

  void validate() const;
};

// Per-feature population standard deviation; zero-variance columns get 1.
Vector feature_std(const Matrix& features);

class Augmenter {
 public:
  Augmenter(AugmentSpec spec, Vector feature_std);

  const AugmentSpec& spec() const { return spec_; }

  RowVector weak(const RowVector& x, Rng& rng) const;
  RowVector strong(const RowVector& x, Rng& rng) const;
  Matrix weak_batch(const Matrix& x, Rng& rng) const;
  Matrix strong_batch(const Matrix& x, Rng& rng) const;

 private:
  void jitter(Eigen::Ref<RowVector> x, double sigma, Rng& rng) const;
  void mask(Eigen::Ref<RowVector> x, Rng& rng) const;

  AugmentSpec spec_;
  Vector std_;
};

struct DatasetProvenance {
  NoiseSpec noise;
  std::uint64_t seed = 0;
};

// CSV with header f0..f{d-1},noisy_label,true_label plus a JSON sidecar at
// <csv path>.json holding r, d, N, the noise spec and the seed.
void save_dataset_csv(const NoisyDataset& ds, const DatasetProvenance& prov,
                      const std::filesystem::path& csv_path);
NoisyDataset load_dataset_csv(const std::filesystem::path& csv_path,
                              DatasetProvenance* prov = nullptr);

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

}  // namespace splitnet
