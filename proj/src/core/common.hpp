#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace splitnet {

// Batches are stored one sample per row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

using Rng = std::mt19937_64;

enum class ErrorCode {
  InvalidArgument = 1,
  ShapeMismatch = 2,
  NonFinite = 3,
  Io = 4,
  Config = 5,
  EmptyFilteredSet = 6,
  State = 7,
  Internal = 99,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

// Stage tags for seed derivation. Each stage draws from its own stream so that
// changing one stage (e.g. the variant) leaves the others bit-identical.
enum class Stage : std::uint64_t {
  TrainData = 1,
  TestData = 2,
  Noise = 3,
  Folds = 4,
  Filter = 5,
  MainInit = 6,
  Warmup = 7,
  SplitNetInit = 8,
  MainLoop = 9,
  Gmm = 10,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, Stage stage, std::uint64_t index = 0) {
  return splitmix64(splitmix64(master ^ splitmix64(static_cast<std::uint64_t>(stage))) + index);
}

// Labels are class indices; one-hot matrices are built on demand.
Matrix one_hot(std::span<const int> labels, int num_classes);

// Row-wise argmax, ties resolved toward the lowest index.
int argmax_row(const Matrix& m, Eigen::Index row);

// Read-only view over observed labels. When a log is attached every read is
// recorded, which lets tests audit which samples a training step touched.
class LabelView {
 public:
  explicit LabelView(std::span<const int> labels, std::vector<std::size_t>* log = nullptr)
      : labels_(labels), log_(log) {}

  int operator[](std::size_t i) const {
    if (log_) log_->push_back(i);
    return labels_[i];
  }
  std::size_t size() const { return labels_.size(); }

 private:
  std::span<const int> labels_;
  std::vector<std::size_t>* log_;
};

// Everything a training routine may see: features and observed labels only.
struct TrainingSet {
  const Matrix& features;
  std::span<const int> labels;
  int num_classes;

  std::size_t size() const { return labels.size(); }
};

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows);

// Mini-batch index lists over a shuffled permutation. A trailing batch of a
// single sample is merged into its predecessor so batch norm always sees >= 2.
std::vector<std::vector<std::size_t>> make_batches(std::span<const std::size_t> indices,
                                                   std::size_t batch_size, Rng& rng);

}  // namespace splitnet
