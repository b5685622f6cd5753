#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "core/config.hpp"
#include "core/dataset.hpp"
#include "core/metrics.hpp"
#include "core/nn.hpp"
#include "core/warmup.hpp"

namespace splitnet {

// The only component allowed to read ground truth. Every lookup goes through
// NoisyDataset::ground_truth(), and reads() counts them so tests can check
// that no other code touched it.
class Evaluator {
 public:
  Evaluator(const NoisyDataset& train, const CleanDataset& test) : train_(train), test_(test) {}

  double test_accuracy(const Mlp& net) const;
  SplitMetrics split(const std::vector<bool>& predicted_clean) const;
  PseudoLabelCounts pseudo(std::span<const int> pseudo, const std::vector<bool>& mask) const;
  double filter_precision(const FilteredSet& filtered) const;
  std::vector<int> true_labels() const;
  std::size_t reads() const { return reads_; }

 private:
  const GroundTruth& truth() const;

  const NoisyDataset& train_;
  const CleanDataset& test_;
  mutable std::size_t reads_ = 0;
};

// One row of epochs.csv. NaN marks a column that does not apply to the variant.
struct EpochReport {
  int epoch = 0;
  double tau_mu = 0.0;
  double tau_nu = 0.0;
  std::size_t n_clean_set = 0;
  double eta = 0.0;
  std::size_t mask_count = 0;
  std::size_t pseudo_correct = 0;
  std::size_t pseudo_wrong = 0;
  double split_f1_splitnet = 0.0;
  double split_f1_gmm = 0.0;
  double split_acc_splitnet = 0.0;
  double split_acc_gmm = 0.0;
  double test_acc = 0.0;

  bool operator==(const EpochReport&) const = default;
};

// One row of hedging.csv.
struct HedgingReport {
  int epoch = 0;
  double mean = 0.0;
  double variance = 0.0;
  double tau_mu = 0.0;
  double tau_nu = 0.0;
  std::size_t hedged_clean = 0;
  std::size_t hedged_noisy = 0;

  bool operator==(const HedgingReport&) const = default;
};

struct RunSummary {
  std::string variant;
  std::uint64_t seed = 0;
  std::string noise_kind;
  double noise_ratio = 0.0;
  int epochs = 0;
  std::size_t noisy_count = 0;
  double best_test_acc = 0.0;
  double last_test_acc = 0.0;
  double tail_test_acc = 0.0;  // mean over the last third of epochs
  double warmup_test_acc = 0.0;
  double best_split_f1_splitnet = 0.0;
  double tail_split_f1_splitnet = 0.0;
  double tail_split_acc_splitnet = 0.0;
  double tail_split_f1_gmm = 0.0;
  double tail_split_acc_gmm = 0.0;
  std::size_t filtered_count = 0;
  double filtered_precision = 0.0;
  std::size_t splitnet_skips = 0;
  std::size_t truth_reads = 0;

  // NaN-aware: two NaN fields compare equal.
  bool same_as(const RunSummary& o) const;
};

struct RunReport {
  std::vector<EpochReport> epochs;
  std::vector<HedgingReport> hedging;
  RunSummary summary;
};

// Cross-filtering stage only; honours cfg.filter_cache.
struct FilterOutcome {
  FilteredSet filtered;
  double precision = 0.0;
  bool from_cache = false;
};

struct BenchmarkData {
  NoisyDataset train;
  CleanDataset test;
};

BenchmarkData make_benchmark(const ExperimentConfig& cfg);

FilterOutcome run_filter_stage(const ExperimentConfig& cfg, const NoisyDataset& train,
                               const Evaluator& eval);

// Runs the configured variant end to end. With write_files, creates
// cfg.output_dir and writes config.json, epochs.csv, hedging.csv,
// summary.json and the optional dumps/checkpoints.
RunReport run_experiment(const ExperimentConfig& cfg, bool write_files = true);

void write_epochs_csv(const std::vector<EpochReport>& rows, const std::filesystem::path& path);
std::vector<EpochReport> read_epochs_csv(const std::filesystem::path& path);
void write_hedging_csv(const std::vector<HedgingReport>& rows, const std::filesystem::path& path);
std::vector<HedgingReport> read_hedging_csv(const std::filesystem::path& path);
nlohmann::json summary_to_json(const RunSummary& s);
RunSummary summary_from_json(const nlohmann::json& j);
void write_summary(const RunSummary& s, const std::filesystem::path& path);
RunSummary read_summary(const std::filesystem::path& path);

// Grid: flat JSON object mapping config keys to arrays of values. Points are
// the cartesian product, written to <output_dir>/point_NNN, plus sweep.csv.
struct SweepPoint {
  nlohmann::json overrides;
  std::filesystem::path dir;
  RunSummary summary;
};

std::vector<nlohmann::json> expand_grid(const nlohmann::json& grid);
std::vector<SweepPoint> run_sweep(const ExperimentConfig& base, const nlohmann::json& grid);

struct MetricDelta {
  std::string name;
  double a = 0.0;
  double b = 0.0;
  double delta = 0.0;  // b - a
};

struct Comparison {
  std::vector<MetricDelta> deltas;
  bool exceeded = false;  // some |delta| > tol
};

// Numeric summary.json fields present in both directories.
Comparison compare_reports(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b,
                           double tol);

}  // namespace splitnet
