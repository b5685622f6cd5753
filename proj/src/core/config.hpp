#pragma once

#include <string>

#include <json.hpp>

#include "core/dataset.hpp"
#include "core/main_loop.hpp"
#include "core/warmup.hpp"

namespace splitnet {

enum class VariantKind { Full, NoSplitNet, NoWarmup, NoHedging, FixedThreshold, PlainCe };

struct Variant {
  VariantKind kind = VariantKind::Full;
  double fixed_tau = 0.95;  // FixedThreshold only

  // "full", "no_splitnet", "no_warmup", "no_hedging", "plain_ce",
  // "fixed_threshold(0.75)"
  std::string name() const;
  static Variant parse(const std::string& s);
};

struct ExperimentConfig {
  int num_classes = 4;
  int per_class = 500;
  int test_per_class = 250;
  int feature_dim = 16;
  double spread = 0.6;
  NoiseSpec noise{NoiseKind::Symmetric, 0.5, {}};
  AugmentSpec augment{};
  NetTrainConfig net{};
  int filter_k = 8;
  int filter_epochs = 20;
  double filter_tau_label = 0.45;
  std::string filter_cache;
  WarmupConfig warmup{};
  LoopConfig loop{};
  Variant variant{};
  std::uint64_t seed = 1;
  std::string output_dir = "runs/default";
  bool dump_samples = false;
  bool save_checkpoints = false;

  void validate() const;
};

// Flat JSON document; missing keys take their defaults, unknown keys are
// rejected. Errors name the offending key.
ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_config(const std::string& path);

// Overrides a single key, e.g. ("noise_ratio", 0.8).
void set_config_value(ExperimentConfig& cfg, const std::string& key, const nlohmann::json& value);

}  // namespace splitnet
