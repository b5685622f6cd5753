#include "core/config.hpp"

#include <cstdio>
#include <fstream>

namespace splitnet {

std::string Variant::name() const {
  switch (kind) {
    case VariantKind::Full: return "full";
    case VariantKind::NoSplitNet: return "no_splitnet";
    case VariantKind::NoWarmup: return "no_warmup";
    case VariantKind::NoHedging: return "no_hedging";
    case VariantKind::PlainCe: return "plain_ce";
    case VariantKind::FixedThreshold: {
      char buf[64];
      std::snprintf(buf, sizeof buf, "fixed_threshold(%g)", fixed_tau);
      return buf;
    }
  }
  return "full";
}

Variant Variant::parse(const std::string& s) {
  if (s == "full") return {VariantKind::Full};
  if (s == "no_splitnet") return {VariantKind::NoSplitNet};
  if (s == "no_warmup") return {VariantKind::NoWarmup};
  if (s == "no_hedging") return {VariantKind::NoHedging};
  if (s == "plain_ce") return {VariantKind::PlainCe};
  if (s == "fixed_threshold") return {VariantKind::FixedThreshold};
  const std::string prefix = "fixed_threshold(";
  if (s.rfind(prefix, 0) == 0 && s.size() > prefix.size() + 1 && s.back() == ')') {
    const std::string num = s.substr(prefix.size(), s.size() - prefix.size() - 1);
    char* end = nullptr;
    const double tau = std::strtod(num.c_str(), &end);
    if (end && *end == '\0') return {VariantKind::FixedThreshold, tau};
  }
  fail(ErrorCode::Config, "variant: unknown value '" + s + "'");
}

namespace {

template <typename T>
T get_as(const nlohmann::json& v, const std::string& key) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::Config, key + ": wrong type (" + std::string(v.type_name()) + ")");
  }
}

void check(bool cond, const std::string& key, const std::string& what) {
  if (!cond) fail(ErrorCode::Config, key + ": " + what);
}

}  // namespace

void set_config_value(ExperimentConfig& c, const std::string& key, const nlohmann::json& v) {
  auto i = [&] { return get_as<int>(v, key); };
  auto d = [&] { return get_as<double>(v, key); };
  auto b = [&] { return get_as<bool>(v, key); };
  auto s = [&] { return get_as<std::string>(v, key); };

  if (key == "seed") c.seed = get_as<std::uint64_t>(v, key);
  else if (key == "variant") c.variant = [&] {
    Variant parsed = Variant::parse(s());
    if (parsed.kind == VariantKind::FixedThreshold && s() == "fixed_threshold") {
      parsed.fixed_tau = c.variant.fixed_tau;
    }
    return parsed;
  }();
  else if (key == "fixed_tau") c.variant.fixed_tau = d();
  else if (key == "output_dir") c.output_dir = s();
  else if (key == "dump_samples") c.dump_samples = b();
  else if (key == "save_checkpoints") c.save_checkpoints = b();
  else if (key == "num_classes") c.num_classes = i();
  else if (key == "per_class") c.per_class = i();
  else if (key == "test_per_class") c.test_per_class = i();
  else if (key == "feature_dim") c.feature_dim = i();
  else if (key == "spread") c.spread = d();
  else if (key == "noise_kind") {
    try {
      c.noise.kind = parse_noise_kind(s());
    } catch (const Error& e) {
      fail(ErrorCode::Config, key + ": " + e.what());
    }
  }
  else if (key == "noise_ratio") c.noise.ratio = d();
  else if (key == "pair_map") c.noise.pair_map = get_as<std::vector<int>>(v, key);
  else if (key == "weak_sigma") c.augment.weak_sigma = d();
  else if (key == "strong_sigma") c.augment.strong_sigma = d();
  else if (key == "mask_fraction") c.augment.mask_fraction = d();
  else if (key == "hidden") c.net.hidden = get_as<std::vector<int>>(v, key);
  else if (key == "batch_norm") c.net.batch_norm = b();
  else if (key == "lr") { c.net.sgd.lr = d(); c.loop.lr = c.net.sgd.lr; }
  else if (key == "momentum") { c.net.sgd.momentum = d(); c.loop.momentum = c.net.sgd.momentum; }
  else if (key == "weight_decay") { c.net.sgd.weight_decay = d(); c.loop.weight_decay = c.net.sgd.weight_decay; }
  else if (key == "batch_size") {
    c.net.batch_size = i();
    c.loop.batch_size = c.net.batch_size;
    c.warmup.batch_size = c.net.batch_size;
  }
  else if (key == "filter_k") c.filter_k = i();
  else if (key == "filter_epochs") c.filter_epochs = i();
  else if (key == "filter_tau_label") c.filter_tau_label = d();
  else if (key == "filter_cache") c.filter_cache = s();
  else if (key == "warmup_epochs") c.warmup.epochs = i();
  else if (key == "mixup_alpha") c.warmup.mixup_alpha = d();
  else if (key == "warmup_tau") c.warmup.tau_fixed = d();
  else if (key == "epochs") c.loop.epochs = i();
  else if (key == "lr_decay") c.loop.lr_decay = d();
  else if (key == "lr_decay_epoch") c.loop.lr_decay_epoch = i();
  else if (key == "beta1") c.loop.beta1 = d();
  else if (key == "beta2") c.loop.beta2 = d();
  else if (key == "tau_label") c.loop.tau_label = d();
  else if (key == "pivot") c.loop.pivot = d();
  else if (key == "splitnet_hidden") c.loop.splitnet.hidden = i();
  else if (key == "splitnet_blocks") c.loop.splitnet.blocks = i();
  else if (key == "splitnet_batch_norm") c.loop.splitnet.batch_norm = b();
  else if (key == "splitnet_use_delta") c.loop.splitnet.use_delta = b();
  else if (key == "splitnet_epochs") c.loop.splitnet.epochs = i();
  else if (key == "splitnet_batch_size") c.loop.splitnet.batch_size = i();
  else if (key == "splitnet_lr") c.loop.splitnet.optimizer.lr = d();
  else if (key == "splitnet_weight_decay") c.loop.splitnet.optimizer.weight_decay = d();
  else if (key == "gmm_tol") c.loop.gmm_tol = d();
  else if (key == "gmm_max_iter") c.loop.gmm_max_iter = i();
  else fail(ErrorCode::Config, key + ": unknown field");
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  return nlohmann::json{
      {"seed", c.seed},
      {"variant", c.variant.name()},
      {"fixed_tau", c.variant.fixed_tau},
      {"output_dir", c.output_dir},
      {"dump_samples", c.dump_samples},
      {"save_checkpoints", c.save_checkpoints},
      {"num_classes", c.num_classes},
      {"per_class", c.per_class},
      {"test_per_class", c.test_per_class},
      {"feature_dim", c.feature_dim},
      {"spread", c.spread},
      {"noise_kind", to_string(c.noise.kind)},
      {"noise_ratio", c.noise.ratio},
      {"pair_map", c.noise.pair_map},
      {"weak_sigma", c.augment.weak_sigma},
      {"strong_sigma", c.augment.strong_sigma},
      {"mask_fraction", c.augment.mask_fraction},
      {"hidden", c.net.hidden},
      {"batch_norm", c.net.batch_norm},
      {"lr", c.net.sgd.lr},
      {"momentum", c.net.sgd.momentum},
      {"weight_decay", c.net.sgd.weight_decay},
      {"batch_size", c.net.batch_size},
      {"filter_k", c.filter_k},
      {"filter_epochs", c.filter_epochs},
      {"filter_tau_label", c.filter_tau_label},
      {"filter_cache", c.filter_cache},
      {"warmup_epochs", c.warmup.epochs},
      {"mixup_alpha", c.warmup.mixup_alpha},
      {"warmup_tau", c.warmup.tau_fixed},
      {"epochs", c.loop.epochs},
      {"lr_decay", c.loop.lr_decay},
      {"lr_decay_epoch", c.loop.lr_decay_epoch},
      {"beta1", c.loop.beta1},
      {"beta2", c.loop.beta2},
      {"tau_label", c.loop.tau_label},
      {"pivot", c.loop.pivot},
      {"splitnet_hidden", c.loop.splitnet.hidden},
      {"splitnet_blocks", c.loop.splitnet.blocks},
      {"splitnet_batch_norm", c.loop.splitnet.batch_norm},
      {"splitnet_use_delta", c.loop.splitnet.use_delta},
      {"splitnet_epochs", c.loop.splitnet.epochs},
      {"splitnet_batch_size", c.loop.splitnet.batch_size},
      {"splitnet_lr", c.loop.splitnet.optimizer.lr},
      {"splitnet_weight_decay", c.loop.splitnet.optimizer.weight_decay},
      {"gmm_tol", c.loop.gmm_tol},
      {"gmm_max_iter", c.loop.gmm_max_iter},
  };
}

ExperimentConfig config_from_json(const nlohmann::json& doc) {
  check(doc.is_object(), "<root>", "config must be a JSON object");
  ExperimentConfig cfg;
  // "variant" may reference fixed_tau, so apply it last.
  for (const auto& [key, value] : doc.items()) {
    if (key != "variant") set_config_value(cfg, key, value);
  }
  if (doc.contains("variant")) set_config_value(cfg, "variant", doc.at("variant"));
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open config " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Config, path + ": malformed JSON: " + e.what());
  }
  return config_from_json(doc);
}

void ExperimentConfig::validate() const {
  check(num_classes >= 2, "num_classes", "must be >= 2");
  check(per_class >= 1, "per_class", "must be >= 1");
  check(test_per_class >= 1, "test_per_class", "must be >= 1");
  check(feature_dim >= 2, "feature_dim", "must be >= 2");
  check(spread > 0.0, "spread", "must be positive");
  check(noise.ratio >= 0.0 && noise.ratio <= 1.0, "noise_ratio", "must lie in [0, 1]");
  try {
    noise.validate(num_classes);
  } catch (const Error& e) {
    fail(ErrorCode::Config, std::string("pair_map: ") + e.what());
  }
  check(augment.weak_sigma >= 0.0, "weak_sigma", "must be >= 0");
  check(augment.strong_sigma >= augment.weak_sigma, "strong_sigma", "must be >= weak_sigma");
  check(augment.mask_fraction >= 0.0 && augment.mask_fraction < 1.0, "mask_fraction",
        "must lie in [0, 1)");
  check(!net.hidden.empty(), "hidden", "needs at least one hidden layer");
  for (int h : net.hidden) check(h > 0, "hidden", "widths must be positive");
  check(net.sgd.lr > 0.0, "lr", "must be positive");
  check(net.sgd.momentum >= 0.0 && net.sgd.momentum < 1.0, "momentum", "must lie in [0, 1)");
  check(net.sgd.weight_decay >= 0.0, "weight_decay", "must be >= 0");
  check(net.batch_size >= 2, "batch_size", "must be >= 2");
  const int n = num_classes * per_class;
  check(filter_k >= 2 && filter_k <= n, "filter_k", "must satisfy 2 <= K <= N");
  check(filter_epochs >= 0, "filter_epochs", "must be >= 0");
  check(filter_tau_label > 0.0, "filter_tau_label", "must be positive");
  check(warmup.epochs >= 0, "warmup_epochs", "must be >= 0");
  check(warmup.mixup_alpha > 0.0, "mixup_alpha", "must be positive");
  check(warmup.tau_fixed >= 0.0 && warmup.tau_fixed <= 1.0, "warmup_tau", "must lie in [0, 1]");
  check(loop.epochs >= 1, "epochs", "must be >= 1");
  check(loop.lr_decay > 0.0, "lr_decay", "must be positive");
  check(loop.beta1 <= 1.0, "beta1", "must be <= 1");
  check(loop.beta2 > 0.0 && loop.beta2 <= loop.beta1, "beta2", "must satisfy 0 < beta2 <= beta1");
  check(loop.tau_label > 0.0 && loop.tau_label <= 1.0, "tau_label", "must lie in (0, 1]");
  check(loop.pivot > 0.0 && loop.pivot < 1.0, "pivot", "must lie in (0, 1)");
  check(loop.splitnet.hidden > 0, "splitnet_hidden", "must be positive");
  check(loop.splitnet.blocks >= 1, "splitnet_blocks", "must be >= 1");
  check(loop.splitnet.epochs >= 0, "splitnet_epochs", "must be >= 0");
  check(loop.splitnet.batch_size >= 2, "splitnet_batch_size", "must be >= 2");
  check(loop.splitnet.optimizer.lr > 0.0, "splitnet_lr", "must be positive");
  check(loop.splitnet.optimizer.weight_decay >= 0.0, "splitnet_weight_decay", "must be >= 0");
  check(loop.gmm_tol > 0.0, "gmm_tol", "must be positive");
  check(loop.gmm_max_iter >= 1, "gmm_max_iter", "must be >= 1");
  check(variant.kind != VariantKind::FixedThreshold ||
            (variant.fixed_tau >= 0.0 && variant.fixed_tau <= 1.0),
        "fixed_tau", "must lie in [0, 1]");
}

}  // namespace splitnet
