#include "core/warmup.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <json.hpp>

namespace splitnet {

std::vector<std::size_t> FoldPlan::members(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::complement(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] != fold) out.push_back(i);
  }
  return out;
}

FoldPlan kfold_partition(std::size_t n, int k, std::uint64_t seed) {
  require(k >= 2 && static_cast<std::size_t>(k) <= n, ErrorCode::InvalidArgument,
          "k-fold needs 2 <= K <= N");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  FoldPlan plan;
  plan.k = k;
  plan.fold_of.assign(n, -1);
  const std::size_t base = n / static_cast<std::size_t>(k);
  const std::size_t extra = n % static_cast<std::size_t>(k);
  std::size_t pos = 0;
  for (int f = 0; f < k; ++f) {
    const std::size_t size = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
    for (std::size_t j = 0; j < size; ++j) plan.fold_of[perm[pos++]] = f;
  }
  return plan;
}

MlpSpec NetTrainConfig::spec(int input_dim, int num_classes) const {
  return MlpSpec{input_dim, hidden, num_classes, batch_norm};
}

double train_supervised_epoch(Mlp& net, Optimizer& opt, const Matrix& features,
                              const LabelView& labels, int num_classes,
                              std::span<const std::size_t> indices, int batch_size, Rng& rng,
                              const Augmenter* augment) {
  net.set_mode(Mode::Train);
  double total = 0.0;
  std::size_t batches = 0;
  for (const auto& batch : make_batches(indices, static_cast<std::size_t>(batch_size), rng)) {
    if (batch.size() < 2 && net.has_batch_norm()) continue;
    Matrix x = gather_rows(features, batch);
    if (augment) x = augment->weak_batch(x, rng);
    std::vector<int> y(batch.size());
    for (std::size_t b = 0; b < batch.size(); ++b) y[b] = labels[batch[b]];
    auto lg = softmax_cross_entropy(net.forward(x), one_hot(y, num_classes));
    net.backward(lg.grad);
    auto params = net.parameters();
    opt.step(params);
    total += lg.loss;
    ++batches;
  }
  net.set_mode(Mode::Eval);
  return batches ? total / static_cast<double>(batches) : 0.0;
}

FilteredSet cross_filter(const TrainingSet& data, const FoldPlan& plan, const NetTrainConfig& cfg,
                         double tau_label, int epochs, std::uint64_t seed,
                         CrossFilterAudit* audit) {
  require(plan.fold_of.size() == data.size(), ErrorCode::ShapeMismatch,
          "fold plan does not cover the dataset");
  require(epochs >= 0, ErrorCode::InvalidArgument, "filter epochs must be >= 0");
  if (audit) {
    audit->trained_on.assign(static_cast<std::size_t>(plan.k), {});
    audit->evaluated.assign(static_cast<std::size_t>(plan.k), {});
  }

  FilteredSet out;
  for (int fold = 0; fold < plan.k; ++fold) {
    const auto held_out = plan.members(fold);
    const auto train_idx = plan.complement(fold);
    Rng rng(splitmix64(seed + static_cast<std::uint64_t>(fold)));
    Mlp net = Mlp::build(cfg.spec(static_cast<int>(data.features.cols()), data.num_classes), rng);
    Optimizer opt(cfg.sgd);
    std::vector<std::size_t>* log = audit ? &audit->trained_on[static_cast<std::size_t>(fold)] : nullptr;
    LabelView labels(data.labels, log);
    for (int e = 0; e < epochs; ++e) {
      train_supervised_epoch(net, opt, data.features, labels, data.num_classes, train_idx,
                             cfg.batch_size, rng);
    }
    if (audit) audit->evaluated[static_cast<std::size_t>(fold)] = held_out;

    Matrix p = softmax(net.predict(gather_rows(data.features, held_out)));
    for (std::size_t j = 0; j < held_out.size(); ++j) {
      const auto row = static_cast<Eigen::Index>(j);
      const int pred = argmax_row(p, row);
      if (pred == data.labels[held_out[j]] && p(row, pred) >= tau_label) {
        out.indices.push_back(held_out[j]);
      }
    }
  }
  std::sort(out.indices.begin(), out.indices.end());
  return out;
}

WarmupStats warmup_train(Mlp& net, Optimizer& opt, const TrainingSet& data,
                         const FilteredSet& filtered, const Augmenter& augment,
                         const WarmupConfig& cfg, std::uint64_t seed,
                         std::vector<std::size_t>* label_log) {
  require(!filtered.empty(), ErrorCode::EmptyFilteredSet,
          "cross-filtering admitted no samples; lower the filter threshold (tau_label)");
  require(cfg.epochs >= 0 && cfg.batch_size >= 2, ErrorCode::InvalidArgument,
          "warm-up needs epochs >= 0 and batch size >= 2");
  const std::size_t n = data.size();
  const int r = data.num_classes;
  LabelView labels(data.labels, label_log);
  Rng rng(seed);

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::vector<std::size_t> pool = filtered.indices;
  std::size_t cursor = pool.size();

  WarmupStats stats;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double sup_total = 0.0, cons_total = 0.0;
    std::size_t batches = 0, masked = 0;
    for (const auto& batch : make_batches(all, static_cast<std::size_t>(cfg.batch_size), rng)) {
      // Supervised pairs cycle through a reshuffled filtered set.
      const std::size_t sup_size = std::min(batch.size(), pool.size());
      std::vector<std::size_t> sup(sup_size);
      for (auto& idx : sup) {
        if (cursor == pool.size()) {
          std::shuffle(pool.begin(), pool.end(), rng);
          cursor = 0;
        }
        idx = pool[cursor++];
      }
      std::vector<int> y(sup_size);
      for (std::size_t b = 0; b < sup_size; ++b) y[b] = labels[sup[b]];
      Matrix xa = augment.weak_batch(gather_rows(data.features, sup), rng);
      Matrix ta = one_hot(y, r);
      std::vector<std::size_t> perm(sup_size);
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::shuffle(perm.begin(), perm.end(), rng);
      Matrix xb = gather_rows(xa, perm);
      Matrix tb = gather_rows(ta, perm);
      MixupResult mixed = mixup(xa, ta, xb, tb, cfg.mixup_alpha, rng);

      Matrix xu = gather_rows(data.features, batch);
      Matrix weak = augment.weak_batch(xu, rng);
      Matrix strong = augment.strong_batch(xu, rng);
      Matrix pw = softmax(net.predict(weak));

      const auto ns = static_cast<Eigen::Index>(sup_size);
      const auto nu = static_cast<Eigen::Index>(batch.size());
      Matrix stacked(ns + nu, xu.cols());
      stacked.topRows(ns) = mixed.features;
      stacked.bottomRows(nu) = strong;

      net.set_mode(Mode::Train);
      Matrix logits = net.forward(stacked);
      Matrix logp = log_softmax(logits);
      Matrix grad = Matrix::Zero(logits.rows(), logits.cols());

      double sup_loss = 0.0;
      for (Eigen::Index i = 0; i < ns; ++i) {
        sup_loss -= (mixed.targets.row(i).array() * logp.row(i).array()).sum();
        grad.row(i) = (logp.row(i).array().exp() - mixed.targets.row(i).array()) / static_cast<double>(ns);
      }
      sup_loss /= static_cast<double>(ns);

      double cons_loss = 0.0;
      for (Eigen::Index i = 0; i < nu; ++i) {
        const int q = argmax_row(pw, i);
        if (pw(i, q) < cfg.tau_fixed) continue;
        ++masked;
        const Eigen::Index row = ns + i;
        cons_loss -= logp(row, q);
        grad.row(row) = logp.row(row).array().exp() / static_cast<double>(nu);
        grad(row, q) -= 1.0 / static_cast<double>(nu);
      }
      cons_loss /= static_cast<double>(nu);

      net.backward(grad);
      auto params = net.parameters();
      opt.step(params);
      sup_total += sup_loss;
      cons_total += cons_loss;
      ++batches;
    }
    if (batches) {
      stats.supervised_loss = sup_total / static_cast<double>(batches);
      stats.consistency_loss = cons_total / static_cast<double>(batches);
    }
    stats.masked_in = masked;
  }
  net.set_mode(Mode::Eval);
  return stats;
}

void train_plain_ce(Mlp& net, Optimizer& opt, const TrainingSet& data, const Augmenter& augment,
                    int epochs, int batch_size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  LabelView labels(data.labels);
  for (int e = 0; e < epochs; ++e) {
    train_supervised_epoch(net, opt, data.features, labels, data.num_classes, all, batch_size, rng,
                           &augment);
  }
}

void save_filtered_set(const FilteredSet& set, const FilterCacheKey& key,
                       const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  nlohmann::json j = {{"n", key.n},           {"k", key.k},
                      {"seed", key.seed},     {"tau_label", key.tau_label},
                      {"epochs", key.epochs}, {"indices", set.indices}};
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write filter cache " + path.string());
  out << j.dump() << '\n';
}

std::optional<FilteredSet> load_filtered_set(const FilterCacheKey& key,
                                             const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  nlohmann::json j;
  try {
    in >> j;
    if (j.at("n").get<std::size_t>() != key.n || j.at("k").get<int>() != key.k ||
        j.at("seed").get<std::uint64_t>() != key.seed ||
        j.at("tau_label").get<double>() != key.tau_label || j.at("epochs").get<int>() != key.epochs) {
      return std::nullopt;
    }
    FilteredSet set;
    set.indices = j.at("indices").get<std::vector<std::size_t>>();
    for (auto i : set.indices) {
      require(i < key.n, ErrorCode::Io, "filter cache index out of range");
    }
    return set;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

}  // namespace splitnet
