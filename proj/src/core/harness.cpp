#include "core/harness.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "core/main_loop.hpp"

namespace splitnet {

namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& where) {
  if (s == "nan") return kNaN;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  require(end && *end == '\0' && !s.empty(), ErrorCode::Io, where + ": bad number '" + s + "'");
  return v;
}

std::size_t parse_count(const std::string& s, const std::string& where) {
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s.c_str(), &end, 10);
  require(end && *end == '\0' && !s.empty(), ErrorCode::Io, where + ": bad count '" + s + "'");
  return static_cast<std::size_t>(v);
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path,
                                               const std::string& expected_header) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == expected_header, ErrorCode::Io,
          path.string() + ": unexpected header");
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
  return out;
}

const char* kEpochHeader =
    "epoch,tau_mu,tau_nu,n_clean_set,eta,mask_count,pseudo_correct,pseudo_wrong,"
    "split_f1_splitnet,split_f1_gmm,split_acc_splitnet,split_acc_gmm,test_acc";
const char* kHedgingHeader = "epoch,mu,sigma2,tau_mu,tau_nu,m_clean,m_noisy";

double mean_tail(const std::vector<EpochReport>& rows, double EpochReport::*field) {
  if (rows.empty()) return kNaN;
  const std::size_t tail = std::max<std::size_t>(1, rows.size() / 3);
  double sum = 0.0;
  for (std::size_t i = rows.size() - tail; i < rows.size(); ++i) sum += rows[i].*field;
  return sum / static_cast<double>(tail);
}

bool same_double(double a, double b) { return (std::isnan(a) && std::isnan(b)) || a == b; }

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Everything the filtered set depends on.
FilterCacheKey filter_key(const ExperimentConfig& cfg, std::size_t n) {
  nlohmann::json j = config_to_json(cfg);
  nlohmann::json relevant;
  for (const char* k : {"seed", "num_classes", "per_class", "feature_dim", "spread", "noise_kind",
                        "noise_ratio", "pair_map", "hidden", "batch_norm", "lr", "momentum",
                        "weight_decay", "batch_size"}) {
    relevant[k] = j[k];
  }
  return {n, cfg.filter_k, fnv1a(relevant.dump()), cfg.filter_tau_label, cfg.filter_epochs};
}

fs::path filter_cache_path(const ExperimentConfig& cfg, const FilterCacheKey& key) {
  char name[96];
  std::snprintf(name, sizeof name, "filter_%016llx_k%d_e%d_t%.6f.json",
                static_cast<unsigned long long>(key.seed), key.k, key.epochs, key.tau_label);
  return fs::path(cfg.filter_cache) / name;
}

void dump_samples(const fs::path& path, const EpochState& st, std::span<const int> noisy,
                  const std::vector<int>& truth) {
  auto out = open_out(path);
  out << "index,loss,w,s_clean,s_noisy,pseudo_label,mask,noisy_label,true_label\n";
  for (std::size_t i = 0; i < noisy.size(); ++i) {
    const auto e = static_cast<Eigen::Index>(i);
    out << i << ',' << fmt((*st.losses)(e)) << ',' << fmt((*st.w)(e)) << ','
        << fmt((*st.scores)[i].clean) << ',' << fmt((*st.scores)[i].noisy) << ','
        << (*st.pseudo_label)[i] << ',' << ((*st.pseudo_mask)[i] ? 1 : 0) << ',' << noisy[i] << ','
        << truth[i] << '\n';
  }
}

}  // namespace

// --- Evaluator ---------------------------------------------------------------

const GroundTruth& Evaluator::truth() const {
  ++reads_;
  return train_.ground_truth();
}

double Evaluator::test_accuracy(const Mlp& net) const {
  const Matrix logits = net.predict(test_.features);
  std::size_t hit = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    if (argmax_row(logits, i) == test_.labels[static_cast<std::size_t>(i)]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(test_.size());
}

SplitMetrics Evaluator::split(const std::vector<bool>& predicted_clean) const {
  return split_metrics(predicted_clean, truth().clean_mask);
}

PseudoLabelCounts Evaluator::pseudo(std::span<const int> q, const std::vector<bool>& mask) const {
  return pseudo_label_counts(q, truth().true_labels, mask);
}

double Evaluator::filter_precision(const FilteredSet& filtered) const {
  if (filtered.empty()) return 0.0;
  const auto& clean = truth().clean_mask;
  std::size_t hit = 0;
  for (auto i : filtered.indices) hit += clean[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(filtered.size());
}

std::vector<int> Evaluator::true_labels() const { return truth().true_labels; }

// --- summary -----------------------------------------------------------------

bool RunSummary::same_as(const RunSummary& o) const {
  return variant == o.variant && seed == o.seed && noise_kind == o.noise_kind &&
         same_double(noise_ratio, o.noise_ratio) && epochs == o.epochs &&
         noisy_count == o.noisy_count && same_double(best_test_acc, o.best_test_acc) &&
         same_double(last_test_acc, o.last_test_acc) &&
         same_double(tail_test_acc, o.tail_test_acc) &&
         same_double(warmup_test_acc, o.warmup_test_acc) &&
         same_double(best_split_f1_splitnet, o.best_split_f1_splitnet) &&
         same_double(tail_split_f1_splitnet, o.tail_split_f1_splitnet) &&
         same_double(tail_split_acc_splitnet, o.tail_split_acc_splitnet) &&
         same_double(tail_split_f1_gmm, o.tail_split_f1_gmm) &&
         same_double(tail_split_acc_gmm, o.tail_split_acc_gmm) &&
         filtered_count == o.filtered_count &&
         same_double(filtered_precision, o.filtered_precision) &&
         splitnet_skips == o.splitnet_skips && truth_reads == o.truth_reads;
}

namespace {

nlohmann::json num(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

double num_from(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  return v.is_null() ? kNaN : v.get<double>();
}

}  // namespace

nlohmann::json summary_to_json(const RunSummary& s) {
  return nlohmann::json{
      {"variant", s.variant},
      {"seed", s.seed},
      {"noise_kind", s.noise_kind},
      {"noise_ratio", num(s.noise_ratio)},
      {"epochs", s.epochs},
      {"noisy_count", s.noisy_count},
      {"best_test_acc", num(s.best_test_acc)},
      {"last_test_acc", num(s.last_test_acc)},
      {"tail_test_acc", num(s.tail_test_acc)},
      {"warmup_test_acc", num(s.warmup_test_acc)},
      {"best_split_f1_splitnet", num(s.best_split_f1_splitnet)},
      {"tail_split_f1_splitnet", num(s.tail_split_f1_splitnet)},
      {"tail_split_acc_splitnet", num(s.tail_split_acc_splitnet)},
      {"tail_split_f1_gmm", num(s.tail_split_f1_gmm)},
      {"tail_split_acc_gmm", num(s.tail_split_acc_gmm)},
      {"filtered_count", s.filtered_count},
      {"filtered_precision", num(s.filtered_precision)},
      {"splitnet_skips", s.splitnet_skips},
      {"truth_reads", s.truth_reads},
  };
}

RunSummary summary_from_json(const nlohmann::json& j) {
  try {
    RunSummary s;
    s.variant = j.at("variant").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.noise_kind = j.at("noise_kind").get<std::string>();
    s.noise_ratio = num_from(j, "noise_ratio");
    s.epochs = j.at("epochs").get<int>();
    s.noisy_count = j.at("noisy_count").get<std::size_t>();
    s.best_test_acc = num_from(j, "best_test_acc");
    s.last_test_acc = num_from(j, "last_test_acc");
    s.tail_test_acc = num_from(j, "tail_test_acc");
    s.warmup_test_acc = num_from(j, "warmup_test_acc");
    s.best_split_f1_splitnet = num_from(j, "best_split_f1_splitnet");
    s.tail_split_f1_splitnet = num_from(j, "tail_split_f1_splitnet");
    s.tail_split_acc_splitnet = num_from(j, "tail_split_acc_splitnet");
    s.tail_split_f1_gmm = num_from(j, "tail_split_f1_gmm");
    s.tail_split_acc_gmm = num_from(j, "tail_split_acc_gmm");
    s.filtered_count = j.at("filtered_count").get<std::size_t>();
    s.filtered_precision = num_from(j, "filtered_precision");
    s.splitnet_skips = j.at("splitnet_skips").get<std::size_t>();
    s.truth_reads = j.at("truth_reads").get<std::size_t>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Io, std::string("summary.json: ") + e.what());
  }
}

void write_summary(const RunSummary& s, const fs::path& path) {
  auto out = open_out(path);
  out << summary_to_json(s).dump(2) << '\n';
}

RunSummary read_summary(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Io, path.string() + ": " + e.what());
  }
  return summary_from_json(j);
}

// --- CSV ---------------------------------------------------------------------

void write_epochs_csv(const std::vector<EpochReport>& rows, const fs::path& path) {
  auto out = open_out(path);
  out << kEpochHeader << '\n';
  for (const auto& r : rows) {
    out << r.epoch << ',' << fmt(r.tau_mu) << ',' << fmt(r.tau_nu) << ',' << r.n_clean_set << ','
        << fmt(r.eta) << ',' << r.mask_count << ',' << r.pseudo_correct << ',' << r.pseudo_wrong
        << ',' << fmt(r.split_f1_splitnet) << ',' << fmt(r.split_f1_gmm) << ','
        << fmt(r.split_acc_splitnet) << ',' << fmt(r.split_acc_gmm) << ',' << fmt(r.test_acc)
        << '\n';
  }
}

std::vector<EpochReport> read_epochs_csv(const fs::path& path) {
  std::vector<EpochReport> out;
  const std::string where = path.string();
  for (const auto& c : read_csv(path, kEpochHeader)) {
    require(c.size() == 13, ErrorCode::Io, where + ": expected 13 columns");
    EpochReport r;
    r.epoch = static_cast<int>(parse_count(c[0], where));
    r.tau_mu = parse_double(c[1], where);
    r.tau_nu = parse_double(c[2], where);
    r.n_clean_set = parse_count(c[3], where);
    r.eta = parse_double(c[4], where);
    r.mask_count = parse_count(c[5], where);
    r.pseudo_correct = parse_count(c[6], where);
    r.pseudo_wrong = parse_count(c[7], where);
    r.split_f1_splitnet = parse_double(c[8], where);
    r.split_f1_gmm = parse_double(c[9], where);
    r.split_acc_splitnet = parse_double(c[10], where);
    r.split_acc_gmm = parse_double(c[11], where);
    r.test_acc = parse_double(c[12], where);
    out.push_back(r);
  }
  return out;
}

void write_hedging_csv(const std::vector<HedgingReport>& rows, const fs::path& path) {
  auto out = open_out(path);
  out << kHedgingHeader << '\n';
  for (const auto& r : rows) {
    out << r.epoch << ',' << fmt(r.mean) << ',' << fmt(r.variance) << ',' << fmt(r.tau_mu) << ','
        << fmt(r.tau_nu) << ',' << r.hedged_clean << ',' << r.hedged_noisy << '\n';
  }
}

std::vector<HedgingReport> read_hedging_csv(const fs::path& path) {
  std::vector<HedgingReport> out;
  const std::string where = path.string();
  for (const auto& c : read_csv(path, kHedgingHeader)) {
    require(c.size() == 7, ErrorCode::Io, where + ": expected 7 columns");
    HedgingReport r;
    r.epoch = static_cast<int>(parse_count(c[0], where));
    r.mean = parse_double(c[1], where);
    r.variance = parse_double(c[2], where);
    r.tau_mu = parse_double(c[3], where);
    r.tau_nu = parse_double(c[4], where);
    r.hedged_clean = parse_count(c[5], where);
    r.hedged_noisy = parse_count(c[6], where);
    out.push_back(r);
  }
  return out;
}

// --- experiment --------------------------------------------------------------

BenchmarkData make_benchmark(const ExperimentConfig& cfg) {
  cfg.validate();
  CleanDataset clean = generate_blobs(cfg.num_classes, cfg.per_class, cfg.feature_dim, cfg.spread,
                                      derive_seed(cfg.seed, Stage::TrainData));
  CleanDataset test = generate_blobs(cfg.num_classes, cfg.test_per_class, cfg.feature_dim,
                                     cfg.spread, derive_seed(cfg.seed, Stage::TestData));
  NoisyDataset train = inject_noise(clean, cfg.noise, derive_seed(cfg.seed, Stage::Noise));
  return {std::move(train), std::move(test)};
}

FilterOutcome run_filter_stage(const ExperimentConfig& cfg, const NoisyDataset& train,
                               const Evaluator& eval) {
  FilterOutcome out;
  const FilterCacheKey key = filter_key(cfg, train.size());
  std::optional<FilteredSet> cached;
  if (!cfg.filter_cache.empty()) cached = load_filtered_set(key, filter_cache_path(cfg, key));
  if (cached) {
    out.filtered = std::move(*cached);
    out.from_cache = true;
  } else {
    FoldPlan plan = kfold_partition(train.size(), cfg.filter_k, derive_seed(cfg.seed, Stage::Folds));
    out.filtered = cross_filter(train.training_set(), plan, cfg.net, cfg.filter_tau_label,
                                cfg.filter_epochs, derive_seed(cfg.seed, Stage::Filter));
    if (!cfg.filter_cache.empty()) save_filtered_set(out.filtered, key, filter_cache_path(cfg, key));
  }
  out.precision = eval.filter_precision(out.filtered);
  return out;
}

RunReport run_experiment(const ExperimentConfig& cfg, bool write_files) {
  cfg.validate();
  BenchmarkData bench = make_benchmark(cfg);
  const NoisyDataset& train = bench.train;
  Evaluator eval(train, bench.test);
  const TrainingSet data = train.training_set();
  const Augmenter augment(cfg.augment, feature_std(train.features()));
  const fs::path out_dir(cfg.output_dir);
  if (write_files) {
    fs::create_directories(out_dir);
    auto out = open_out(out_dir / "config.json");
    out << config_to_json(cfg).dump(2) << '\n';
  }

  Rng init_rng(derive_seed(cfg.seed, Stage::MainInit));
  Mlp net = Mlp::build(cfg.net.spec(cfg.feature_dim, cfg.num_classes), init_rng);
  Optimizer opt(cfg.net.sgd);

  RunReport report;
  RunSummary& s = report.summary;
  s.variant = cfg.variant.name();
  s.seed = cfg.seed;
  s.noise_kind = to_string(cfg.noise.kind);
  s.noise_ratio = cfg.noise.ratio;
  s.epochs = cfg.loop.epochs;
  s.noisy_count = train.noisy_count();
  s.filtered_precision = kNaN;

  const VariantKind kind = cfg.variant.kind;
  const std::uint64_t warmup_seed = derive_seed(cfg.seed, Stage::Warmup);
  if (kind == VariantKind::NoWarmup || kind == VariantKind::PlainCe) {
    train_plain_ce(net, opt, data, augment, cfg.warmup.epochs, cfg.net.batch_size, warmup_seed);
  } else {
    FilterOutcome filter = run_filter_stage(cfg, train, eval);
    s.filtered_count = filter.filtered.size();
    s.filtered_precision = filter.precision;
    if (write_files) {
      save_filtered_set(filter.filtered, filter_key(cfg, train.size()), out_dir / "filtered.json");
    }
    warmup_train(net, opt, data, filter.filtered, augment, cfg.warmup, warmup_seed);
  }
  net.set_mode(Mode::Eval);
  s.warmup_test_acc = eval.test_accuracy(net);
  if (write_files && cfg.save_checkpoints) save_checkpoint(net, out_dir / "warmup");

  const std::uint64_t loop_seed = derive_seed(cfg.seed, Stage::MainLoop);
  if (kind == VariantKind::PlainCe) {
    Optimizer main_opt(SgdConfig{cfg.loop.lr, cfg.loop.momentum, cfg.loop.weight_decay});
    for (int epoch = 0; epoch < cfg.loop.epochs; ++epoch) {
      main_opt.set_lr(cfg.loop.lr_at(epoch));
      train_plain_ce(net, main_opt, data, augment, 1, cfg.loop.batch_size,
                     splitmix64(loop_seed + static_cast<std::uint64_t>(epoch)));
      net.set_mode(Mode::Eval);
      EpochReport r;
      r.epoch = epoch;
      r.tau_mu = r.tau_nu = r.eta = kNaN;
      r.split_f1_splitnet = r.split_f1_gmm = r.split_acc_splitnet = r.split_acc_gmm = kNaN;
      r.test_acc = eval.test_accuracy(net);
      report.epochs.push_back(r);
    }
  } else {
    LoopConfig loop = cfg.loop;
    if (kind == VariantKind::NoSplitNet) loop.score_source = ScoreSource::Gmm;
    if (kind == VariantKind::NoHedging) loop.hedging = false;
    if (kind == VariantKind::FixedThreshold) loop.fixed_threshold = cfg.variant.fixed_tau;
    const bool splitnet_scores = loop.score_source == ScoreSource::SplitNet;

    std::vector<int> truth_for_dump;
    if (write_files && cfg.dump_samples) truth_for_dump = eval.true_labels();

    auto observer = [&](const EpochState& st) {
      const std::size_t n = train.size();
      std::vector<bool> by_score(n), by_gmm(n);
      for (std::size_t i = 0; i < n; ++i) {
        by_score[i] = (*st.scores)[i].clean >= (*st.scores)[i].noisy;
        by_gmm[i] = (*st.w)(static_cast<Eigen::Index>(i)) >= 0.5;
      }
      const SplitMetrics gm = eval.split(by_gmm);
      const PseudoLabelCounts pc = eval.pseudo(*st.pseudo_label, *st.pseudo_mask);

      EpochReport r;
      r.epoch = st.epoch;
      r.tau_mu = st.thresholds.tau_mu;
      r.tau_nu = st.thresholds.tau_nu;
      r.n_clean_set = st.clean_count;
      r.eta = st.eta;
      r.mask_count = st.mask_count;
      r.pseudo_correct = pc.correct;
      r.pseudo_wrong = pc.wrong;
      if (splitnet_scores) {
        const SplitMetrics sm = eval.split(by_score);
        r.split_f1_splitnet = sm.f1;
        r.split_acc_splitnet = sm.accuracy;
      } else {
        r.split_f1_splitnet = r.split_acc_splitnet = kNaN;
      }
      r.split_f1_gmm = gm.f1;
      r.split_acc_gmm = gm.accuracy;
      r.test_acc = eval.test_accuracy(*st.net);
      report.epochs.push_back(r);

      report.hedging.push_back({st.epoch, st.thresholds.mean, st.thresholds.variance,
                                st.thresholds.tau_mu, st.thresholds.tau_nu, st.hedged_clean,
                                st.hedged_noisy});
      if (!truth_for_dump.empty()) {
        char name[40];
        std::snprintf(name, sizeof name, "samples/epoch_%03d.csv", st.epoch);
        dump_samples(out_dir / name, st, train.noisy_labels(), truth_for_dump);
      }
    };
    LoopOutcome outcome = run_training(net, data, augment, loop, loop_seed, observer);
    s.splitnet_skips = outcome.splitnet_skips;
  }

  s.last_test_acc = report.epochs.back().test_acc;
  s.best_test_acc = 0.0;
  s.best_split_f1_splitnet = kNaN;
  for (const auto& r : report.epochs) {
    s.best_test_acc = std::max(s.best_test_acc, r.test_acc);
    if (!std::isnan(r.split_f1_splitnet) &&
        (std::isnan(s.best_split_f1_splitnet) || r.split_f1_splitnet > s.best_split_f1_splitnet)) {
      s.best_split_f1_splitnet = r.split_f1_splitnet;
    }
  }
  s.tail_test_acc = mean_tail(report.epochs, &EpochReport::test_acc);
  s.tail_split_f1_splitnet = mean_tail(report.epochs, &EpochReport::split_f1_splitnet);
  s.tail_split_acc_splitnet = mean_tail(report.epochs, &EpochReport::split_acc_splitnet);
  s.tail_split_f1_gmm = mean_tail(report.epochs, &EpochReport::split_f1_gmm);
  s.tail_split_acc_gmm = mean_tail(report.epochs, &EpochReport::split_acc_gmm);
  s.truth_reads = train.truth_reads();
  require(s.truth_reads == eval.reads(), ErrorCode::Internal,
          "ground truth was read outside the evaluator");

  if (write_files) {
    write_epochs_csv(report.epochs, out_dir / "epochs.csv");
    if (!report.hedging.empty()) write_hedging_csv(report.hedging, out_dir / "hedging.csv");
    write_summary(s, out_dir / "summary.json");
    if (cfg.save_checkpoints) save_checkpoint(net, out_dir / "final");
  }
  return report;
}

// --- sweep -------------------------------------------------------------------

std::vector<nlohmann::json> expand_grid(const nlohmann::json& grid) {
  require(grid.is_object(), ErrorCode::Config, "grid: must be a JSON object");
  std::vector<nlohmann::json> points{nlohmann::json::object()};
  for (const auto& [key, values] : grid.items()) {
    require(values.is_array() && !values.empty(), ErrorCode::Config,
            "grid." + key + ": must be a non-empty array");
    std::vector<nlohmann::json> next;
    for (const auto& p : points) {
      for (const auto& v : values) {
        nlohmann::json q = p;
        q[key] = v;
        next.push_back(std::move(q));
      }
    }
    points = std::move(next);
  }
  return points;
}

std::vector<SweepPoint> run_sweep(const ExperimentConfig& base, const nlohmann::json& grid) {
  const auto points = expand_grid(grid);
  const fs::path root(base.output_dir);
  // Validate every point before spending time on any of them.
  std::vector<ExperimentConfig> configs;
  for (std::size_t i = 0; i < points.size(); ++i) {
    nlohmann::json doc = config_to_json(base);
    for (const auto& [k, v] : points[i].items()) doc[k] = v;
    char name[32];
    std::snprintf(name, sizeof name, "point_%03zu", i);
    doc["output_dir"] = (root / name).string();
    configs.push_back(config_from_json(doc));
  }

  std::vector<SweepPoint> out;
  auto csv = open_out(root / "sweep.csv");
  csv << "point";
  for (const auto& [k, v] : grid.items()) csv << ',' << k;
  csv << ",best_test_acc,last_test_acc,tail_test_acc,tail_split_f1_splitnet,tail_split_f1_gmm,"
         "filtered_precision\n";
  for (std::size_t i = 0; i < configs.size(); ++i) {
    RunReport rep = run_experiment(configs[i]);
    out.push_back({points[i], configs[i].output_dir, rep.summary});
    csv << i;
    for (const auto& [k, v] : points[i].items()) {
      std::string cell = v.is_string() ? v.get<std::string>() : v.dump();
      for (char& c : cell) {
        if (c == ',') c = ';';
      }
      csv << ',' << cell;
    }
    const auto& s = rep.summary;
    csv << ',' << fmt(s.best_test_acc) << ',' << fmt(s.last_test_acc) << ','
        << fmt(s.tail_test_acc) << ',' << fmt(s.tail_split_f1_splitnet) << ','
        << fmt(s.tail_split_f1_gmm) << ',' << fmt(s.filtered_precision) << '\n';
    csv.flush();
  }
  return out;
}

// --- compare -----------------------------------------------------------------

Comparison compare_reports(const fs::path& dir_a, const fs::path& dir_b, double tol) {
  require(tol >= 0.0, ErrorCode::InvalidArgument, "tolerance must be >= 0");
  auto load = [](const fs::path& dir) {
    const fs::path p = dir / "summary.json";
    std::ifstream in(p);
    require(static_cast<bool>(in), ErrorCode::Io, "missing " + p.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::Io, p.string() + ": " + e.what());
    }
    require(j.is_object(), ErrorCode::Io, p.string() + ": not a JSON object");
    return j;
  };
  const nlohmann::json a = load(dir_a);
  const nlohmann::json b = load(dir_b);

  Comparison cmp;
  for (const auto& [key, va] : a.items()) {
    if (!b.contains(key)) continue;
    const auto& vb = b.at(key);
    const bool na = va.is_number() || va.is_null();
    const bool nb = vb.is_number() || vb.is_null();
    if (!na || !nb || (va.is_null() && vb.is_null())) continue;
    MetricDelta d;
    d.name = key;
    d.a = va.is_null() ? kNaN : va.get<double>();
    d.b = vb.is_null() ? kNaN : vb.get<double>();
    d.delta = d.b - d.a;
    if (std::isnan(d.delta) || std::abs(d.delta) > tol) cmp.exceeded = true;
    cmp.deltas.push_back(d);
  }
  return cmp;
}

}  // namespace splitnet
