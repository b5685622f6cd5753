#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "core/harness.hpp"

using namespace splitnet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("splitnet_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny_config(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.num_classes = 3;
  cfg.per_class = 40;
  cfg.test_per_class = 20;
  cfg.feature_dim = 4;
  cfg.spread = 0.4;
  cfg.noise.ratio = 0.3;
  cfg.net.hidden = {16};
  cfg.net.batch_size = 32;
  cfg.loop.batch_size = 32;
  cfg.warmup.batch_size = 32;
  cfg.filter_k = 3;
  cfg.filter_epochs = 4;
  cfg.filter_tau_label = 0.4;
  cfg.warmup.epochs = 2;
  cfg.loop.epochs = 3;
  cfg.loop.splitnet.epochs = 2;
  cfg.loop.splitnet.batch_size = 32;
  cfg.output_dir = out.string();
  return cfg;
}

}  // namespace

TEST_CASE("split metrics") {
  std::vector<bool> truth{true, true, false, false, true};
  auto perfect = split_metrics(truth, truth);
  CHECK(perfect.f1 == 1.0);
  CHECK(perfect.accuracy == 1.0);

  std::vector<bool> pred, actual;
  auto push = [&](bool p, bool a, int times) {
    for (int i = 0; i < times; ++i) {
      pred.push_back(p);
      actual.push_back(a);
    }
  };
  push(true, true, 8);
  push(true, false, 2);
  push(false, true, 2);
  push(false, false, 8);
  auto m = split_metrics(pred, actual);
  CHECK(m.tp == 8);
  CHECK(m.fp == 2);
  CHECK(m.fn == 2);
  CHECK(m.tn == 8);
  CHECK(m.precision == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(m.recall == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(m.f1 == doctest::Approx(0.8).epsilon(1e-15));
  CHECK(m.accuracy == doctest::Approx(0.8).epsilon(1e-15));

  std::vector<bool> none(5, false);
  CHECK(split_metrics(none, truth).f1 == 0.0);

  CHECK_THROWS_AS(split_metrics(none, std::vector<bool>(4, true)), Error);

  Rng rng(3);
  std::bernoulli_distribution coin(0.4);
  for (int t = 0; t < 200; ++t) {
    std::vector<bool> a(37), b(37);
    for (std::size_t i = 0; i < 37; ++i) {
      a[i] = coin(rng);
      b[i] = coin(rng);
    }
    auto s = split_metrics(a, b);
    CHECK(s.tp + s.fp + s.fn + s.tn == 37);
    CHECK(s.f1 >= 0.0);
    CHECK(s.f1 <= 1.0);
    CHECK(s.accuracy == doctest::Approx(double(s.tp + s.tn) / 37));
  }
}

TEST_CASE("pseudo-label counts") {
  std::vector<int> q{0, 1, 2, 1}, truth{0, 2, 2, 1};
  CHECK(pseudo_label_counts(q, truth, std::vector<bool>(4, false)).correct == 0);
  auto all_same = pseudo_label_counts(truth, truth, std::vector<bool>(4, true));
  CHECK(all_same.correct == 4);
  CHECK(all_same.wrong == 0);
  std::vector<bool> mask{true, true, false, true};
  auto c = pseudo_label_counts(q, truth, mask);
  CHECK(c.correct == 2);
  CHECK(c.wrong == 1);
}

TEST_CASE("config parsing") {
  SUBCASE("defaults fill missing keys") {
    auto cfg = config_from_json(nlohmann::json::object());
    CHECK(cfg.filter_k == 8);
    CHECK(cfg.loop.beta1 == 0.95);
    CHECK(cfg.loop.beta2 == 0.5);
    CHECK(cfg.warmup.mixup_alpha == 4.0);
  }
  SUBCASE("unknown keys are rejected by name") {
    try {
      config_from_json({{"noise_ratoi", 0.3}});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Config);
      CHECK(std::string(e.what()).find("noise_ratoi") != std::string::npos);
    }
  }
  SUBCASE("invalid values name their field") {
    try {
      config_from_json({{"noise_ratio", 1.5}});
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).rfind("noise_ratio", 0) == 0);
    }
    CHECK_THROWS_AS(config_from_json({{"epochs", "ten"}}), Error);
  }
  SUBCASE("variants") {
    CHECK(Variant::parse("no_hedging").kind == VariantKind::NoHedging);
    auto v = Variant::parse("fixed_threshold(0.75)");
    CHECK(v.kind == VariantKind::FixedThreshold);
    CHECK(v.fixed_tau == 0.75);
    CHECK(Variant::parse(v.name()).fixed_tau == 0.75);
    auto cfg = config_from_json({{"variant", "fixed_threshold"}, {"fixed_tau", 0.5}});
    CHECK(cfg.variant.fixed_tau == 0.5);
    CHECK_THROWS_AS(Variant::parse("fixed_threshold(abc)"), Error);
    CHECK_THROWS_AS(Variant::parse("everything"), Error);
  }
  SUBCASE("round trip through JSON") {
    auto cfg = config_from_json({{"noise_kind", "asymmetric"}, {"noise_ratio", 0.4},
                                 {"hidden", {32, 16}}, {"variant", "no_warmup"}});
    auto again = config_from_json(config_to_json(cfg));
    CHECK(config_to_json(again) == config_to_json(cfg));
  }
}

TEST_CASE("report files round trip") {
  Rng rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<EpochReport> rows;
  for (int e = 0; e < 25; ++e) {
    EpochReport r{e, u(rng), u(rng), static_cast<std::size_t>(e * 7), u(rng), 11, 5, 6,
                  u(rng), u(rng), u(rng), u(rng), u(rng)};
    if (e % 5 == 0) r.split_f1_splitnet = r.split_acc_splitnet = std::nan("");
    rows.push_back(r);
  }
  const fs::path dir = scratch("reports");
  write_epochs_csv(rows, dir / "epochs.csv");
  auto back = read_epochs_csv(dir / "epochs.csv");
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].tau_mu == rows[i].tau_mu);
    CHECK(back[i].test_acc == rows[i].test_acc);
    CHECK(std::isnan(back[i].split_f1_splitnet) == std::isnan(rows[i].split_f1_splitnet));
    if (!std::isnan(rows[i].split_f1_splitnet)) CHECK(back[i] == rows[i]);
  }

  std::vector<HedgingReport> hedging{{0, 0.4, 0.1, 0.7, 0.3, 10, 12}, {1, 1.0 / 3, 0.2, 0.6, 0.4, 3, 4}};
  write_hedging_csv(hedging, dir / "hedging.csv");
  CHECK(read_hedging_csv(dir / "hedging.csv") == hedging);

  RunSummary s;
  s.variant = "full";
  s.seed = 9;
  s.noise_kind = "symmetric";
  s.noise_ratio = 0.5;
  s.best_test_acc = 0.1 + 0.2;
  s.filtered_precision = std::nan("");
  write_summary(s, dir / "summary.json");
  CHECK(read_summary(dir / "summary.json").same_as(s));
}

TEST_CASE("compare") {
  const fs::path a = scratch("cmp_a"), b = scratch("cmp_b");
  RunSummary s;
  s.variant = "full";
  s.noise_kind = "symmetric";
  s.best_test_acc = 0.8;
  s.last_test_acc = 0.75;
  write_summary(s, a / "summary.json");
  write_summary(s, b / "summary.json");

  auto same = compare_reports(a, b, 0.0);
  CHECK_FALSE(same.exceeded);
  for (const auto& d : same.deltas) CHECK(d.delta == 0.0);

  RunSummary t = s;
  t.best_test_acc = 0.85;
  t.last_test_acc = 0.70;
  write_summary(t, b / "summary.json");
  auto diff = compare_reports(a, b, 0.0);
  CHECK(diff.exceeded);
  for (const auto& d : diff.deltas) {
    if (d.name == "best_test_acc") CHECK(d.delta == 0.85 - 0.8);
    if (d.name == "last_test_acc") CHECK(d.delta == 0.70 - 0.75);
  }
  CHECK_FALSE(compare_reports(a, b, 0.1).exceeded);
  CHECK_THROWS_AS(compare_reports(a, scratch("cmp_missing"), 0.0), Error);
}

TEST_CASE("grid expansion") {
  auto points = expand_grid({{"noise_ratio", {0.2, 0.8}}, {"variant", {"full", "plain_ce", "no_warmup"}}});
  CHECK(points.size() == 6);
  CHECK(points[0]["noise_ratio"] == 0.2);
  CHECK(points[5]["variant"] == "no_warmup");
  CHECK_THROWS_AS(expand_grid({{"seed", 3}}), Error);
  CHECK_THROWS_AS(expand_grid({{"seed", nlohmann::json::array()}}), Error);
}

TEST_CASE("experiments") {
  SUBCASE("rerun writes byte-identical reports") {
    const fs::path a = scratch("det_a"), b = scratch("det_b");
    run_experiment(tiny_config(a));
    run_experiment(tiny_config(b));
    CHECK(slurp(a / "epochs.csv") == slurp(b / "epochs.csv"));
    CHECK(slurp(a / "summary.json") == slurp(b / "summary.json"));
    CHECK(slurp(a / "hedging.csv") == slurp(b / "hedging.csv"));
    CHECK(read_epochs_csv(a / "epochs.csv").size() == 3);
  }
  SUBCASE("every variant runs and only the evaluator reads ground truth") {
    for (const char* v : {"full", "no_splitnet", "no_warmup", "no_hedging", "fixed_threshold(0.6)",
                          "plain_ce"}) {
      const std::string name = v;
      CAPTURE(name);
      ExperimentConfig cfg = tiny_config(scratch("variant"));
      cfg.variant = Variant::parse(v);
      RunReport rep = run_experiment(cfg, false);
      CHECK(rep.epochs.size() == 3);
      CHECK((rep.summary.truth_reads > 0) == (cfg.variant.kind != VariantKind::PlainCe));
      CHECK(rep.summary.variant == cfg.variant.name());
      const bool has_splitnet = cfg.variant.kind != VariantKind::NoSplitNet &&
                                cfg.variant.kind != VariantKind::PlainCe;
      CHECK(std::isnan(rep.summary.tail_split_f1_splitnet) != has_splitnet);
    }
  }
  SUBCASE("optional dumps and checkpoints") {
    const fs::path out = scratch("dumps");
    ExperimentConfig cfg = tiny_config(out);
    cfg.dump_samples = true;
    cfg.save_checkpoints = true;
    run_experiment(cfg);
    CHECK(fs::exists(out / "samples" / "epoch_002.csv"));
    CHECK(fs::exists(out / "final.bin"));
    CHECK(fs::exists(out / "warmup.json"));
    Mlp net = load_checkpoint(out / "final");
    CHECK(net.output_dim() == 3);
  }
  SUBCASE("filter cache is reused") {
    const fs::path cache = scratch("cache");
    ExperimentConfig cfg = tiny_config(scratch("cache_run"));
    cfg.filter_cache = cache.string();
    BenchmarkData bench = make_benchmark(cfg);
    Evaluator eval(bench.train, bench.test);
    auto first = run_filter_stage(cfg, bench.train, eval);
    auto second = run_filter_stage(cfg, bench.train, eval);
    CHECK_FALSE(first.from_cache);
    CHECK(second.from_cache);
    CHECK(first.filtered.indices == second.filtered.indices);
    cfg.noise.ratio = 0.1;
    BenchmarkData other = make_benchmark(cfg);
    Evaluator eval2(other.train, other.test);
    CHECK_FALSE(run_filter_stage(cfg, other.train, eval2).from_cache);
  }
  SUBCASE("sweep writes one row per point") {
    const fs::path root = scratch("sweep");
    ExperimentConfig cfg = tiny_config(root);
    auto points = run_sweep(cfg, {{"variant", {"full", "plain_ce"}}});
    CHECK(points.size() == 2);
    std::ifstream in(root / "sweep.csv");
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 3);
    CHECK(fs::exists(root / "point_001" / "summary.json"));
  }
}
