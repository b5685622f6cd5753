#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "core/harness.hpp"
#include "core/loss_gmm.hpp"
#include "support/benchmark.hpp"

using namespace splitnet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("splitnet_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

struct Pipeline {
  ExperimentConfig cfg;
  BenchmarkData data;
  Evaluator eval;
  TrainingSet ts;
  Augmenter augment;

  explicit Pipeline(ExperimentConfig c)
      : cfg(std::move(c)),
        data(make_benchmark(cfg)),
        eval(data.train, data.test),
        ts(data.train.training_set()),
        augment(cfg.augment, feature_std(data.train.features())) {}

  Mlp fresh_net() const {
    Rng rng(derive_seed(cfg.seed, Stage::MainInit));
    return Mlp::build(cfg.net.spec(cfg.feature_dim, cfg.num_classes), rng);
  }
};

double gmm_separation(const Mlp& net, const TrainingSet& ts) {
  const Vector v = normalize_losses(per_sample_losses(net, ts));
  const GmmParams g = fit_gmm_1d(as_span(v));
  return std::abs(g.mean[1] - g.mean[0]);
}

}  // namespace

TEST_CASE("cross filtering on near-separable data at half noise") {
  ExperimentConfig cfg = bench::config(1, 0.5, "full", scratch("filter"));
  cfg.spread = 0.1;
  cfg.filter_tau_label = 0.95;
  Pipeline st(cfg);
  FilterOutcome f = run_filter_stage(st.cfg, st.data.train, st.eval);
  CAPTURE(f.filtered.size());
  CHECK_FALSE(f.filtered.empty());
  CHECK(f.precision >= 0.9);
}

TEST_CASE("filtered warm-up separates the loss modes at heavy noise") {
  Pipeline st(bench::config(1, 0.8, "full", scratch("warmup_sep")));
  const std::uint64_t wseed = derive_seed(st.cfg.seed, Stage::Warmup);

  Mlp ours = st.fresh_net();
  Optimizer opt_a(st.cfg.net.sgd);
  FilterOutcome f = run_filter_stage(st.cfg, st.data.train, st.eval);
  warmup_train(ours, opt_a, st.ts, f.filtered, st.augment, st.cfg.warmup, wseed);
  ours.set_mode(Mode::Eval);

  Mlp plain = st.fresh_net();
  Optimizer opt_b(st.cfg.net.sgd);
  train_plain_ce(plain, opt_b, st.ts, st.augment, st.cfg.warmup.epochs, st.cfg.net.batch_size,
                 wseed);
  plain.set_mode(Mode::Eval);

  const double sep_ours = gmm_separation(ours, st.ts);
  const double sep_plain = gmm_separation(plain, st.ts);
  CAPTURE(sep_ours);
  CAPTURE(sep_plain);
  CHECK(sep_ours >= 1.5 * sep_plain);
}

TEST_CASE("warm-up on the truly clean subset beats plain warm-up at half noise") {
  Pipeline st(bench::config(1, 0.5, "full", scratch("oracle_filter")));
  const std::uint64_t wseed = derive_seed(st.cfg.seed, Stage::Warmup);

  FilteredSet oracle;
  const auto& mask = st.data.train.ground_truth().clean_mask;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (mask[i]) oracle.indices.push_back(i);
  }
  Mlp ours = st.fresh_net();
  Optimizer opt_a(st.cfg.net.sgd);
  warmup_train(ours, opt_a, st.ts, oracle, st.augment, st.cfg.warmup, wseed);
  ours.set_mode(Mode::Eval);

  Mlp plain = st.fresh_net();
  Optimizer opt_b(st.cfg.net.sgd);
  train_plain_ce(plain, opt_b, st.ts, st.augment, st.cfg.warmup.epochs, st.cfg.net.batch_size,
                 wseed);
  plain.set_mode(Mode::Eval);

  const double acc_ours = st.eval.test_accuracy(ours);
  const double acc_plain = st.eval.test_accuracy(plain);
  CAPTURE(acc_ours);
  CAPTURE(acc_plain);
  CHECK(acc_ours >= acc_plain);
}

TEST_CASE("noise-free labels: clean share tends to one, accuracy matches plain training") {
  RunReport full = run_experiment(bench::config(1, 0.0, "full", scratch("clean_full")), false);
  RunReport ce = run_experiment(bench::config(1, 0.0, "plain_ce", scratch("clean_ce")), false);

  double best_early_eta = 0.0;
  for (std::size_t e = 0; e < 5 && e < full.epochs.size(); ++e) {
    best_early_eta = std::max(best_early_eta, full.epochs[e].eta);
  }
  CAPTURE(best_early_eta);
  CAPTURE(full.summary.last_test_acc);
  CAPTURE(ce.summary.last_test_acc);
  CHECK(best_early_eta >= 0.95);
  CHECK(full.summary.last_test_acc >= ce.summary.last_test_acc - 0.01);
}

TEST_CASE("dynamic threshold pseudo-label counts at heavy noise") {
  auto counts = [](const std::string& variant) {
    RunReport r =
        run_experiment(bench::config(1, 0.8, variant, scratch("pseudo_" + variant)), false);
    std::size_t correct = 0, wrong = 0;
    for (const auto& e : r.epochs) {
      if (2 * e.epoch < static_cast<int>(r.epochs.size())) continue;
      correct += e.pseudo_correct;
      wrong += e.pseudo_wrong;
    }
    return std::pair{correct, wrong};
  };
  const auto dyn = counts("full");
  const auto hi = counts("fixed_threshold(0.95)");
  const auto lo = counts("fixed_threshold(0.5)");
  CAPTURE(dyn.first);
  CAPTURE(dyn.second);
  CAPTURE(hi.first);
  CAPTURE(lo.second);
  CHECK(dyn.first >= hi.first);
  CHECK(dyn.second <= lo.second);
}

TEST_CASE("filtered set is purer than the data at both benchmark noise levels") {
  for (double rho : {0.5, 0.8}) {
    CAPTURE(rho);
    Pipeline st(bench::config(1, rho, "full", scratch("purity")));
    FilterOutcome f = run_filter_stage(st.cfg, st.data.train, st.eval);
    CAPTURE(f.precision);
    CHECK(f.precision > 1.0 - rho);
  }
}
