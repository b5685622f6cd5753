#include <doctest.h>

#include <cmath>
#include <set>

#include "core/main_loop.hpp"
#include "support/oracles.hpp"

using namespace splitnet;

namespace {

// A single identity layer: the logits are the inputs.
Mlp passthrough(int r) {
  Dense d(r, r);
  d.weight = Matrix::Identity(r, r);
  d.bias.setZero();
  return Mlp({Layer{d}});
}

}  // namespace

TEST_CASE("pseudo-labels") {
  Mlp net = passthrough(3);
  Matrix logp(2, 3);
  logp << std::log(0.9), std::log(0.05), std::log(0.05), 0.0, 0.0, -1.0;
  PseudoLabels q = make_pseudo_labels(net, logp);
  CHECK(q.label[0] == 0);
  CHECK(q.confidence[0] == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(q.label[1] == 0);

  Matrix tie(1, 2);
  tie << 0.3, 0.3;
  PseudoLabels t = make_pseudo_labels(passthrough(2), tie);
  CHECK(t.label[0] == 0);
  CHECK(t.confidence[0] == 0.5);
}

TEST_CASE("dynamic threshold") {
  CHECK(dynamic_threshold({1.0, 0.0}, 0.95, 0.5) == 0.5);
  CHECK(dynamic_threshold({0.0, 1.0}, 0.95, 0.5) == 0.5);
  CHECK(dynamic_threshold({0.5, 0.5}, 0.95, 0.5) == doctest::Approx(0.725).epsilon(1e-15));
  Rng rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    const double c = u(rng);
    CHECK(dynamic_threshold({c, 1.0 - c}, 0.8, 0.8) == doctest::Approx(0.8).epsilon(1e-15));
  }
}

TEST_CASE("consistency term") {
  Rng rng(2);
  const int n = 12, r = 4;
  Matrix logits = Matrix::Random(n, r) * 3.0;
  PseudoLabels q;
  std::uniform_int_distribution<int> cls(0, r - 1);
  std::uniform_real_distribution<double> conf(0.25, 1.0);
  for (int i = 0; i < n; ++i) {
    q.label.push_back(cls(rng));
    q.confidence.push_back(conf(rng));
  }

  SUBCASE("nothing passes") {
    std::vector<double> thr(n, 1.1);
    auto t = consistency_term(logits, q, thr);
    CHECK(t.loss == 0.0);
    CHECK(t.mask_count == 0);
    CHECK(t.grad.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("confident agreement costs nothing") {
    Matrix sure = Matrix::Constant(n, r, -800.0);
    for (int i = 0; i < n; ++i) sure(i, q.label[static_cast<std::size_t>(i)]) = 800.0;
    std::vector<double> thr(n, 0.0);
    auto t = consistency_term(sure, q, thr);
    CHECK(t.mask_count == static_cast<std::size_t>(n));
    CHECK(t.loss < 1e-300);
  }
  SUBCASE("matches a per-sample loop") {
    std::vector<double> thr(n);
    for (int i = 0; i < n; ++i) thr[static_cast<std::size_t>(i)] = 0.3 + 0.05 * i;
    auto t = consistency_term(logits, q, thr);
    long double expected = 0.0L;
    std::size_t count = 0;
    for (int i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (q.confidence[k] < thr[k]) continue;
      ++count;
      Matrix row = logits.row(i);
      expected += oracle::cross_entropy(row, one_hot(std::span<const int>(&q.label[k], 1), r));
    }
    CHECK(t.mask_count == count);
    CHECK(std::abs(t.loss - static_cast<double>(expected / n)) < 1e-12);
  }
  SUBCASE("gradient matches central differences") {
    std::vector<double> thr(n, 0.5);
    auto t = consistency_term(logits, q, thr);
    const double h = 1e-6;
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < r; ++j) {
        Matrix up = logits, down = logits;
        up(i, j) += h;
        down(i, j) -= h;
        const double fd =
            (consistency_term(up, q, thr).loss - consistency_term(down, q, thr).loss) / (2 * h);
        worst = std::max(worst, oracle::rel_error(t.grad(i, j), fd));
      }
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("clean set and combined loss") {
  std::vector<SplitScore> half(5, SplitScore{0.5, 0.5});
  CHECK(clean_set(half, 0.95).empty());

  std::vector<SplitScore> any{{0.1, 0.9}, {0.7, 0.3}, {0.0, 1.0}};
  CHECK(clean_set(any, 0.0).size() == 3);

  std::vector<SplitScore> two{{0.96, 0.04}, {0.94, 0.06}};
  CHECK(clean_set(two, 0.95) == std::vector<std::size_t>{0});

  CHECK(total_loss(2.0, 4.0, 0, 100).loss == 4.0);
  CHECK(total_loss(2.0, 4.0, 100, 100).loss == 2.0);
  auto mixed = total_loss(2.0, 4.0, 25, 100);
  CHECK(mixed.eta == 0.25);
  CHECK(mixed.loss == doctest::Approx(3.5).epsilon(1e-15));
}

TEST_CASE("learning-rate schedule") {
  LoopConfig cfg;
  cfg.epochs = 30;
  CHECK(cfg.decay_epoch() == 20);
  CHECK(cfg.lr_at(19) == 0.02);
  CHECK(cfg.lr_at(20) == doctest::Approx(0.002));
}

namespace {

struct LoopFixture {
  NoisyDataset data;
  Augmenter augment;
  LoopConfig cfg;

  static LoopFixture make() {
    auto clean = generate_blobs(3, 40, 5, 0.4, 31);
    auto noisy = inject_noise(clean, {NoiseKind::Symmetric, 0.3, {}}, 32);
    Augmenter aug({0.1, 0.3, 0.25}, feature_std(noisy.features()));
    LoopConfig cfg;
    cfg.epochs = 4;
    cfg.batch_size = 32;
    cfg.splitnet.epochs = 2;
    cfg.splitnet.batch_size = 32;
    return {std::move(noisy), std::move(aug), cfg};
  }
};

Mlp fresh_net(std::uint64_t seed) {
  Rng rng(seed);
  return Mlp::build({5, {16, 16}, 3, true}, rng);
}

}  // namespace

TEST_CASE("training loop") {
  LoopFixture fx = LoopFixture::make();
  const TrainingSet ts = fx.data.training_set();

  SUBCASE("seeded runs are bit-identical") {
    Mlp a = fresh_net(1), b = fresh_net(1);
    std::vector<double> ta, tb;
    run_training(a, ts, fx.augment, fx.cfg, 5,
                 [&](const EpochState& st) { ta.push_back(st.thresholds.tau_mu); });
    run_training(b, ts, fx.augment, fx.cfg, 5,
                 [&](const EpochState& st) { tb.push_back(st.thresholds.tau_mu); });
    CHECK(ta == tb);
    CHECK((a.predict(ts.features) - b.predict(ts.features)).cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("supervised reads stay inside the clean set") {
    Mlp net = fresh_net(2);
    LoopAudit audit;
    run_training(net, ts, fx.augment, fx.cfg, 6, {}, &audit);
    REQUIRE(audit.supervised_reads.size() == 4);
    for (std::size_t e = 0; e < 4; ++e) {
      std::set<std::size_t> clean(audit.clean_sets[e].begin(), audit.clean_sets[e].end());
      for (auto i : audit.supervised_reads[e]) CHECK(clean.count(i) == 1);
      CHECK(audit.supervised_reads[e].size() == clean.size());
    }
  }
  SUBCASE("observer sees consistent epoch state") {
    Mlp net = fresh_net(3);
    int epochs = 0;
    run_training(net, ts, fx.augment, fx.cfg, 7, [&](const EpochState& st) {
      ++epochs;
      CHECK(st.thresholds.spread_factor >= 0.0);
      CHECK(st.thresholds.spread_factor <= 1.0);
      CHECK(st.thresholds.tau_nu <= st.thresholds.tau_mu);
      CHECK(st.eta == doctest::Approx(double(st.clean_count) / ts.size()));
      CHECK(st.scores->size() == ts.size());
      std::size_t masked = 0;
      for (bool m : *st.pseudo_mask) masked += m ? 1 : 0;
      CHECK(masked == st.mask_count);
    });
    CHECK(epochs == 4);
  }
  SUBCASE("the ground truth is never consulted") {
    Mlp net = fresh_net(4);
    run_training(net, ts, fx.augment, fx.cfg, 8);
    CHECK(fx.data.truth_reads() == 0);
  }
  SUBCASE("mismatched network") {
    Rng rng(1);
    Mlp wrong = Mlp::build({4, {8}, 3, true}, rng);
    CHECK_THROWS_AS(run_training(wrong, ts, fx.augment, fx.cfg, 1), Error);
  }
}
