#include <doctest.h>

#include <algorithm>

#include "core/split_model.hpp"

using namespace splitnet;

namespace {

Matrix random_probs(Eigen::Index n, int r, Rng& rng) {
  std::uniform_real_distribution<double> u(0.01, 1.0);
  Matrix p(n, r);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int j = 0; j < r; ++j) p(i, j) = u(rng);
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

}  // namespace

TEST_CASE("input rows") {
  Rng rng(1);
  PredictionHistory h(6, 4);
  std::vector<int> y{0, 1, 2, 3, 0, 1};
  Matrix first = random_probs(6, 4, rng);
  h.push(first);
  Matrix in = build_input(h, y);
  CHECK(in.cols() == 12);
  CHECK(in.leftCols(4) == first);
  CHECK(in.middleCols(4, 4) == first);
  CHECK(in.rightCols(4) == one_hot(y, 4));

  h.push(first);
  CHECK(build_input(h, y).middleCols(4, 4).cwiseAbs().maxCoeff() == 0.0);

  Matrix second = random_probs(6, 4, rng);
  h.push(second);
  CHECK(build_input(h, y, false).middleCols(4, 4).cwiseAbs().maxCoeff() == 0.0);
  CHECK((build_input(h, y).middleCols(4, 4) - (second - first)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("scores are a distribution and ignore the rest of the batch") {
  Rng rng(2);
  SplitNetModel model(3, SplitNetConfig{}, 5);
  Matrix inputs = Matrix::Random(20, 9);
  auto s = split_scores(model, inputs);
  for (const auto& sc : s) CHECK(sc.clean + sc.noisy == doctest::Approx(1.0).epsilon(1e-15));

  Matrix other = inputs;
  other.bottomRows(19) = Matrix::Random(19, 9) * 50.0;
  auto s2 = split_scores(model, other);
  CHECK(s2[0].clean == s[0].clean);
}

TEST_CASE("zeroed output projection scores one half") {
  SplitNetModel model(4, SplitNetConfig{}, 3);
  auto& last = std::get<Dense>(model.net().layers().back());
  last.weight.setZero();
  last.bias.setZero();
  auto s = split_scores(model, Matrix::Random(5, 12));
  for (const auto& sc : s) {
    CHECK(sc.clean == 0.5);
    CHECK(sc.confidence() == 0.5);
  }
}

TEST_CASE("learns a separable hedged set") {
  const int r = 4;
  Rng rng(3);
  // Clean rows put mass on the observed label, noisy rows on another class.
  const std::size_t m = 200;
  Matrix inputs = Matrix::Zero(static_cast<Eigen::Index>(m), 3 * r);
  HedgedSet hedged;
  std::uniform_int_distribution<int> cls(0, r - 1);
  for (std::size_t i = 0; i < m; ++i) {
    const int y = cls(rng);
    const bool clean = i % 2 == 0;
    const int peak = clean ? y : (y + 1 + cls(rng) % (r - 1)) % r;
    RowVector p = RowVector::Constant(r, 0.1 / (r - 1));
    p(peak) = 0.9;
    const auto row = static_cast<Eigen::Index>(i);
    inputs.block(row, 0, 1, r) = p;
    inputs.block(row, r, 1, r) = p;
    inputs(row, 2 * r + y) = 1.0;
    hedged.entries.push_back({i, clean ? SplitLabel::Clean : SplitLabel::Noisy});
    clean ? ++hedged.clean_count : ++hedged.noisy_count;
  }
  SplitNetModel model(r, SplitNetConfig{}, 11);
  auto outcome = train_splitnet(model, hedged, inputs, 60, 32, rng);
  CHECK(outcome == SplitTrainOutcome::Trained);
  auto s = split_scores(model, inputs);
  std::size_t right = 0;
  for (const auto& e : hedged.entries) {
    const bool says_clean = s[e.index].clean >= s[e.index].noisy;
    right += says_clean == (e.label == SplitLabel::Clean) ? 1 : 0;
  }
  CHECK(static_cast<double>(right) / m >= 0.99);
}

TEST_CASE("training contract") {
  Rng data_rng(4);
  Matrix inputs = Matrix::Random(40, 6);
  HedgedSet hedged;
  for (std::size_t i = 0; i < 40; i += 2) {
    const bool clean = i % 4 == 0;
    hedged.entries.push_back({i, clean ? SplitLabel::Clean : SplitLabel::Noisy});
    clean ? ++hedged.clean_count : ++hedged.noisy_count;
  }

  SUBCASE("zero epochs leave the parameters untouched") {
    SplitNetModel model(2, SplitNetConfig{}, 9);
    auto before = split_scores(model, inputs);
    Rng rng(1);
    CHECK(train_splitnet(model, hedged, inputs, 0, 8, rng) == SplitTrainOutcome::Trained);
    auto after = split_scores(model, inputs);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i].clean == after[i].clean);
  }
  SUBCASE("two seeded runs agree bitwise") {
    SplitNetModel a(2, SplitNetConfig{}, 9), b(2, SplitNetConfig{}, 9);
    Rng ra(1), rb(1);
    train_splitnet(a, hedged, inputs, 3, 8, ra);
    train_splitnet(b, hedged, inputs, 3, 8, rb);
    auto sa = split_scores(a, inputs), sb = split_scores(b, inputs);
    for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa[i].clean == sb[i].clean);
  }
  SUBCASE("only hedged rows are read") {
    SplitNetModel model(2, SplitNetConfig{}, 9);
    Rng rng(1);
    std::vector<std::size_t> log;
    train_splitnet(model, hedged, inputs, 2, 8, rng, &log);
    CHECK(log.size() == 2 * hedged.size());
    for (auto i : log) CHECK(i % 2 == 0);
  }
  SUBCASE("a one-sided or tiny hedged set is skipped") {
    SplitNetModel model(2, SplitNetConfig{}, 9);
    Rng rng(1);
    HedgedSet one_sided;
    for (std::size_t i = 0; i < 10; ++i) one_sided.entries.push_back({i, SplitLabel::Clean});
    one_sided.clean_count = 10;
    CHECK(train_splitnet(model, one_sided, inputs, 2, 8, rng) == SplitTrainOutcome::Skipped);
    HedgedSet tiny;
    tiny.entries = {{0, SplitLabel::Clean}, {1, SplitLabel::Noisy}};
    tiny.clean_count = tiny.noisy_count = 1;
    CHECK(train_splitnet(model, tiny, inputs, 2, 8, rng) == SplitTrainOutcome::Skipped);
    CHECK_FALSE(model.trained());
  }
  SUBCASE("wrong input width") {
    SplitNetModel model(3, SplitNetConfig{}, 9);
    Rng rng(1);
    CHECK_THROWS_AS(train_splitnet(model, hedged, inputs, 1, 8, rng), Error);
  }
}
