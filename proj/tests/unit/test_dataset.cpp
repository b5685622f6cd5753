#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "core/dataset.hpp"

using namespace splitnet;

TEST_CASE("blob generation") {
  SUBCASE("balanced classes") {
    auto ds = generate_blobs(4, 500, 2, 0.3, 1);
    CHECK(ds.size() == 2000);
    for (int c = 0; c < 4; ++c) CHECK(std::count(ds.labels.begin(), ds.labels.end(), c) == 500);
  }
  SUBCASE("minimal two-sample case") {
    auto ds = generate_blobs(2, 1, 2, 0.3, 1);
    CHECK(ds.size() == 2);
    CHECK(ds.labels[0] != ds.labels[1]);
  }
  SUBCASE("seeded generation is bit-identical") {
    auto a = generate_blobs(3, 20, 5, 0.5, 77);
    auto b = generate_blobs(3, 20, 5, 0.5, 77);
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
  }
}

TEST_CASE("noise injection") {
  auto clean = generate_blobs(4, 500, 4, 0.5, 3);

  SUBCASE("zero ratio is the identity") {
    auto ds = inject_noise(clean, {NoiseKind::Symmetric, 0.0, {}}, 1);
    const auto& gt = ds.ground_truth();
    CHECK(std::all_of(gt.clean_mask.begin(), gt.clean_mask.end(), [](bool b) { return b; }));
    CHECK(std::equal(ds.noisy_labels().begin(), ds.noisy_labels().end(), clean.labels.begin()));
  }
  SUBCASE("full symmetric flip changes every label") {
    auto ds = inject_noise(clean, {NoiseKind::Symmetric, 1.0, {}}, 1);
    const auto& gt = ds.ground_truth();
    CHECK(std::none_of(gt.clean_mask.begin(), gt.clean_mask.end(), [](bool b) { return b; }));
    for (std::size_t i = 0; i < ds.size(); ++i) CHECK(ds.noisy_labels()[i] != gt.true_labels[i]);
  }
  SUBCASE("exact corrupted count") {
    auto ds = inject_noise(clean, {NoiseKind::Symmetric, 0.4, {}}, 9);
    const auto& gt = ds.ground_truth();
    CHECK(std::count(gt.clean_mask.begin(), gt.clean_mask.end(), false) == 800);
    CHECK(ds.noisy_count() == 800);
  }
  SUBCASE("symmetric flips spread over the other classes") {
    auto ds = inject_noise(clean, {NoiseKind::Symmetric, 1.0, {}}, 5);
    const auto& gt = ds.ground_truth();
    std::vector<int> offset_counts(4, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
      ++offset_counts[static_cast<std::size_t>((ds.noisy_labels()[i] - gt.true_labels[i] + 4) % 4)];
    }
    CHECK(offset_counts[0] == 0);
    for (int k = 1; k < 4; ++k) CHECK(std::abs(offset_counts[static_cast<std::size_t>(k)] - 667) < 80);
  }
  SUBCASE("asymmetric flips follow the pair map") {
    NoiseSpec spec{NoiseKind::Asymmetric, 0.3, {}};
    auto ds = inject_noise(clean, spec, 2);
    const auto& gt = ds.ground_truth();
    std::size_t flipped = 0;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (gt.clean_mask[i]) continue;
      ++flipped;
      CHECK(ds.noisy_labels()[i] == (gt.true_labels[i] + 1) % 4);
    }
    CHECK(flipped == 600);
  }
  SUBCASE("pair map must be a permutation") {
    NoiseSpec bad{NoiseKind::Asymmetric, 0.3, {1, 1, 2, 3}};
    CHECK_THROWS_AS(inject_noise(clean, bad, 1), Error);
  }
  SUBCASE("ratio outside [0, 1] is rejected") {
    CHECK_THROWS_AS(inject_noise(clean, {NoiseKind::Symmetric, 1.5, {}}, 1), Error);
  }
  SUBCASE("ground-truth reads are counted") {
    auto ds = inject_noise(clean, {NoiseKind::Symmetric, 0.2, {}}, 1);
    CHECK(ds.truth_reads() == 0);
    (void)ds.ground_truth();
    (void)ds.ground_truth();
    CHECK(ds.truth_reads() == 2);
  }
}

TEST_CASE("augmentation") {
  Vector unit = Vector::Ones(8);
  Rng rng(11);
  RowVector x = RowVector::LinSpaced(8, -1.0, 1.0);

  SUBCASE("zero strength is the identity") {
    Augmenter none({0.0, 0.0, 0.0}, unit);
    CHECK(none.weak(x, rng) == x);
    CHECK(none.strong(x, rng) == x);
  }
  SUBCASE("seeded augmentation is reproducible") {
    Augmenter aug({0.1, 0.3, 0.25}, unit);
    Rng a(5), b(5);
    CHECK(aug.strong(x, a) == aug.strong(x, b));
  }
  SUBCASE("weak jitter has the half-normal mean absolute shift") {
    Augmenter aug({0.1, 0.3, 0.25}, unit);
    double total = 0.0;
    const int draws = 10000;
    RowVector z = RowVector::Zero(1);
    Augmenter one({0.1, 0.3, 0.25}, Vector::Ones(1));
    for (int i = 0; i < draws; ++i) total += std::abs(one.weak(z, rng)(0));
    // E|N(0, 0.1)| = 0.1 * sqrt(2 / pi)
    CHECK(std::abs(total / draws - 0.1 * std::sqrt(2.0 / M_PI)) < 0.003);
  }
  SUBCASE("masking zeroes exactly floor(f d) coordinates") {
    Augmenter mask_only({0.0, 0.0, 0.5}, unit);
    RowVector ones = RowVector::Ones(8);
    for (int t = 0; t < 20; ++t) {
      RowVector y = mask_only.strong(ones, rng);
      CHECK((y.array() == 0.0).count() == 4);
    }
  }
  SUBCASE("strong view perturbs more than the weak view") {
    Augmenter aug({0.1, 0.3, 0.25}, unit);
    double weak_ss = 0.0, strong_ss = 0.0;
    for (int t = 0; t < 2000; ++t) {
      weak_ss += (aug.weak(x, rng) - x).squaredNorm();
      strong_ss += (aug.strong(x, rng) - x).squaredNorm();
    }
    CHECK(strong_ss > weak_ss);
  }
  SUBCASE("invalid strengths are rejected") {
    CHECK_THROWS_AS(Augmenter({-0.1, 0.3, 0.25}, unit), Error);
    CHECK_THROWS_AS(Augmenter({0.1, 0.3, 1.0}, unit), Error);
  }
}

TEST_CASE("dataset CSV round trip") {
  auto clean = generate_blobs(3, 10, 4, 0.5, 21);
  NoiseSpec spec{NoiseKind::Asymmetric, 0.4, {1, 2, 0}};
  auto ds = inject_noise(clean, spec, 22);
  const auto path = std::filesystem::temp_directory_path() / "splitnet_ds_test.csv";
  save_dataset_csv(ds, {spec, 22}, path);
  CHECK(std::filesystem::exists(sidecar_path(path)));

  DatasetProvenance prov;
  auto back = load_dataset_csv(path, &prov);
  CHECK(back.features() == ds.features());
  CHECK(std::equal(back.noisy_labels().begin(), back.noisy_labels().end(),
                   ds.noisy_labels().begin()));
  CHECK(back.ground_truth().true_labels == ds.ground_truth().true_labels);
  CHECK(prov.seed == 22);
  CHECK(prov.noise.kind == NoiseKind::Asymmetric);
  CHECK(prov.noise.pair_map == std::vector<int>{1, 2, 0});
}
