#include "core/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace splitnet {

std::string to_string(NoiseKind kind) {
  return kind == NoiseKind::Symmetric ? "symmetric" : "asymmetric";
}

NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "symmetric") return NoiseKind::Symmetric;
  if (s == "asymmetric") return NoiseKind::Asymmetric;
  fail(ErrorCode::InvalidArgument, "unknown noise kind '" + s + "'");
}

std::vector<int> NoiseSpec::resolved_pair_map(int num_classes) const {
  if (!pair_map.empty()) return pair_map;
  std::vector<int> map(static_cast<std::size_t>(num_classes));
  for (int c = 0; c < num_classes; ++c) map[static_cast<std::size_t>(c)] = (c + 1) % num_classes;
  return map;
}

void NoiseSpec::validate(int num_classes) const {
  require(ratio >= 0.0 && ratio <= 1.0, ErrorCode::InvalidArgument,
          "noise ratio must lie in [0, 1]");
  if (kind == NoiseKind::Symmetric) {
    require(num_classes >= 2 || ratio == 0.0, ErrorCode::InvalidArgument,
            "symmetric noise needs at least two classes");
    return;
  }
  require(num_classes >= 2, ErrorCode::InvalidArgument, "asymmetric noise needs r >= 2");
  auto map = resolved_pair_map(num_classes);
  require(static_cast<int>(map.size()) == num_classes, ErrorCode::InvalidArgument,
          "pair_map must have one entry per class");
  std::vector<int> sorted = map;
  std::sort(sorted.begin(), sorted.end());
  for (int c = 0; c < num_classes; ++c) {
    require(sorted[static_cast<std::size_t>(c)] == c, ErrorCode::InvalidArgument,
            "pair_map must be a permutation of the class indices");
  }
}

NoisyDataset::NoisyDataset(Matrix features, std::vector<int> noisy_labels,
                           std::vector<int> true_labels, int num_classes)
    : features_(std::move(features)), noisy_labels_(std::move(noisy_labels)),
      num_classes_(num_classes) {
  require(num_classes_ >= 2, ErrorCode::InvalidArgument, "need at least two classes");
  require(!noisy_labels_.empty(), ErrorCode::InvalidArgument, "dataset is empty");
  require(noisy_labels_.size() == true_labels.size() &&
              static_cast<Eigen::Index>(noisy_labels_.size()) == features_.rows(),
          ErrorCode::ShapeMismatch, "features and labels disagree in length");
  truth_.clean_mask.resize(noisy_labels_.size());
  for (std::size_t i = 0; i < noisy_labels_.size(); ++i) {
    require(noisy_labels_[i] >= 0 && noisy_labels_[i] < num_classes_ && true_labels[i] >= 0 &&
                true_labels[i] < num_classes_,
            ErrorCode::InvalidArgument, "label out of range");
    truth_.clean_mask[i] = noisy_labels_[i] == true_labels[i];
  }
  truth_.true_labels = std::move(true_labels);
}

std::size_t NoisyDataset::noisy_count() const {
  return static_cast<std::size_t>(
      std::count(truth_.clean_mask.begin(), truth_.clean_mask.end(), false));
}

namespace {

Matrix class_means(int num_classes, int feature_dim) {
  Matrix means = Matrix::Zero(num_classes, feature_dim);
  if (feature_dim >= num_classes) {
    // Scaled simplex vertices: every pair of means is 2 apart.
    for (int c = 0; c < num_classes; ++c) means(c, c) = std::sqrt(2.0);
  } else {
    for (int c = 0; c < num_classes; ++c) {
      double angle = 2.0 * M_PI * c / num_classes;
      means(c, 0) = std::cos(angle);
      means(c, 1) = std::sin(angle);
    }
  }
  return means;
}

}  // namespace

CleanDataset generate_blobs(int num_classes, int per_class, int feature_dim, double spread,
                            std::uint64_t seed) {
  require(num_classes >= 2, ErrorCode::InvalidArgument, "generate_blobs: r must be >= 2");
  require(per_class >= 1, ErrorCode::InvalidArgument, "generate_blobs: per_class must be >= 1");
  require(feature_dim >= 2, ErrorCode::InvalidArgument, "generate_blobs: d must be >= 2");
  require(spread > 0.0 && std::isfinite(spread), ErrorCode::InvalidArgument,
          "generate_blobs: spread must be positive");

  Rng rng(seed);
  std::normal_distribution<double> gauss(0.0, spread);
  Matrix means = class_means(num_classes, feature_dim);

  CleanDataset ds;
  ds.num_classes = num_classes;
  ds.features.resize(static_cast<Eigen::Index>(num_classes) * per_class, feature_dim);
  ds.labels.reserve(static_cast<std::size_t>(num_classes) * per_class);
  Eigen::Index row = 0;
  for (int c = 0; c < num_classes; ++c) {
    for (int k = 0; k < per_class; ++k, ++row) {
      for (int j = 0; j < feature_dim; ++j) ds.features(row, j) = means(c, j) + gauss(rng);
      ds.labels.push_back(c);
    }
  }
  return ds;
}

NoisyDataset inject_noise(const CleanDataset& ds, const NoiseSpec& spec, std::uint64_t seed) {
  spec.validate(ds.num_classes);
  const std::size_t n = ds.size();
  const int r = ds.num_classes;
  Rng rng(seed);

  std::vector<int> map;
  std::vector<std::size_t> pool;
  if (spec.kind == NoiseKind::Asymmetric) {
    map = spec.resolved_pair_map(r);
    for (std::size_t i = 0; i < n; ++i) {
      if (map[static_cast<std::size_t>(ds.labels[i])] != ds.labels[i]) pool.push_back(i);
    }
  } else {
    pool.resize(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
  }

  const auto flips = static_cast<std::size_t>(std::llround(spec.ratio * static_cast<double>(n)));
  require(flips <= pool.size(), ErrorCode::InvalidArgument,
          "noise ratio exceeds the samples eligible under pair_map");
  std::shuffle(pool.begin(), pool.end(), rng);

  std::vector<int> noisy = ds.labels;
  std::uniform_int_distribution<int> other(0, r - 2);
  for (std::size_t k = 0; k < flips; ++k) {
    const std::size_t i = pool[k];
    const int y = ds.labels[i];
    if (spec.kind == NoiseKind::Symmetric) {
      int u = other(rng);
      noisy[i] = u < y ? u : u + 1;
    } else {
      noisy[i] = map[static_cast<std::size_t>(y)];
    }
  }
  return NoisyDataset(ds.features, std::move(noisy), ds.labels, r);
}

void AugmentSpec::validate() const {
  require(weak_sigma >= 0.0 && weak_sigma <= strong_sigma, ErrorCode::InvalidArgument,
          "augmentation needs 0 <= weak_sigma <= strong_sigma");
  require(mask_fraction >= 0.0 && mask_fraction < 1.0, ErrorCode::InvalidArgument,
          "mask_fraction must lie in [0, 1)");
}

Vector feature_std(const Matrix& features) {
  Vector out(features.cols());
  const double n = static_cast<double>(features.rows());
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    double mean = features.col(j).mean();
    double var = (features.col(j).array() - mean).square().sum() / n;
    out(j) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return out;
}

Augmenter::Augmenter(AugmentSpec spec, Vector feature_std) : spec_(spec), std_(std::move(feature_std)) {
  spec_.validate();
}

void Augmenter::jitter(Eigen::Ref<RowVector> x, double sigma, Rng& rng) const {
  require(x.size() == std_.size(), ErrorCode::ShapeMismatch, "augment: feature width mismatch");
  if (sigma == 0.0) return;
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (Eigen::Index j = 0; j < x.size(); ++j) x(j) += sigma * std_(j) * gauss(rng);
}

void Augmenter::mask(Eigen::Ref<RowVector> x, Rng& rng) const {
  const auto d = static_cast<std::size_t>(x.size());
  const auto count = static_cast<std::size_t>(std::floor(spec_.mask_fraction * static_cast<double>(d)));
  if (count == 0) return;
  std::vector<std::size_t> idx(d);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates: the first `count` slots are a uniform subset.
  for (std::size_t k = 0; k < count; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, d - 1);
    std::swap(idx[k], idx[pick(rng)]);
    x(static_cast<Eigen::Index>(idx[k])) = 0.0;
  }
}

RowVector Augmenter::weak(const RowVector& x, Rng& rng) const {
  RowVector out = x;
  jitter(out, spec_.weak_sigma, rng);
  return out;
}

RowVector Augmenter::strong(const RowVector& x, Rng& rng) const {
  RowVector out = x;
  jitter(out, spec_.strong_sigma, rng);
  mask(out, rng);
  return out;
}

Matrix Augmenter::weak_batch(const Matrix& x, Rng& rng) const {
  Matrix out = x;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    RowVector row = out.row(i);
    jitter(row, spec_.weak_sigma, rng);
    out.row(i) = row;
  }
  return out;
}

Matrix Augmenter::strong_batch(const Matrix& x, Rng& rng) const {
  Matrix out = x;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    RowVector row = out.row(i);
    jitter(row, spec_.strong_sigma, rng);
    mask(row, rng);
    out.row(i) = row;
  }
  return out;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p += ".json";
  return p;
}

void save_dataset_csv(const NoisyDataset& ds, const DatasetProvenance& prov,
                      const std::filesystem::path& csv_path) {
  if (csv_path.has_parent_path()) std::filesystem::create_directories(csv_path.parent_path());
  std::ofstream out(csv_path);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + csv_path.string());
  const int d = ds.feature_dim();
  for (int j = 0; j < d; ++j) out << 'f' << j << ',';
  out << "noisy_label,true_label\n";
  const auto& truth = ds.ground_truth();
  char buf[32];
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (int j = 0; j < d; ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", ds.features()(static_cast<Eigen::Index>(i), j));
      out << buf << ',';
    }
    out << ds.noisy_labels()[i] << ',' << truth.true_labels[i] << '\n';
  }
  require(static_cast<bool>(out), ErrorCode::Io, "failed writing " + csv_path.string());

  nlohmann::json side = {
      {"r", ds.num_classes()},
      {"d", d},
      {"N", ds.size()},
      {"seed", prov.seed},
      {"spec",
       {{"kind", to_string(prov.noise.kind)},
        {"ratio", prov.noise.ratio},
        {"pair_map", prov.noise.resolved_pair_map(ds.num_classes())}}},
  };
  std::ofstream js(sidecar_path(csv_path));
  require(static_cast<bool>(js), ErrorCode::Io, "cannot write sidecar for " + csv_path.string());
  js << side.dump(2) << '\n';
}

NoisyDataset load_dataset_csv(const std::filesystem::path& csv_path, DatasetProvenance* prov) {
  std::ifstream js(sidecar_path(csv_path));
  require(static_cast<bool>(js), ErrorCode::Io, "missing sidecar for " + csv_path.string());
  nlohmann::json side;
  try {
    js >> side;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Io, "malformed sidecar: " + std::string(e.what()));
  }
  const int r = side.at("r").get<int>();
  const int d = side.at("d").get<int>();
  const auto n = side.at("N").get<std::size_t>();
  if (prov) {
    prov->seed = side.value("seed", std::uint64_t{0});
    prov->noise.kind = parse_noise_kind(side.at("spec").at("kind").get<std::string>());
    prov->noise.ratio = side.at("spec").at("ratio").get<double>();
    prov->noise.pair_map = side.at("spec").value("pair_map", std::vector<int>{});
  }

  std::ifstream in(csv_path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot read " + csv_path.string());
  std::string line;
  std::getline(in, line);
  std::string expected;
  for (int j = 0; j < d; ++j) expected += "f" + std::to_string(j) + ",";
  expected += "noisy_label,true_label";
  require(line == expected, ErrorCode::Io, "unexpected CSV header in " + csv_path.string());

  Matrix features(static_cast<Eigen::Index>(n), d);
  std::vector<int> noisy, truth;
  noisy.reserve(n);
  truth.reserve(n);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    require(row < n, ErrorCode::Io, "CSV has more rows than the sidecar declares");
    std::stringstream ss(line);
    std::string cell;
    for (int j = 0; j < d; ++j) {
      require(static_cast<bool>(std::getline(ss, cell, ',')), ErrorCode::Io, "short CSV row");
      features(static_cast<Eigen::Index>(row), j) = std::strtod(cell.c_str(), nullptr);
    }
    require(static_cast<bool>(std::getline(ss, cell, ',')), ErrorCode::Io, "short CSV row");
    noisy.push_back(std::stoi(cell));
    require(static_cast<bool>(std::getline(ss, cell, ',')), ErrorCode::Io, "short CSV row");
    truth.push_back(std::stoi(cell));
    ++row;
  }
  require(row == n, ErrorCode::Io, "CSV row count disagrees with the sidecar");
  return NoisyDataset(std::move(features), std::move(noisy), std::move(truth), r);
}

}  // namespace splitnet
