#include "core/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace splitnet {

Dense::Dense(int in, int out)
    : weight(Matrix::Zero(in, out)), bias(RowVector::Zero(out)),
      grad_weight(Matrix::Zero(in, out)), grad_bias(RowVector::Zero(out)) {
  require(in > 0 && out > 0, ErrorCode::InvalidArgument, "dense layer dims must be positive");
}

BatchNorm::BatchNorm(int dim, double momentum_, double eps_)
    : gamma(RowVector::Ones(dim)), beta(RowVector::Zero(dim)),
      running_mean(RowVector::Zero(dim)), running_var(RowVector::Ones(dim)),
      grad_gamma(RowVector::Zero(dim)), grad_beta(RowVector::Zero(dim)), momentum(momentum_),
      eps(eps_) {
  require(dim > 0, ErrorCode::InvalidArgument, "batchnorm dim must be positive");
  require(eps > 0.0, ErrorCode::InvalidArgument, "batchnorm eps must be positive");
}

namespace {

int layer_in(const Layer& l) {
  return std::visit(
      [](const auto& x) -> int {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Dense>) return x.in_dim();
        else if constexpr (std::is_same_v<T, BatchNorm>) return x.dim();
        else return x.dim;
      },
      l);
}

int layer_out(const Layer& l) {
  return std::visit(
      [](const auto& x) -> int {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Dense>) return x.out_dim();
        else if constexpr (std::is_same_v<T, BatchNorm>) return x.dim();
        else return x.dim;
      },
      l);
}

}  // namespace

Mlp::Mlp(std::vector<Layer> layers) : layers_(std::move(layers)) {
  require(!layers_.empty(), ErrorCode::InvalidArgument, "network needs at least one layer");
  for (std::size_t i = 1; i < layers_.size(); ++i) {
    require(layer_out(layers_[i - 1]) == layer_in(layers_[i]), ErrorCode::ShapeMismatch,
            "adjacent layer dims are incompatible at layer " + std::to_string(i));
  }
}

Mlp Mlp::build(const MlpSpec& spec, Rng& rng) {
  require(spec.input_dim > 0 && spec.output_dim > 0, ErrorCode::InvalidArgument,
          "network input and output dims must be positive");
  std::vector<Layer> layers;
  int width = spec.input_dim;
  auto dense = [&](int in, int out) {
    Dense d(in, out);
    const double limit = std::sqrt(6.0 / in);
    std::uniform_real_distribution<double> u(-limit, limit);
    for (Eigen::Index i = 0; i < d.weight.size(); ++i) d.weight.data()[i] = u(rng);
    return d;
  };
  for (int h : spec.hidden) {
    layers.emplace_back(dense(width, h));
    if (spec.batch_norm) layers.emplace_back(BatchNorm(h));
    layers.emplace_back(Relu{h});
    width = h;
  }
  layers.emplace_back(dense(width, spec.output_dim));
  return Mlp(std::move(layers));
}

int Mlp::input_dim() const { return layer_in(layers_.front()); }
int Mlp::output_dim() const { return layer_out(layers_.back()); }

bool Mlp::has_batch_norm() const {
  for (const auto& l : layers_) {
    if (std::holds_alternative<BatchNorm>(l)) return true;
  }
  return false;
}

Matrix Mlp::predict(const Matrix& batch) const {
  require(batch.cols() == input_dim(), ErrorCode::ShapeMismatch,
          "input width " + std::to_string(batch.cols()) + " does not match network input " +
              std::to_string(input_dim()));
  Matrix x = batch;
  for (const auto& layer : layers_) {
    if (const auto* d = std::get_if<Dense>(&layer)) {
      Matrix y = x * d->weight;
      y.rowwise() += d->bias;
      x = std::move(y);
    } else if (const auto* bn = std::get_if<BatchNorm>(&layer)) {
      RowVector scale = bn->gamma.array() / (bn->running_var.array() + bn->eps).sqrt();
      RowVector shift = bn->beta.array() - bn->running_mean.array() * scale.array();
      x = (x.array().rowwise() * scale.array()).rowwise() + shift.array();
    } else {
      x = x.cwiseMax(0.0);
    }
  }
  return x;
}

Matrix Mlp::forward(const Matrix& batch) {
  if (mode_ == Mode::Eval) return predict(batch);
  require(batch.cols() == input_dim(), ErrorCode::ShapeMismatch,
          "input width " + std::to_string(batch.cols()) + " does not match network input " +
              std::to_string(input_dim()));
  require(batch.rows() >= 2 || !has_batch_norm(), ErrorCode::InvalidArgument,
          "train-mode batch norm needs a batch of at least 2");

  Cache cache;
  cache.inputs.reserve(layers_.size());
  Matrix x = batch;
  for (auto& layer : layers_) {
    cache.inputs.push_back(x);
    if (auto* d = std::get_if<Dense>(&layer)) {
      Matrix y = x * d->weight;
      y.rowwise() += d->bias;
      x = std::move(y);
    } else if (auto* bn = std::get_if<BatchNorm>(&layer)) {
      const double n = static_cast<double>(x.rows());
      RowVector mean = x.colwise().mean();
      Matrix centered = x.rowwise() - mean;
      RowVector var = centered.array().square().colwise().sum() / n;
      RowVector inv_std = (var.array() + bn->eps).rsqrt();
      Matrix xhat = centered.array().rowwise() * inv_std.array();
      x = (xhat.array().rowwise() * bn->gamma.array()).rowwise() + bn->beta.array();
      bn->running_mean = (1.0 - bn->momentum) * bn->running_mean + bn->momentum * mean;
      bn->running_var = (1.0 - bn->momentum) * bn->running_var + bn->momentum * var;
      cache.xhat.push_back(std::move(xhat));
      cache.inv_std.push_back(std::move(inv_std));
    } else {
      x = x.cwiseMax(0.0);
    }
  }
  cache_ = std::move(cache);
  return x;
}

void Mlp::backward(const Matrix& dlogits) {
  require(cache_.has_value(), ErrorCode::State, "backward() without a matching train-mode forward()");
  Cache& cache = *cache_;
  require(dlogits.rows() == cache.inputs.front().rows() && dlogits.cols() == output_dim(),
          ErrorCode::ShapeMismatch, "upstream gradient shape does not match the cached batch");

  Matrix grad = dlogits;
  std::size_t bn_index = cache.xhat.size();
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const Matrix& input = cache.inputs[li];
    Layer& layer = layers_[li];
    if (auto* d = std::get_if<Dense>(&layer)) {
      d->grad_weight.noalias() = input.transpose() * grad;
      d->grad_bias = grad.colwise().sum();
      if (li > 0) grad = grad * d->weight.transpose();
    } else if (auto* bn = std::get_if<BatchNorm>(&layer)) {
      --bn_index;
      const Matrix& xhat = cache.xhat[bn_index];
      const RowVector& inv_std = cache.inv_std[bn_index];
      const double n = static_cast<double>(grad.rows());
      bn->grad_gamma = (grad.array() * xhat.array()).colwise().sum();
      bn->grad_beta = grad.colwise().sum();
      Matrix dxhat = grad.array().rowwise() * bn->gamma.array();
      RowVector sum_dxhat = dxhat.colwise().sum();
      RowVector sum_dxhat_xhat = (dxhat.array() * xhat.array()).colwise().sum();
      Matrix dx = (n * dxhat.array()).rowwise() - sum_dxhat.array();
      dx.array() -= xhat.array().rowwise() * sum_dxhat_xhat.array();
      grad = dx.array().rowwise() * (inv_std.array() / n);
    } else {
      grad = (input.array() > 0.0).select(grad, 0.0);
    }
  }
  cache_.reset();
}

std::vector<ParamSlot> Mlp::parameters() {
  std::vector<ParamSlot> out;
  auto slot = [](auto& value, auto& grad) {
    return ParamSlot{std::span<double>(value.data(), static_cast<std::size_t>(value.size())),
                     std::span<double>(grad.data(), static_cast<std::size_t>(grad.size()))};
  };
  for (auto& layer : layers_) {
    if (auto* d = std::get_if<Dense>(&layer)) {
      out.push_back(slot(d->weight, d->grad_weight));
      out.push_back(slot(d->bias, d->grad_bias));
    } else if (auto* bn = std::get_if<BatchNorm>(&layer)) {
      out.push_back(slot(bn->gamma, bn->grad_gamma));
      out.push_back(slot(bn->beta, bn->grad_beta));
    }
  }
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) {
    if (const auto* d = std::get_if<Dense>(&layer)) {
      n += static_cast<std::size_t>(d->weight.size() + d->bias.size());
    } else if (const auto* bn = std::get_if<BatchNorm>(&layer)) {
      n += static_cast<std::size_t>(2 * bn->dim());
    }
  }
  return n;
}

Matrix log_softmax(const Matrix& logits) {
  require(logits.allFinite(), ErrorCode::NonFinite, "non-finite logits");
  Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  Matrix shifted = logits.colwise() - row_max;
  Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log();
  return shifted.colwise() - lse;
}

Matrix softmax(const Matrix& logits) { return log_softmax(logits).array().exp(); }

LossAndGrad softmax_cross_entropy(const Matrix& logits, const Matrix& targets) {
  require(logits.rows() == targets.rows() && logits.cols() == targets.cols(),
          ErrorCode::ShapeMismatch, "logits and targets shapes differ");
  require(logits.rows() > 0, ErrorCode::InvalidArgument, "empty batch");
  require(targets.allFinite(), ErrorCode::NonFinite, "non-finite targets");
  Matrix logp = log_softmax(logits);
  const double n = static_cast<double>(logits.rows());
  LossAndGrad out;
  out.loss = -(targets.array() * logp.array()).sum() / n;
  out.grad = (logp.array().exp() - targets.array()) / n;
  return out;
}

Optimizer::Optimizer(SgdConfig cfg) : cfg_(cfg) {
  require(cfg.lr > 0.0, ErrorCode::InvalidArgument, "learning rate must be positive");
}

Optimizer::Optimizer(AdamWConfig cfg) : cfg_(cfg) {
  require(cfg.lr > 0.0, ErrorCode::InvalidArgument, "learning rate must be positive");
}

double Optimizer::lr() const {
  return std::visit([](const auto& c) { return c.lr; }, cfg_);
}

void Optimizer::set_lr(double lr) {
  require(lr > 0.0, ErrorCode::InvalidArgument, "learning rate must be positive");
  std::visit([lr](auto& c) { c.lr = lr; }, cfg_);
}

void Optimizer::ensure_buffers(std::span<const ParamSlot> params) {
  if (first_.empty()) {
    for (const auto& p : params) {
      first_.emplace_back(p.value.size(), 0.0);
      second_.emplace_back(std::holds_alternative<AdamWConfig>(cfg_) ? p.value.size() : 0, 0.0);
    }
  }
  require(first_.size() == params.size(), ErrorCode::ShapeMismatch,
          "optimizer state does not match the parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(first_[i].size() == params[i].value.size() &&
                params[i].grad.size() == params[i].value.size(),
            ErrorCode::ShapeMismatch, "parameter/moment shape mismatch");
  }
}

void Optimizer::step(std::span<const ParamSlot> params) {
  ensure_buffers(params);
  ++steps_;
  if (const auto* sgd = std::get_if<SgdConfig>(&cfg_)) {
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto w = params[p].value;
      auto g = params[p].grad;
      auto& v = first_[p];
      for (std::size_t i = 0; i < w.size(); ++i) {
        v[i] = sgd->momentum * v[i] + g[i] + sgd->weight_decay * w[i];
        w[i] -= sgd->lr * v[i];
      }
    }
    return;
  }
  const auto& a = std::get<AdamWConfig>(cfg_);
  const double bc1 = 1.0 - std::pow(a.beta1, static_cast<double>(steps_));
  const double bc2 = 1.0 - std::pow(a.beta2, static_cast<double>(steps_));
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto w = params[p].value;
    auto g = params[p].grad;
    auto& m = first_[p];
    auto& v = second_[p];
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = a.beta1 * m[i] + (1.0 - a.beta1) * g[i];
      v[i] = a.beta2 * v[i] + (1.0 - a.beta2) * g[i] * g[i];
      w[i] -= a.lr * a.weight_decay * w[i];
      w[i] -= a.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + a.eps);
    }
  }
}

double sample_beta(double a, double b, Rng& rng) {
  require(a > 0.0 && b > 0.0, ErrorCode::InvalidArgument, "beta parameters must be positive");
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

MixupResult mixup_with_lambda(const Matrix& batch_a, const Matrix& targets_a, const Matrix& batch_b,
                              const Matrix& targets_b, double lambda) {
  require(batch_a.rows() == batch_b.rows() && batch_a.cols() == batch_b.cols() &&
              targets_a.rows() == targets_b.rows() && targets_a.cols() == targets_b.cols() &&
              batch_a.rows() == targets_a.rows(),
          ErrorCode::ShapeMismatch, "mixup operands must share shapes");
  MixupResult out;
  out.lambda = lambda;
  out.features = lambda * batch_a + (1.0 - lambda) * batch_b;
  out.targets = lambda * targets_a + (1.0 - lambda) * targets_b;
  return out;
}

MixupResult mixup(const Matrix& batch_a, const Matrix& targets_a, const Matrix& batch_b,
                  const Matrix& targets_b, double alpha, Rng& rng) {
  require(alpha > 0.0, ErrorCode::InvalidArgument, "mixup alpha must be positive");
  return mixup_with_lambda(batch_a, targets_a, batch_b, targets_b, sample_beta(alpha, alpha, rng));
}

namespace {

void write_le(std::ofstream& out, std::span<const double> values) {
  for (double v : values) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  }
}

void read_le(std::ifstream& in, std::span<double> values) {
  for (double& v : values) {
    std::uint64_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), sizeof bits);
    require(static_cast<bool>(in), ErrorCode::Io, "checkpoint blob is truncated");
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    v = std::bit_cast<double>(bits);
  }
}

template <typename M>
std::span<const double> cspan(const M& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

template <typename M>
std::span<double> mspan(M& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

std::filesystem::path with_ext(const std::filesystem::path& prefix, const char* ext) {
  auto p = prefix;
  p += ext;
  return p;
}

}  // namespace

void save_checkpoint(const Mlp& net, const std::filesystem::path& prefix) {
  if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
  nlohmann::json layers = nlohmann::json::array();
  std::size_t doubles = 0;
  for (const auto& layer : net.layers()) {
    if (const auto* d = std::get_if<Dense>(&layer)) {
      layers.push_back({{"type", "dense"}, {"in", d->in_dim()}, {"out", d->out_dim()}});
      doubles += static_cast<std::size_t>(d->weight.size() + d->bias.size());
    } else if (const auto* bn = std::get_if<BatchNorm>(&layer)) {
      layers.push_back({{"type", "batchnorm"},
                        {"dim", bn->dim()},
                        {"momentum", bn->momentum},
                        {"eps", bn->eps}});
      doubles += static_cast<std::size_t>(4 * bn->dim());
    } else {
      layers.push_back({{"type", "relu"}, {"dim", std::get<Relu>(layer).dim}});
    }
  }
  const auto blob = with_ext(prefix, ".bin");
  nlohmann::json manifest = {{"format", "splitnet-mlp-v1"},
                             {"layers", layers},
                             {"blob", blob.filename().string()},
                             {"doubles", doubles}};
  std::ofstream js(with_ext(prefix, ".json"));
  require(static_cast<bool>(js), ErrorCode::Io, "cannot write checkpoint manifest");
  js << manifest.dump(2) << '\n';

  std::ofstream out(blob, std::ios::binary);
  require(static_cast<bool>(out), ErrorCode::Io, "cannot write checkpoint blob");
  for (const auto& layer : net.layers()) {
    if (const auto* d = std::get_if<Dense>(&layer)) {
      write_le(out, cspan(d->weight));
      write_le(out, cspan(d->bias));
    } else if (const auto* bn = std::get_if<BatchNorm>(&layer)) {
      write_le(out, cspan(bn->gamma));
      write_le(out, cspan(bn->beta));
      write_le(out, cspan(bn->running_mean));
      write_le(out, cspan(bn->running_var));
    }
  }
  require(static_cast<bool>(out), ErrorCode::Io, "failed writing checkpoint blob");
}

Mlp load_checkpoint(const std::filesystem::path& prefix) {
  std::ifstream js(with_ext(prefix, ".json"));
  require(static_cast<bool>(js), ErrorCode::Io, "missing checkpoint manifest " + prefix.string());
  nlohmann::json manifest;
  try {
    js >> manifest;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Io, std::string("malformed checkpoint manifest: ") + e.what());
  }
  require(manifest.value("format", "") == "splitnet-mlp-v1", ErrorCode::Io,
          "unsupported checkpoint format");

  std::vector<Layer> layers;
  std::size_t doubles = 0;
  for (const auto& l : manifest.at("layers")) {
    const auto type = l.at("type").get<std::string>();
    if (type == "dense") {
      layers.emplace_back(Dense(l.at("in").get<int>(), l.at("out").get<int>()));
      doubles += static_cast<std::size_t>(l.at("in").get<int>() + 1) * l.at("out").get<std::size_t>();
    } else if (type == "batchnorm") {
      layers.emplace_back(
          BatchNorm(l.at("dim").get<int>(), l.at("momentum").get<double>(), l.at("eps").get<double>()));
      doubles += 4 * l.at("dim").get<std::size_t>();
    } else if (type == "relu") {
      layers.emplace_back(Relu{l.at("dim").get<int>()});
    } else {
      fail(ErrorCode::Io, "unknown layer type '" + type + "' in checkpoint");
    }
  }
  require(doubles == manifest.at("doubles").get<std::size_t>(), ErrorCode::Io,
          "checkpoint manifest parameter count is inconsistent");
  Mlp net(std::move(layers));

  const auto blob = with_ext(prefix, ".bin");
  require(std::filesystem::exists(blob) &&
              std::filesystem::file_size(blob) == doubles * sizeof(double),
          ErrorCode::Io, "checkpoint blob size does not match the manifest");
  std::ifstream in(blob, std::ios::binary);
  for (auto& layer : net.layers()) {
    if (auto* d = std::get_if<Dense>(&layer)) {
      read_le(in, mspan(d->weight));
      read_le(in, mspan(d->bias));
    } else if (auto* bn = std::get_if<BatchNorm>(&layer)) {
      read_le(in, mspan(bn->gamma));
      read_le(in, mspan(bn->beta));
      read_le(in, mspan(bn->running_mean));
      read_le(in, mspan(bn->running_var));
      require((bn->running_var.array() >= 0.0).all(), ErrorCode::Io,
              "checkpoint has negative running variance");
    }
  }
  net.set_mode(Mode::Eval);
  return net;
}

}  // namespace splitnet
