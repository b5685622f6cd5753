#include "core/split_model.hpp"

namespace splitnet {

PredictionHistory::PredictionHistory(std::size_t n, int num_classes)
    : current(Matrix::Zero(static_cast<Eigen::Index>(n), num_classes)),
      previous(Matrix::Zero(static_cast<Eigen::Index>(n), num_classes)) {}

void PredictionHistory::push(Matrix predictions) {
  require(predictions.rows() == current.rows() && predictions.cols() == current.cols(),
          ErrorCode::ShapeMismatch, "prediction history shape changed");
  previous = std::move(current);
  current = std::move(predictions);
}

Matrix build_input(const PredictionHistory& history, std::span<const int> noisy_labels,
                   bool use_delta) {
  const auto n = history.current.rows();
  const auto r = history.current.cols();
  require(history.previous.rows() == n && history.previous.cols() == r, ErrorCode::ShapeMismatch,
          "current and previous predictions differ in shape");
  require(static_cast<Eigen::Index>(noisy_labels.size()) == n, ErrorCode::ShapeMismatch,
          "label count does not match the prediction history");
  Matrix out = Matrix::Zero(n, 3 * r);
  out.leftCols(r) = history.current;
  if (use_delta) out.middleCols(r, r) = history.current - history.previous;
  out.rightCols(r) = one_hot(noisy_labels, static_cast<int>(r));
  return out;
}

namespace {

MlpSpec splitnet_spec(int num_classes, const SplitNetConfig& cfg) {
  require(cfg.blocks >= 1 && cfg.hidden >= 1, ErrorCode::InvalidArgument,
          "SplitNet needs at least one hidden block");
  MlpSpec spec;
  spec.input_dim = 3 * num_classes;
  spec.hidden.assign(static_cast<std::size_t>(cfg.blocks), cfg.hidden);
  spec.output_dim = 2;
  spec.batch_norm = cfg.batch_norm;
  return spec;
}

Mlp build_splitnet(int num_classes, const SplitNetConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  return Mlp::build(splitnet_spec(num_classes, cfg), rng);
}

}  // namespace

SplitNetModel::SplitNetModel(int num_classes, const SplitNetConfig& cfg, std::uint64_t seed)
    : num_classes_(num_classes), cfg_(cfg), net_(build_splitnet(num_classes, cfg, seed)),
      optimizer_(cfg.optimizer) {
  net_.set_mode(Mode::Eval);
}

SplitTrainOutcome train_splitnet(SplitNetModel& model, const HedgedSet& hedged,
                                 const Matrix& inputs, int epochs, int batch_size, Rng& rng,
                                 std::vector<std::size_t>* access_log) {
  require(inputs.cols() == 3 * model.num_classes(), ErrorCode::ShapeMismatch,
          "SplitNet input width must be 3r");
  require(epochs >= 0 && batch_size >= 2, ErrorCode::InvalidArgument,
          "SplitNet training needs epochs >= 0 and batch size >= 2");
  if (hedged.size() < 2 * kMinHedgedBatch || hedged.clean_count == 0 || hedged.noisy_count == 0) {
    return SplitTrainOutcome::Skipped;
  }
  if (epochs == 0) return SplitTrainOutcome::Trained;

  std::vector<std::size_t> positions(hedged.size());
  for (std::size_t k = 0; k < positions.size(); ++k) positions[k] = k;

  Mlp& net = model.net();
  net.set_mode(Mode::Train);
  for (int e = 0; e < epochs; ++e) {
    for (const auto& batch : make_batches(positions, static_cast<std::size_t>(batch_size), rng)) {
      Matrix x(static_cast<Eigen::Index>(batch.size()), inputs.cols());
      Matrix target = Matrix::Zero(static_cast<Eigen::Index>(batch.size()), 2);
      for (std::size_t b = 0; b < batch.size(); ++b) {
        const auto& entry = hedged.entries[batch[b]];
        require(entry.index < static_cast<std::size_t>(inputs.rows()), ErrorCode::ShapeMismatch,
                "hedged index outside the input matrix");
        if (access_log) access_log->push_back(entry.index);
        x.row(static_cast<Eigen::Index>(b)) = inputs.row(static_cast<Eigen::Index>(entry.index));
        target(static_cast<Eigen::Index>(b), entry.label == SplitLabel::Clean ? 0 : 1) = 1.0;
      }
      auto lg = softmax_cross_entropy(net.forward(x), target);
      net.backward(lg.grad);
      auto params = net.parameters();
      model.optimizer().step(params);
    }
  }
  net.set_mode(Mode::Eval);
  model.mark_trained();
  return SplitTrainOutcome::Trained;
}

std::vector<SplitScore> split_scores(const SplitNetModel& model, const Matrix& inputs) {
  Matrix p = softmax(model.net().predict(inputs));
  std::vector<SplitScore> out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = {p(i, 0), p(i, 1)};
  }
  return out;
}

}  // namespace splitnet
