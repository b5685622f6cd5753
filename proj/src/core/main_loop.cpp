#include "core/main_loop.hpp"

#include <cmath>
#include <numeric>

namespace splitnet {

void LoopConfig::validate() const {
  require(beta2 > 0.0 && beta2 <= beta1 && beta1 <= 1.0, ErrorCode::InvalidArgument,
          "thresholds need 0 < beta2 <= beta1 <= 1");
  require(tau_label > 0.0 && tau_label <= 1.0, ErrorCode::InvalidArgument,
          "tau_label must lie in (0, 1]");
  require(pivot > 0.0 && pivot < 1.0, ErrorCode::InvalidArgument, "pivot must lie in (0, 1)");
  require(epochs >= 0, ErrorCode::InvalidArgument, "epochs must be >= 0");
  require(lr > 0.0 && lr_decay > 0.0, ErrorCode::InvalidArgument, "learning rate must be positive");
  require(batch_size >= 2, ErrorCode::InvalidArgument, "batch size must be >= 2");
  require(!fixed_threshold || (*fixed_threshold >= 0.0 && *fixed_threshold <= 1.0),
          ErrorCode::InvalidArgument, "fixed threshold must lie in [0, 1]");
}

int LoopConfig::decay_epoch() const {
  return lr_decay_epoch >= 0 ? lr_decay_epoch
                             : static_cast<int>(std::lround(2.0 * epochs / 3.0));
}

double LoopConfig::lr_at(int epoch) const { return epoch < decay_epoch() ? lr : lr * lr_decay; }

PseudoLabels make_pseudo_labels(const Mlp& net, const Matrix& weak_batch) {
  Matrix p = softmax(net.predict(weak_batch));
  PseudoLabels out;
  out.label.resize(static_cast<std::size_t>(p.rows()));
  out.confidence.resize(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const int c = argmax_row(p, i);
    out.label[static_cast<std::size_t>(i)] = c;
    out.confidence[static_cast<std::size_t>(i)] = p(i, c);
  }
  return out;
}

PseudoLabels make_pseudo_labels(const Mlp& net, const Matrix& batch, const Augmenter& augment,
                                Rng& rng) {
  return make_pseudo_labels(net, augment.weak_batch(batch, rng));
}

double dynamic_threshold(const SplitScore& score, double beta1, double beta2) {
  const double conf = score.confidence();
  return (1.0 - conf) * beta1 + conf * beta2;
}

ConsistencyTerm consistency_term(const Matrix& strong_logits, const PseudoLabels& q,
                                 std::span<const double> thresholds) {
  const auto n = static_cast<std::size_t>(strong_logits.rows());
  require(q.label.size() == n && thresholds.size() == n, ErrorCode::ShapeMismatch,
          "pseudo-labels, thresholds and logits must align");
  ConsistencyTerm out;
  out.mask.assign(n, false);
  out.grad = Matrix::Zero(strong_logits.rows(), strong_logits.cols());
  if (n == 0) return out;
  Matrix logp = log_softmax(strong_logits);
  const double denom = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (q.confidence[i] < thresholds[i]) continue;
    const auto row = static_cast<Eigen::Index>(i);
    out.mask[i] = true;
    ++out.mask_count;
    out.loss -= logp(row, q.label[i]);
    out.grad.row(row) = logp.row(row).array().exp() / denom;
    out.grad(row, q.label[i]) -= 1.0 / denom;
  }
  out.loss /= denom;
  return out;
}

ConsistencyTerm unsupervised_loss(Mlp& net, const Matrix& batch, std::span<const SplitScore> scores,
                                  const Augmenter& augment, double beta1, double beta2, Rng& rng) {
  require(scores.size() == static_cast<std::size_t>(batch.rows()), ErrorCode::ShapeMismatch,
          "one split score per batch row is required");
  PseudoLabels q = make_pseudo_labels(net, batch, augment, rng);
  Matrix strong = augment.strong_batch(batch, rng);
  std::vector<double> thresholds(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    thresholds[i] = dynamic_threshold(scores[i], beta1, beta2);
  }
  return consistency_term(net.forward(strong), q, thresholds);
}

std::vector<std::size_t> clean_set(std::span<const SplitScore> scores, double tau_label) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (scores[i].clean >= tau_label) out.push_back(i);
  }
  return out;
}

CombinedLoss total_loss(double loss_clean, double loss_unlabeled, std::size_t clean_count,
                        std::size_t n) {
  require(n > 0 && clean_count <= n, ErrorCode::InvalidArgument, "need 0 <= |C| <= N, N > 0");
  CombinedLoss out;
  out.eta = static_cast<double>(clean_count) / static_cast<double>(n);
  out.loss = clean_count == 0 ? loss_unlabeled
                              : out.eta * loss_clean + (1.0 - out.eta) * loss_unlabeled;
  return out;
}

std::vector<SplitScore> gmm_hard_scores(std::span<const double> w) {
  std::vector<SplitScore> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    out[i] = w[i] >= 0.5 ? SplitScore{1.0, 0.0} : SplitScore{0.0, 1.0};
  }
  return out;
}

std::vector<SplitScore> gmm_soft_scores(std::span<const double> w) {
  std::vector<SplitScore> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = {w[i], 1.0 - w[i]};
  return out;
}

LoopOutcome run_training(Mlp& net, const TrainingSet& data, const Augmenter& augment,
                         const LoopConfig& cfg, std::uint64_t seed, const EpochObserver& observer,
                         LoopAudit* audit) {
  cfg.validate();
  require(net.input_dim() == data.features.cols() && net.output_dim() == data.num_classes,
          ErrorCode::ShapeMismatch, "main network does not match the dataset");
  const std::size_t n = data.size();
  const int r = data.num_classes;

  Rng rng(seed);
  Optimizer opt(SgdConfig{cfg.lr, cfg.momentum, cfg.weight_decay});
  SplitNetModel splitter(r, cfg.splitnet, splitmix64(seed ^ static_cast<std::uint64_t>(Stage::SplitNetInit)));
  PredictionHistory history(n, r);
  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), std::size_t{0});

  LoopOutcome outcome;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // 1. Clean posterior from the loss distribution.
    net.set_mode(Mode::Eval);
    Vector losses = per_sample_losses(net, data);
    history.push(softmax(net.predict(data.features)));
    Vector normalized = normalize_losses(losses);
    GmmParams gmm = fit_gmm_1d(as_span(normalized), cfg.gmm_tol, cfg.gmm_max_iter,
                               splitmix64(seed + static_cast<std::uint64_t>(epoch)));
    Vector w = clean_posterior(gmm, as_span(normalized));

    // 2. Risk hedging. The spread factor stays in [0, 1] because w does.
    PosteriorStats stats = hedge_stats(as_span(w));
    ThresholdPair thresholds = compute_thresholds(stats.mean, stats.variance, cfg.pivot);
    require(thresholds.spread_factor >= 0.0 && thresholds.spread_factor <= 1.0, ErrorCode::Internal,
            "P(sigma) left [0, 1]");

    HedgedSet hedged;
    bool trained_now = false;
    std::vector<SplitScore> scores;
    if (cfg.score_source == ScoreSource::SplitNet) {
      hedged = cfg.hedging ? select_hedged_set(as_span(w), data.labels, thresholds)
                           : label_all(as_span(w), 0.5);
      Matrix inputs = build_input(history, data.labels, cfg.splitnet.use_delta);
      auto result = train_splitnet(splitter, hedged, inputs, cfg.splitnet.epochs,
                                   cfg.splitnet.batch_size, rng);
      trained_now = result == SplitTrainOutcome::Trained;
      if (!trained_now) ++outcome.splitnet_skips;
      // 3. Score every sample; fall back to the hard GMM split until a
      // SplitNet has been trained at least once.
      scores = splitter.trained() ? split_scores(splitter, inputs) : gmm_hard_scores(as_span(w));
    } else {
      scores = gmm_soft_scores(as_span(w));
    }

    // 4. Semi-supervised epoch on eta L_C + (1 - eta) L_U.
    const auto clean = clean_set(scores, cfg.tau_label);
    std::vector<bool> in_clean(n, false);
    for (auto i : clean) in_clean[i] = true;
    const double eta = total_loss(0.0, 0.0, clean.size(), n).eta;
    std::vector<double> sample_threshold(n);
    for (std::size_t i = 0; i < n; ++i) {
      sample_threshold[i] = cfg.fixed_threshold
                                ? *cfg.fixed_threshold
                                : dynamic_threshold(scores[i], cfg.beta1, cfg.beta2);
    }

    std::vector<std::size_t>* read_log = nullptr;
    if (audit) {
      audit->clean_sets.push_back(clean);
      audit->supervised_reads.emplace_back();
      read_log = &audit->supervised_reads.back();
    }
    LabelView labels(data.labels, read_log);

    opt.set_lr(cfg.lr_at(epoch));
    std::vector<int> pseudo(n, -1);
    std::vector<bool> mask(n, false);
    std::size_t mask_count = 0;
    double loss_total = 0.0;
    std::size_t batches = 0;
    for (const auto& batch : make_batches(all, static_cast<std::size_t>(cfg.batch_size), rng)) {
      Matrix x = gather_rows(data.features, batch);
      Matrix weak = augment.weak_batch(x, rng);
      Matrix strong = augment.strong_batch(x, rng);
      PseudoLabels q = make_pseudo_labels(net, weak);

      std::vector<std::size_t> sup_rows;
      for (std::size_t b = 0; b < batch.size(); ++b) {
        if (in_clean[batch[b]]) sup_rows.push_back(b);
      }
      std::vector<int> sup_labels(sup_rows.size());
      for (std::size_t k = 0; k < sup_rows.size(); ++k) sup_labels[k] = labels[batch[sup_rows[k]]];

      const auto ns = static_cast<Eigen::Index>(sup_rows.size());
      const auto nu = static_cast<Eigen::Index>(batch.size());
      Matrix stacked(ns + nu, x.cols());
      for (Eigen::Index k = 0; k < ns; ++k) stacked.row(k) = weak.row(static_cast<Eigen::Index>(sup_rows[static_cast<std::size_t>(k)]));
      stacked.bottomRows(nu) = strong;

      net.set_mode(Mode::Train);
      Matrix logits = net.forward(stacked);

      std::vector<double> thr(batch.size());
      for (std::size_t b = 0; b < batch.size(); ++b) thr[b] = sample_threshold[batch[b]];
      ConsistencyTerm lu = consistency_term(logits.bottomRows(nu), q, thr);

      Matrix grad = Matrix::Zero(logits.rows(), logits.cols());
      double lc = 0.0;
      if (ns > 0) {
        auto sup = softmax_cross_entropy(logits.topRows(ns), one_hot(sup_labels, r));
        lc = sup.loss;
        grad.topRows(ns) = eta * sup.grad;
      }
      grad.bottomRows(nu) = (1.0 - eta) * lu.grad;
      loss_total += total_loss(lc, lu.loss, ns > 0 ? clean.size() : 0, n).loss;
      net.backward(grad);
      auto params = net.parameters();
      opt.step(params);

      for (std::size_t b = 0; b < batch.size(); ++b) {
        pseudo[batch[b]] = q.label[b];
        mask[batch[b]] = lu.mask[b];
      }
      mask_count += lu.mask_count;
      ++batches;
    }
    net.set_mode(Mode::Eval);

    if (observer) {
      EpochState st;
      st.epoch = epoch;
      st.lr = cfg.lr_at(epoch);
      st.losses = &losses;
      st.normalized = &normalized;
      st.w = &w;
      st.gmm = &gmm;
      st.thresholds = thresholds;
      st.hedged = &hedged;
      st.hedged_clean = hedged.clean_count;
      st.hedged_noisy = hedged.noisy_count;
      st.splitnet_trained_this_epoch = trained_now;
      st.scores = &scores;
      st.clean_count = clean.size();
      st.eta = eta;
      st.pseudo_label = &pseudo;
      st.pseudo_mask = &mask;
      st.mask_count = mask_count;
      st.mean_loss = batches ? loss_total / static_cast<double>(batches) : 0.0;
      st.net = &net;
      observer(st);
    }
  }
  return outcome;
}

}  // namespace splitnet
