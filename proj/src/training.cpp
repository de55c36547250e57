#include "bacap/training.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

namespace bacap {

Vec apply_dropout(const Vec& x, double retain, Rng& rng, Phase phase) {
  if (!(retain > 0.0 && retain <= 1.0)) {
    throw std::invalid_argument("apply_dropout: retain must be in (0, 1]");
  }
  if (phase == Phase::kTest) return x;
  return dropout_mask(x.size(), retain, rng).cwiseProduct(x);
}

OptimizerState make_optimizer_state(const ModelParams& model) {
  return OptimizerState{zeros_like(model), zeros_like(model)};
}

void adadelta_step(const AdadeltaConfig& cfg, OptimizerState& state, ModelParams& params,
                   ModelParams& grads) {
  const std::vector<TensorRef> g = tensor_refs(grads);
  for (const TensorRef& r : g) {
    const double* d = r.data();
    for (Index i = 0; i < r.size(); ++i) {
      if (!std::isfinite(d[i])) {
        throw NumericError("adadelta_step: non-finite gradient in " + r.name);
      }
    }
  }

  const std::vector<TensorRef> p = tensor_refs(params);
  const std::vector<TensorRef> eg = tensor_refs(state.grad_sq);
  const std::vector<TensorRef> ed = tensor_refs(state.update_sq);
  for (std::size_t k = 0; k < p.size(); ++k) {
    double* pv = p[k].data();
    const double* gv = g[k].data();
    double* egv = eg[k].data();
    double* edv = ed[k].data();
    for (Index i = 0; i < p[k].size(); ++i) {
      egv[i] = cfg.rho * egv[i] + (1.0 - cfg.rho) * gv[i] * gv[i];
      const double dx =
          -cfg.lr * std::sqrt(edv[i] + cfg.eps) / std::sqrt(egv[i] + cfg.eps) * gv[i];
      edv[i] = cfg.rho * edv[i] + (1.0 - cfg.rho) * dx * dx;
      pv[i] += dx;
    }
  }
}

double mean_caption_loss(const ModelParams& m, const std::vector<Sample>& samples) {
  if (samples.empty()) throw std::invalid_argument("mean_caption_loss: no samples");
  double sum = 0.0;
  for (const Sample& s : samples) {
    sum += model_forward(m, s.features, s.caption, BoundaryMode::learned_test()).loss;
  }
  return sum / static_cast<double>(samples.size());
}

TrainResult train(const ModelParams& init, const TrainConfig& cfg,
                  const std::vector<Sample>& train_set, const std::vector<Sample>& val_set) {
  if (train_set.empty() || val_set.empty()) {
    throw std::invalid_argument("train: train and validation sets must be non-empty");
  }
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (cfg.max_epochs < 0 || cfg.patience < 0) {
    throw std::invalid_argument("train: max_epochs and patience must be >= 0");
  }

  ModelParams model = init;
  OptimizerState state = make_optimizer_state(model);
  Rng rng(cfg.seed);
  const EncodeOptions dropout{cfg.dropout_retain, cfg.dropout_retain};

  TrainResult result;
  result.best_model = model;
  result.best_state = state;
  result.best_epoch = 0;
  result.best_val_loss = mean_caption_loss(model, val_set);

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  int epochs_without_improvement = 0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    // Fisher-Yates, pinned to our generator so runs are reproducible.
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(order[i - 1], order[j]);
    }

    double epoch_loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      ModelParams grads = zeros_like(model);
      const double scale = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) {
        const Sample& s = train_set[order[k]];
        Rng sample_rng(rng.fork_seed());
        ModelForward fwd = model_forward(model, s.features, s.caption,
                                         BoundaryMode::learned_train(), &sample_rng, dropout);
        if (!std::isfinite(fwd.loss)) {
          throw NumericError("train: non-finite loss on sample '" + s.id + "'");
        }
        epoch_loss_sum += fwd.loss;
        model_backward(model, fwd, scale, grads);
      }
      adadelta_step(cfg.adadelta, state, model, grads);
    }

    EpochEntry entry;
    entry.epoch = epoch;
    entry.train_loss = epoch_loss_sum / static_cast<double>(train_set.size());
    entry.val_loss = mean_caption_loss(model, val_set);
    result.log.push_back(entry);

    if (entry.val_loss < result.best_val_loss) {
      result.best_val_loss = entry.val_loss;
      result.best_model = model;
      result.best_state = state;
      result.best_epoch = epoch;
      epochs_without_improvement = 0;
    } else {
      ++epochs_without_improvement;
      if (epochs_without_improvement > cfg.patience) break;
    }
  }
  return result;
}

namespace {

GradCheckResult compare_grads(ModelParams& analytic, ModelParams& numeric) {
  GradCheckResult out;
  const std::vector<TensorRef> a = tensor_refs(analytic);
  const std::vector<TensorRef> n = tensor_refs(numeric);
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double* av = a[k].data();
    const double* nv = n[k].data();
    for (Index i = 0; i < a[k].size(); ++i) {
      const double e = rel_error(av[i], nv[i]);
      if (e > out.max_rel_error) {
        out.max_rel_error = e;
        out.worst_tensor = a[k].name;
      }
    }
  }
  return out;
}

}  // namespace

GradCheckResult grad_check_frozen(const ModelParams& m, const Sample& sample, std::uint64_t seed,
                                  double eps) {
  // Sample the boundary decisions once, then hold them fixed so the loss is a
  // smooth function of the parameters.
  Rng rng(seed);
  const ModelForward probe =
      model_forward(m, sample.features, sample.caption, BoundaryMode::learned_train(), &rng);
  std::vector<int> decisions;
  decisions.reserve(probe.enc_cache.layer1.size());
  for (const BoundaryStepCache& c : probe.enc_cache.layer1) {
    decisions.push_back(static_cast<int>(c.s));
  }
  const BoundaryMode mode = BoundaryMode::forced_list(decisions);

  ModelParams analytic = zeros_like(m);
  model_backward(m, model_forward(m, sample.features, sample.caption, mode), 1.0, analytic);

  ModelParams numeric = finite_diff_grad<ModelParams>(
      [&](const ModelParams& p) {
        return model_forward(p, sample.features, sample.caption, mode).loss;
      },
      m, eps);
  return compare_grads(analytic, numeric);
}

GradCheckResult grad_check_soft(const ModelParams& m, const Sample& sample, double eps) {
  ModelParams analytic = zeros_like(m);
  model_backward(m, model_forward_soft(m, sample.features, sample.caption), 1.0, analytic);

  ModelParams numeric = finite_diff_grad<ModelParams>(
      [&](const ModelParams& p) { return model_forward_soft(p, sample.features, sample.caption).loss; },
      m, eps);
  return compare_grads(analytic, numeric);
}

EvalCorpus build_eval_corpus(const ModelParams& m, const Vocabulary& vocab,
                             const std::vector<Sample>& samples, int max_len) {
  EvalCorpus corpus;
  for (const Sample& s : samples) {
    EncodeOutput enc = encode(m.encoder, s.features, BoundaryMode::learned_test());
    const CaptionTokens decoded = greedy_decode(m.decoder, enc.result.video_vector, max_len);
    EvalEntry entry;
    entry.candidate = words_of(vocab, decoded);
    entry.references.push_back(tokenize(s.caption_text));
    corpus[s.id] = std::move(entry);
  }
  return corpus;
}

}  // namespace bacap
