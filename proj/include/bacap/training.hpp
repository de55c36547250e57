#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bacap/data.hpp"
#include "bacap/metrics.hpp"
#include "bacap/model.hpp"

namespace bacap {

enum class Phase { kTrain, kTest };

// Inverted dropout: at train time entries are kept with probability `retain`
// and scaled by 1/retain; at test time the input passes through unchanged and
// no random numbers are consumed.
Vec apply_dropout(const Vec& x, double retain, Rng& rng, Phase phase);

struct AdadeltaConfig {
  double rho = 0.95;
  double eps = 1e-6;
  double lr = 1.0;
};

// Per-coordinate running averages, same shapes as the model.
struct OptimizerState {
  ModelParams grad_sq;    // E[g^2]
  ModelParams update_sq;  // E[dx^2]
};

OptimizerState make_optimizer_state(const ModelParams& model);

// One Adadelta update. A non-finite gradient coordinate raises NumericError
// before any parameter or accumulator changes.
void adadelta_step(const AdadeltaConfig& cfg, OptimizerState& state, ModelParams& params,
                   ModelParams& grads);

struct TrainConfig {
  Index batch_size = 128;
  double dropout_retain = 0.5;
  int max_epochs = 100;
  int patience = 5;  // epochs without validation improvement before stopping
  std::uint64_t seed = 0;
  AdadeltaConfig adadelta;
};

struct EpochEntry {
  int epoch = 0;
  double train_loss = 0.0;  // mean per-caption training loss, sampled boundaries
  double val_loss = 0.0;    // mean per-caption validation loss, deterministic
};

struct TrainResult {
  ModelParams best_model;
  OptimizerState best_state;
  int best_epoch = 0;  // 0 marks the untrained baseline
  double best_val_loss = 0.0;
  std::vector<EpochEntry> log;
};

// Mini-batch training with sampled boundary decisions and dropout; batch
// gradients are means over the batch. Validation runs after every epoch with
// deterministic boundaries and no dropout; the best model (and its optimizer
// state) is kept, starting from the untrained baseline.
TrainResult train(const ModelParams& init, const TrainConfig& cfg,
                  const std::vector<Sample>& train_set, const std::vector<Sample>& val_set);

// Mean per-caption loss with deterministic boundaries and no dropout.
double mean_caption_loss(const ModelParams& m, const std::vector<Sample>& samples);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
};

// Compares analytic gradients against central finite differences on one
// sample. The frozen variant samples boundary decisions once (from `seed`)
// and holds them fixed, so the loss is smooth and the surrogate gradient of
// the detector must vanish; the soft variant uses the continuous relaxation,
// where the detector gradient is exact.
GradCheckResult grad_check_frozen(const ModelParams& m, const Sample& sample, std::uint64_t seed,
                                  double eps = 1e-5);
GradCheckResult grad_check_soft(const ModelParams& m, const Sample& sample, double eps = 1e-5);

// Greedy-decodes every sample and pairs it with its tokenized reference.
EvalCorpus build_eval_corpus(const ModelParams& m, const Vocabulary& vocab,
                             const std::vector<Sample>& samples, int max_len);

}  // namespace bacap
