#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "bacap/cells.hpp"

namespace bacap {

// A video as an ordered list of per-timestep feature vectors.
struct FeatureSequence {
  std::string id;
  std::vector<Vec> frames;

  Index length() const { return static_cast<Index>(frames.size()); }
  Index dim() const { return frames.empty() ? 0 : frames.front().size(); }
};

struct EncoderParams {
  Mat W_embed;  // [E x F] linear input embedding
  Vec b_embed;  // [E]
  LstmParams layer1;
  BoundaryParams boundary;
  LstmParams layer2;  // consumes segment summaries; no detector

  Index feature_dim() const { return W_embed.cols(); }
  Index embed_dim() const { return W_embed.rows(); }
  Index hidden_dim() const { return layer1.hidden_dim(); }
  Index video_dim() const { return layer2.hidden_dim(); }
};

EncoderParams zeros_like(const EncoderParams& p);
std::vector<TensorRef> tensor_refs(EncoderParams& p);
void append_tensor_refs(EncoderParams& p, const std::string& prefix, std::vector<TensorRef>& out);

// How the boundary decisions of layer 1 are produced.
struct BoundaryMode {
  enum class Kind { kLearnedTrain, kLearnedTest, kForced, kEqualChunks };
  Kind kind = Kind::kLearnedTest;
  std::vector<int> forced;  // kForced: one 0/1 decision per timestep
  Index chunks = 0;         // kEqualChunks

  static BoundaryMode learned_train() { return {Kind::kLearnedTrain, {}, 0}; }
  static BoundaryMode learned_test() { return {Kind::kLearnedTest, {}, 0}; }
  static BoundaryMode forced_list(std::vector<int> s) {
    return {Kind::kForced, std::move(s), 0};
  }
  static BoundaryMode equal_chunks(Index m) { return {Kind::kEqualChunks, {}, m}; }
};

// Forced decisions for splitting n steps into m contiguous chunks whose
// lengths differ by at most one: boundaries at ceil(k*n/m)+1, k=1..m-1.
std::vector<int> equal_chunk_decisions(Index n, Index m);

struct EncodeResult {
  Vec video_vector;            // final hidden state of layer 2
  std::vector<Vec> summaries;  // segment summaries consumed by layer 2
  std::vector<Index> boundaries;  // 1-based timesteps where the detector fired
  std::vector<double> per_step_logits;

  Index length() const { return static_cast<Index>(per_step_logits.size()); }
};

// Dropout hooks used at training time; defaults leave the pass deterministic.
struct EncodeOptions {
  double input_retain = 1.0;    // on the embedded inputs of layer 1
  double summary_retain = 1.0;  // on the summaries entering layer 2
};

struct EncodeCache {
  std::vector<Vec> frames;    // raw inputs
  std::vector<Vec> embedded;  // W_embed x + b, before dropout
  std::vector<Vec> input_mask;
  std::vector<BoundaryStepCache> layer1;
  std::vector<Vec> summaries_raw;  // emissions before dropout, closing included
  std::vector<Vec> summary_mask;
  std::vector<LstmStepCache> layer2;
  // For summary j: the 1-based timestep whose decision emitted it; n+1 marks
  // the closing emission of h_n.
  std::vector<Index> summary_step;
  bool soft = false;
};

struct EncodeOutput {
  EncodeResult result;
  EncodeCache cache;
};

std::vector<Vec> embed_input(const EncoderParams& p, const FeatureSequence& f);

// Runs the boundary-aware layer over the embedded frames, collects emissions
// as segment summaries (the final hidden state is always appended as the
// closing summary), and encodes the summaries with layer 2.
EncodeOutput encode(const EncoderParams& p, const FeatureSequence& f, const BoundaryMode& mode,
                    Rng* rng = nullptr, const EncodeOptions& opts = {});

// Continuous relaxation used by gradient checking: every step emits
// s_t * h_{t-1} with s_t = sigmoid(logit_t); carries are scaled by 1 - s_t.
EncodeOutput encode_soft(const EncoderParams& p, const FeatureSequence& f,
                         const EncodeOptions& opts = {});

// Accumulates encoder gradients for an upstream gradient on the video vector.
void encode_backward(const EncoderParams& p, const EncodeCache& cache, const Vec& d_video,
                     EncoderParams& grad);

struct BoundaryStats {
  std::vector<std::int64_t> count_histogram;  // index = number of detected boundaries
  std::array<std::int64_t, 100> position_histogram{};  // over t/n in [0,1)
};

// Histograms of detected boundary counts and relative positions; closing
// emissions are not detector activations and are excluded by construction.
BoundaryStats boundary_statistics(const std::vector<EncodeResult>& results);

}  // namespace bacap
