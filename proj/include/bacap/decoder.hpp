#pragma once

#include "bacap/cells.hpp"
#include "bacap/tokens.hpp"

namespace bacap {

struct DecoderParams {
  GruParams gru;
  Mat W_w;  // [E x N] word embeddings, one column per vocabulary id
  Mat W_p;  // [N x H] output projection to vocabulary logits

  Index word_dim() const { return W_w.rows(); }
  Index vocab_size() const { return W_w.cols(); }
  Index hidden_dim() const { return gru.hidden_dim(); }
  Index video_dim() const { return gru.video_dim(); }
};

DecoderParams zeros_like(const DecoderParams& p);
std::vector<TensorRef> tensor_refs(DecoderParams& p);
void append_tensor_refs(DecoderParams& p, const std::string& prefix, std::vector<TensorRef>& out);

// Softmax over the vocabulary logits W_p p_t, computed stably.
Vec word_distribution(const DecoderParams& p, const Vec& p_t);

struct DecodeCache {
  std::vector<GruStepCache> steps;
  std::vector<Vec> probs;     // per-step output distribution
  std::vector<Vec> p_states;  // p_t after each step
  std::vector<int> inputs;    // teacher-forced input id at each step
  std::vector<int> targets;   // gold id scored at each step
};

struct CaptionLossOut {
  double loss = 0.0;  // summed negative log-likelihood over the caption
  DecodeCache cache;
};

// Teacher-forced negative log-likelihood of `caption` given the video vector.
// The caption must start with BOS, end with EOS, and contain at least one
// prediction step.
CaptionLossOut caption_loss(const DecoderParams& p, const Vec& v, const CaptionTokens& caption);

// Accumulates decoder gradients for `scale * loss` and returns the gradient
// w.r.t. the video vector.
Vec caption_loss_backward(const DecoderParams& p, const DecodeCache& cache, double scale,
                          DecoderParams& grad);

// Greedy argmax decoding from BOS until EOS or max_len predicted tokens. UNK
// is never produced; logit ties resolve to the lowest id.
CaptionTokens greedy_decode(const DecoderParams& p, const Vec& v, int max_len);

}  // namespace bacap
