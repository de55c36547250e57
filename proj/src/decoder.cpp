#include "bacap/decoder.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace bacap {

DecoderParams zeros_like(const DecoderParams& p) {
  DecoderParams z;
  z.gru = zeros_like(p.gru);
  z.W_w = Mat::Zero(p.W_w.rows(), p.W_w.cols());
  z.W_p = Mat::Zero(p.W_p.rows(), p.W_p.cols());
  return z;
}

void append_tensor_refs(DecoderParams& p, const std::string& prefix, std::vector<TensorRef>& out) {
  append_tensor_refs(p.gru, prefix + "gru.", out);
  out.push_back({prefix + "W_w", &p.W_w, nullptr});
  out.push_back({prefix + "W_p", &p.W_p, nullptr});
}

std::vector<TensorRef> tensor_refs(DecoderParams& p) {
  std::vector<TensorRef> out;
  append_tensor_refs(p, "", out);
  return out;
}

namespace {

void check_video_vector(const DecoderParams& p, const Vec& v, const char* where) {
  if (v.size() != p.video_dim()) {
    throw std::invalid_argument(std::string(where) + ": video vector has size " +
                                std::to_string(v.size()) + ", decoder expects " +
                                std::to_string(p.video_dim()));
  }
}

// Returns log(sum(exp(logits))) and fills probs with the softmax.
double softmax_with_logsumexp(const Vec& logits, Vec& probs) {
  const double m = logits.maxCoeff();
  probs = (logits.array() - m).exp().matrix();
  const double z = probs.sum();
  probs /= z;
  return m + std::log(z);
}

}  // namespace

Vec word_distribution(const DecoderParams& p, const Vec& p_t) {
  if (p_t.size() != p.hidden_dim()) {
    throw std::invalid_argument("word_distribution: hidden state has size " +
                                std::to_string(p_t.size()) + ", decoder expects " +
                                std::to_string(p.hidden_dim()));
  }
  Vec probs;
  softmax_with_logsumexp(p.W_p * p_t, probs);
  return probs;
}

CaptionLossOut caption_loss(const DecoderParams& p, const Vec& v, const CaptionTokens& caption) {
  check_video_vector(p, v, "caption_loss");
  const auto& ids = caption.ids;
  if (ids.size() < 2) throw std::invalid_argument("caption_loss: caption needs BOS and EOS");
  if (ids.front() != kBosId) throw std::invalid_argument("caption_loss: caption must start with BOS");
  if (ids.back() != kEosId) throw std::invalid_argument("caption_loss: caption must end with EOS");
  for (int id : ids) {
    if (id < 0 || id >= p.vocab_size()) {
      throw std::invalid_argument("caption_loss: id " + std::to_string(id) +
                                  " outside vocabulary of size " + std::to_string(p.vocab_size()));
    }
  }

  CaptionLossOut out;
  Vec state = Vec::Zero(p.hidden_dim());
  for (std::size_t t = 1; t < ids.size(); ++t) {
    const int input = ids[t - 1];
    const int target = ids[t];
    GruStepOut step = gru_step(p.gru, p.W_w.col(input), v, state);
    state = step.p;
    Vec probs;
    const double lse = softmax_with_logsumexp(p.W_p * state, probs);
    out.loss += lse - (p.W_p.row(target) * state)(0);
    out.cache.steps.push_back(std::move(step.cache));
    out.cache.probs.push_back(std::move(probs));
    out.cache.p_states.push_back(state);
    out.cache.inputs.push_back(input);
    out.cache.targets.push_back(target);
  }
  return out;
}

Vec caption_loss_backward(const DecoderParams& p, const DecodeCache& cache, double scale,
                          DecoderParams& grad) {
  Vec dv = Vec::Zero(p.video_dim());
  Vec dp_next = Vec::Zero(p.hidden_dim());
  for (std::size_t t = cache.steps.size(); t-- > 0;) {
    Vec dlogits = cache.probs[t];
    dlogits[cache.targets[t]] -= 1.0;
    dlogits *= scale;
    grad.W_p.noalias() += dlogits * cache.p_states[t].transpose();
    Vec dp = p.W_p.transpose() * dlogits + dp_next;
    GruStepGradOut g = gru_step_backward(p.gru, cache.steps[t], dp, grad.gru);
    grad.W_w.col(cache.inputs[t]) += g.de;
    dv += g.dv;
    dp_next = std::move(g.dp_prev);
  }
  return dv;
}

CaptionTokens greedy_decode(const DecoderParams& p, const Vec& v, int max_len) {
  check_video_vector(p, v, "greedy_decode");
  if (max_len < 1) throw std::invalid_argument("greedy_decode: max_len must be >= 1");

  CaptionTokens out;
  out.ids.push_back(kBosId);
  Vec state = Vec::Zero(p.hidden_dim());
  int prev = kBosId;
  for (int step = 0; step < max_len; ++step) {
    GruStepOut s = gru_step(p.gru, p.W_w.col(prev), v, state);
    state = std::move(s.p);
    const Vec logits = p.W_p * state;
    int best = -1;
    double best_score = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < logits.size(); ++i) {
      if (i == kUnkId) continue;
      if (logits[i] > best_score) {
        best_score = logits[i];
        best = static_cast<int>(i);
      }
    }
    out.ids.push_back(best);
    if (best == kEosId) break;
    prev = best;
  }
  return out;
}

}  // namespace bacap
