#pragma once

#include <optional>

#include "bacap/numerics.hpp"

namespace bacap {

struct LstmParams {
  Mat W_ix, W_ih;  // input gate, [H x X] and [H x H]
  Mat W_fx, W_fh;  // forget gate
  Mat W_gx, W_gh;  // candidate
  Mat W_ox, W_oh;  // output gate
  Vec b_i, b_f, b_g, b_o;

  Index input_dim() const { return W_ix.cols(); }
  Index hidden_dim() const { return W_ix.rows(); }
};

LstmParams zeros_like(const LstmParams& p);
LstmParams make_lstm_params(Index input_dim, Index hidden_dim);

// Boundary detector: a scalar score v_s . (W_si x + W_sh h_prev + b_s)
// thresholded by tau.
struct BoundaryParams {
  Vec v_s;   // [H]
  Mat W_si;  // [H x X]
  Mat W_sh;  // [H x H]
  Vec b_s;   // [H]

  Index input_dim() const { return W_si.cols(); }
  Index hidden_dim() const { return W_si.rows(); }
};

BoundaryParams zeros_like(const BoundaryParams& p);
BoundaryParams make_boundary_params(Index input_dim, Index hidden_dim);

// State of the boundary-aware layer after one timestep.
struct BoundaryState {
  Vec h;
  Vec c;
  int s = 0;           // boundary decision at this step
  double logit = 0.0;  // pre-sigmoid boundary activation
};

BoundaryState zero_boundary_state(Index hidden_dim);

struct GruParams {
  Mat W_zy, W_zv, W_zh;  // update gate: word embedding, video vector, hidden
  Mat W_ry, W_rv, W_rh;  // reset gate
  Mat W_hy, W_hv, W_hh;  // candidate
  Vec b_z, b_r, b_h;

  Index word_dim() const { return W_zy.cols(); }
  Index video_dim() const { return W_zv.cols(); }
  Index hidden_dim() const { return W_zy.rows(); }
};

GruParams zeros_like(const GruParams& p);
GruParams make_gru_params(Index word_dim, Index video_dim, Index hidden_dim);

// Intermediate activations of one forward step, kept for the backward pass.
struct LstmStepCache {
  Vec x, h_prev, c_prev;  // inputs as consumed by the gates
  Vec i, f, g, o;         // gate values
  Vec tanh_c;
};

struct LstmStepOut {
  Vec h, c;
  LstmStepCache cache;
};

LstmStepOut lstm_step(const LstmParams& p, const Vec& x, const Vec& h_prev, const Vec& c_prev);

struct LstmStepGradOut {
  Vec dx, dh_prev, dc_prev;
};

// Accumulates parameter gradients into `grad`; upstream dh/dc are gradients
// w.r.t. the step's outputs.
LstmStepGradOut lstm_step_backward(const LstmParams& p, const LstmStepCache& cache, const Vec& dh,
                                   const Vec& dc, LstmParams& grad);

double boundary_logit(const BoundaryParams& bp, const Vec& x, const Vec& h_prev);

// 1 iff sigmoid(a) > 0.5, i.e. iff a > 0.
int tau_deterministic(double a);

// 1 iff sigmoid(a) > z with z ~ U[0,1]; P(1) = sigmoid(a).
int tau_stochastic(double a, Rng& rng);

enum class TauMode {
  kStochastic,     // training forward: sampled decision
  kDeterministic,  // test forward: thresholded decision
  kForced,         // decision supplied externally; detector carries no gradient
  kSoft,           // continuous relaxation: s = sigmoid(logit)
};

struct BoundaryStepCache {
  LstmStepCache lstm;  // h_prev/c_prev inside are the post-reset values
  Vec h_in, c_in;      // state before the reset decision
  Vec pre;             // W_si x + W_sh h_in + b_s
  double logit = 0.0;
  double s = 0.0;  // 0/1 in hard modes, sigmoid(logit) in soft mode
  TauMode mode = TauMode::kDeterministic;
};

struct BoundaryStepOut {
  BoundaryState next;
  std::optional<Vec> emitted;  // h_in, present iff s = 1
  BoundaryStepCache cache;
};

// One step of the boundary-aware cell. The decision s_t is computed from the
// un-reset h_{t-1} and x_t; when it fires, h_{t-1} is emitted and the gates
// run on zeroed state and memory.
BoundaryStepOut boundary_lstm_step(const LstmParams& p, const BoundaryParams& bp, const Vec& x,
                                   const BoundaryState& prev, TauMode mode, Rng* rng = nullptr,
                                   int forced_s = 0);

struct SoftBoundaryStepOut {
  Vec h, c;
  double s = 0.0;
  Vec emitted;  // s * h_in
  BoundaryStepCache cache;
};

// Fully differentiable variant: the reset interpolates by 1-s and every step
// emits s * h_{t-1}.
SoftBoundaryStepOut boundary_lstm_step_soft(const LstmParams& p, const BoundaryParams& bp,
                                            const Vec& x, const Vec& h_prev, const Vec& c_prev);

struct BoundaryStepGradOut {
  Vec dx, dh_in, dc_in;
};

// Reverse step. `d_emitted` is the gradient w.r.t. the emitted vector (null
// when nothing downstream consumed it). In stochastic/deterministic modes the
// step function's derivative is replaced by the sigmoid derivative at the
// logit, fed by the two reset products; the emit-or-not selection itself
// contributes nothing. In forced mode the detector parameters receive no
// gradient. In soft mode the emission weight s contributes as well.
BoundaryStepGradOut boundary_lstm_step_backward(const LstmParams& p, const BoundaryParams& bp,
                                                const BoundaryStepCache& cache, const Vec& dh,
                                                const Vec& dc, const Vec* d_emitted,
                                                LstmParams& lstm_grad, BoundaryParams& bd_grad);

struct GruStepCache {
  Vec e, v, p_prev;  // word embedding, video vector, previous output
  Vec z, r, q, hh;   // gates, r .* p_prev, candidate
};

struct GruStepOut {
  Vec p;
  GruStepCache cache;
};

GruStepOut gru_step(const GruParams& p, const Vec& e, const Vec& v, const Vec& p_prev);

struct GruStepGradOut {
  Vec de, dv, dp_prev;
};

GruStepGradOut gru_step_backward(const GruParams& p, const GruStepCache& cache, const Vec& dp,
                                 GruParams& grad);

std::vector<TensorRef> tensor_refs(LstmParams& p);
std::vector<TensorRef> tensor_refs(BoundaryParams& p);
std::vector<TensorRef> tensor_refs(GruParams& p);
void append_tensor_refs(LstmParams& p, const std::string& prefix, std::vector<TensorRef>& out);
void append_tensor_refs(BoundaryParams& p, const std::string& prefix, std::vector<TensorRef>& out);
void append_tensor_refs(GruParams& p, const std::string& prefix, std::vector<TensorRef>& out);

}  // namespace bacap
