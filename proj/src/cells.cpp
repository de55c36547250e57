#include "bacap/cells.hpp"

namespace bacap {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

LstmParams zeros_like(const LstmParams& p) {
  LstmParams z;
  z.W_ix = Mat::Zero(p.W_ix.rows(), p.W_ix.cols());
  z.W_ih = Mat::Zero(p.W_ih.rows(), p.W_ih.cols());
  z.W_fx = Mat::Zero(p.W_fx.rows(), p.W_fx.cols());
  z.W_fh = Mat::Zero(p.W_fh.rows(), p.W_fh.cols());
  z.W_gx = Mat::Zero(p.W_gx.rows(), p.W_gx.cols());
  z.W_gh = Mat::Zero(p.W_gh.rows(), p.W_gh.cols());
  z.W_ox = Mat::Zero(p.W_ox.rows(), p.W_ox.cols());
  z.W_oh = Mat::Zero(p.W_oh.rows(), p.W_oh.cols());
  z.b_i = Vec::Zero(p.b_i.size());
  z.b_f = Vec::Zero(p.b_f.size());
  z.b_g = Vec::Zero(p.b_g.size());
  z.b_o = Vec::Zero(p.b_o.size());
  return z;
}

LstmParams make_lstm_params(Index input_dim, Index hidden_dim) {
  LstmParams p;
  p.W_ix = Mat::Zero(hidden_dim, input_dim);
  p.W_ih = Mat::Zero(hidden_dim, hidden_dim);
  p.W_fx = Mat::Zero(hidden_dim, input_dim);
  p.W_fh = Mat::Zero(hidden_dim, hidden_dim);
  p.W_gx = Mat::Zero(hidden_dim, input_dim);
  p.W_gh = Mat::Zero(hidden_dim, hidden_dim);
  p.W_ox = Mat::Zero(hidden_dim, input_dim);
  p.W_oh = Mat::Zero(hidden_dim, hidden_dim);
  p.b_i = Vec::Zero(hidden_dim);
  p.b_f = Vec::Zero(hidden_dim);
  p.b_g = Vec::Zero(hidden_dim);
  p.b_o = Vec::Zero(hidden_dim);
  return p;
}

BoundaryParams zeros_like(const BoundaryParams& p) {
  BoundaryParams z;
  z.v_s = Vec::Zero(p.v_s.size());
  z.W_si = Mat::Zero(p.W_si.rows(), p.W_si.cols());
  z.W_sh = Mat::Zero(p.W_sh.rows(), p.W_sh.cols());
  z.b_s = Vec::Zero(p.b_s.size());
  return z;
}

BoundaryParams make_boundary_params(Index input_dim, Index hidden_dim) {
  BoundaryParams p;
  p.v_s = Vec::Zero(hidden_dim);
  p.W_si = Mat::Zero(hidden_dim, input_dim);
  p.W_sh = Mat::Zero(hidden_dim, hidden_dim);
  p.b_s = Vec::Zero(hidden_dim);
  return p;
}

BoundaryState zero_boundary_state(Index hidden_dim) {
  BoundaryState st;
  st.h = Vec::Zero(hidden_dim);
  st.c = Vec::Zero(hidden_dim);
  st.s = 0;
  st.logit = 0.0;
  return st;
}

GruParams zeros_like(const GruParams& p) {
  GruParams z;
  z.W_zy = Mat::Zero(p.W_zy.rows(), p.W_zy.cols());
  z.W_zv = Mat::Zero(p.W_zv.rows(), p.W_zv.cols());
  z.W_zh = Mat::Zero(p.W_zh.rows(), p.W_zh.cols());
  z.W_ry = Mat::Zero(p.W_ry.rows(), p.W_ry.cols());
  z.W_rv = Mat::Zero(p.W_rv.rows(), p.W_rv.cols());
  z.W_rh = Mat::Zero(p.W_rh.rows(), p.W_rh.cols());
  z.W_hy = Mat::Zero(p.W_hy.rows(), p.W_hy.cols());
  z.W_hv = Mat::Zero(p.W_hv.rows(), p.W_hv.cols());
  z.W_hh = Mat::Zero(p.W_hh.rows(), p.W_hh.cols());
  z.b_z = Vec::Zero(p.b_z.size());
  z.b_r = Vec::Zero(p.b_r.size());
  z.b_h = Vec::Zero(p.b_h.size());
  return z;
}

GruParams make_gru_params(Index word_dim, Index video_dim, Index hidden_dim) {
  GruParams p;
  p.W_zy = Mat::Zero(hidden_dim, word_dim);
  p.W_zv = Mat::Zero(hidden_dim, video_dim);
  p.W_zh = Mat::Zero(hidden_dim, hidden_dim);
  p.W_ry = Mat::Zero(hidden_dim, word_dim);
  p.W_rv = Mat::Zero(hidden_dim, video_dim);
  p.W_rh = Mat::Zero(hidden_dim, hidden_dim);
  p.W_hy = Mat::Zero(hidden_dim, word_dim);
  p.W_hv = Mat::Zero(hidden_dim, video_dim);
  p.W_hh = Mat::Zero(hidden_dim, hidden_dim);
  p.b_z = Vec::Zero(hidden_dim);
  p.b_r = Vec::Zero(hidden_dim);
  p.b_h = Vec::Zero(hidden_dim);
  return p;
}

LstmStepOut lstm_step(const LstmParams& p, const Vec& x, const Vec& h_prev, const Vec& c_prev) {
  require(x.size() == p.input_dim(), "lstm_step: x dim mismatch");
  require(h_prev.size() == p.hidden_dim(), "lstm_step: h_prev dim mismatch");
  require(c_prev.size() == p.hidden_dim(), "lstm_step: c_prev dim mismatch");

  LstmStepOut out;
  LstmStepCache& c = out.cache;
  c.x = x;
  c.h_prev = h_prev;
  c.c_prev = c_prev;
  c.i = sigmoid(Vec(p.W_ix * x + p.W_ih * h_prev + p.b_i));
  c.f = sigmoid(Vec(p.W_fx * x + p.W_fh * h_prev + p.b_f));
  c.g = tanh(Vec(p.W_gx * x + p.W_gh * h_prev + p.b_g));
  out.c = c.f.cwiseProduct(c_prev) + c.i.cwiseProduct(c.g);
  c.o = sigmoid(Vec(p.W_ox * x + p.W_oh * h_prev + p.b_o));
  c.tanh_c = tanh(out.c);
  out.h = c.o.cwiseProduct(c.tanh_c);
  return out;
}

LstmStepGradOut lstm_step_backward(const LstmParams& p, const LstmStepCache& c, const Vec& dh,
                                   const Vec& dc, LstmParams& grad) {
  require(dh.size() == p.hidden_dim() && dc.size() == p.hidden_dim(),
          "lstm_step_backward: upstream dim mismatch");

  const Vec d_o = dh.cwiseProduct(c.tanh_c);
  const Vec dtanh_c = dh.cwiseProduct(c.o);
  const Vec dc_total =
      dc + dtanh_c.cwiseProduct((1.0 - c.tanh_c.array().square()).matrix());

  const Vec d_f = dc_total.cwiseProduct(c.c_prev);
  const Vec dc_prev = dc_total.cwiseProduct(c.f);
  const Vec d_i = dc_total.cwiseProduct(c.g);
  const Vec d_g = dc_total.cwiseProduct(c.i);

  const Vec dpi = d_i.cwiseProduct(c.i.cwiseProduct((1.0 - c.i.array()).matrix()));
  const Vec dpf = d_f.cwiseProduct(c.f.cwiseProduct((1.0 - c.f.array()).matrix()));
  const Vec dpg = d_g.cwiseProduct((1.0 - c.g.array().square()).matrix());
  const Vec dpo = d_o.cwiseProduct(c.o.cwiseProduct((1.0 - c.o.array()).matrix()));

  grad.W_ix.noalias() += dpi * c.x.transpose();
  grad.W_ih.noalias() += dpi * c.h_prev.transpose();
  grad.W_fx.noalias() += dpf * c.x.transpose();
  grad.W_fh.noalias() += dpf * c.h_prev.transpose();
  grad.W_gx.noalias() += dpg * c.x.transpose();
  grad.W_gh.noalias() += dpg * c.h_prev.transpose();
  grad.W_ox.noalias() += dpo * c.x.transpose();
  grad.W_oh.noalias() += dpo * c.h_prev.transpose();
  grad.b_i += dpi;
  grad.b_f += dpf;
  grad.b_g += dpg;
  grad.b_o += dpo;

  LstmStepGradOut out;
  out.dx = p.W_ix.transpose() * dpi + p.W_fx.transpose() * dpf + p.W_gx.transpose() * dpg +
           p.W_ox.transpose() * dpo;
  out.dh_prev = p.W_ih.transpose() * dpi + p.W_fh.transpose() * dpf + p.W_gh.transpose() * dpg +
                p.W_oh.transpose() * dpo;
  out.dc_prev = dc_prev;
  return out;
}

double boundary_logit(const BoundaryParams& bp, const Vec& x, const Vec& h_prev) {
  require(x.size() == bp.input_dim(), "boundary_logit: x dim mismatch");
  require(h_prev.size() == bp.hidden_dim(), "boundary_logit: h_prev dim mismatch");
  return bp.v_s.dot(bp.W_si * x + bp.W_sh * h_prev + bp.b_s);
}

int tau_deterministic(double a) { return a > 0.0 ? 1 : 0; }

int tau_stochastic(double a, Rng& rng) { return sigmoid(a) > rng.uniform() ? 1 : 0; }

BoundaryStepOut boundary_lstm_step(const LstmParams& p, const BoundaryParams& bp, const Vec& x,
                                   const BoundaryState& prev, TauMode mode, Rng* rng,
                                   int forced_s) {
  require(bp.input_dim() == p.input_dim() && bp.hidden_dim() == p.hidden_dim(),
          "boundary_lstm_step: detector/cell dim mismatch");
  require(mode != TauMode::kSoft, "boundary_lstm_step: use boundary_lstm_step_soft");

  const Vec pre = bp.W_si * x + bp.W_sh * prev.h + bp.b_s;
  const double logit = bp.v_s.dot(pre);

  int s = 0;
  switch (mode) {
    case TauMode::kStochastic:
      require(rng != nullptr, "boundary_lstm_step: stochastic mode needs an rng");
      s = tau_stochastic(logit, *rng);
      break;
    case TauMode::kDeterministic:
      s = tau_deterministic(logit);
      break;
    case TauMode::kForced:
      require(forced_s == 0 || forced_s == 1, "boundary_lstm_step: forced decision must be 0/1");
      s = forced_s;
      break;
    case TauMode::kSoft:
      break;
  }

  BoundaryStepOut out;
  if (s == 1) {
    out.emitted = prev.h;
    const Vec zero = Vec::Zero(p.hidden_dim());
    LstmStepOut lo = lstm_step(p, x, zero, zero);
    out.next.h = std::move(lo.h);
    out.next.c = std::move(lo.c);
    out.cache.lstm = std::move(lo.cache);
  } else {
    LstmStepOut lo = lstm_step(p, x, prev.h, prev.c);
    out.next.h = std::move(lo.h);
    out.next.c = std::move(lo.c);
    out.cache.lstm = std::move(lo.cache);
  }
  out.next.s = s;
  out.next.logit = logit;
  out.cache.h_in = prev.h;
  out.cache.c_in = prev.c;
  out.cache.pre = pre;
  out.cache.logit = logit;
  out.cache.s = static_cast<double>(s);
  out.cache.mode = mode;
  return out;
}

SoftBoundaryStepOut boundary_lstm_step_soft(const LstmParams& p, const BoundaryParams& bp,
                                            const Vec& x, const Vec& h_prev, const Vec& c_prev) {
  require(bp.input_dim() == p.input_dim() && bp.hidden_dim() == p.hidden_dim(),
          "boundary_lstm_step_soft: detector/cell dim mismatch");

  const Vec pre = bp.W_si * x + bp.W_sh * h_prev + bp.b_s;
  const double logit = bp.v_s.dot(pre);
  const double s = sigmoid(logit);

  SoftBoundaryStepOut out;
  out.s = s;
  out.emitted = s * h_prev;
  LstmStepOut lo = lstm_step(p, x, Vec((1.0 - s) * h_prev), Vec((1.0 - s) * c_prev));
  out.h = std::move(lo.h);
  out.c = std::move(lo.c);
  out.cache.lstm = std::move(lo.cache);
  out.cache.h_in = h_prev;
  out.cache.c_in = c_prev;
  out.cache.pre = pre;
  out.cache.logit = logit;
  out.cache.s = s;
  out.cache.mode = TauMode::kSoft;
  return out;
}

BoundaryStepGradOut boundary_lstm_step_backward(const LstmParams& p, const BoundaryParams& bp,
                                                const BoundaryStepCache& cache, const Vec& dh,
                                                const Vec& dc, const Vec* d_emitted,
                                                LstmParams& lstm_grad, BoundaryParams& bd_grad) {
  const double s = cache.s;

  LstmStepGradOut lg = lstm_step_backward(p, cache.lstm, dh, dc, lstm_grad);

  BoundaryStepGradOut out;
  out.dx = std::move(lg.dx);
  out.dh_in = (1.0 - s) * lg.dh_prev;
  out.dc_in = (1.0 - s) * lg.dc_prev;

  double ds = 0.0;
  if (cache.mode == TauMode::kSoft) {
    if (d_emitted != nullptr) {
      ds += d_emitted->dot(cache.h_in);
      out.dh_in += s * (*d_emitted);
    }
    ds += -lg.dh_prev.dot(cache.h_in) - lg.dc_prev.dot(cache.c_in);
  } else {
    if (d_emitted != nullptr && s == 1.0) out.dh_in += *d_emitted;
    if (cache.mode == TauMode::kForced) return out;  // frozen decision: no detector gradient
    // Straight-through surrogate: the step function backpropagates as the
    // sigmoid through the two reset products only. The discrete emit-or-not
    // branch contributes no gradient to s; an emitted state still routes its
    // downstream gradient into h_{t-1} above, it just carries no vote on the
    // decision itself.
    ds = -lg.dh_prev.dot(cache.h_in) - lg.dc_prev.dot(cache.c_in);
  }

  const double da = ds * sigmoid_deriv_from_value(sigmoid(cache.logit));
  const Vec dpre = da * bp.v_s;
  bd_grad.v_s += da * cache.pre;
  bd_grad.W_si.noalias() += dpre * cache.lstm.x.transpose();
  bd_grad.W_sh.noalias() += dpre * cache.h_in.transpose();
  bd_grad.b_s += dpre;
  out.dx += bp.W_si.transpose() * dpre;
  out.dh_in += bp.W_sh.transpose() * dpre;
  return out;
}

GruStepOut gru_step(const GruParams& p, const Vec& e, const Vec& v, const Vec& p_prev) {
  require(e.size() == p.word_dim(), "gru_step: word embedding dim mismatch");
  require(v.size() == p.video_dim(), "gru_step: video vector dim mismatch");
  require(p_prev.size() == p.hidden_dim(), "gru_step: p_prev dim mismatch");

  GruStepOut out;
  GruStepCache& c = out.cache;
  c.e = e;
  c.v = v;
  c.p_prev = p_prev;
  c.z = sigmoid(Vec(p.W_zy * e + p.W_zv * v + p.W_zh * p_prev + p.b_z));
  c.r = sigmoid(Vec(p.W_ry * e + p.W_rv * v + p.W_rh * p_prev + p.b_r));
  c.q = c.r.cwiseProduct(p_prev);
  c.hh = tanh(Vec(p.W_hy * e + p.W_hv * v + p.W_hh * c.q + p.b_h));
  out.p = (1.0 - c.z.array()).matrix().cwiseProduct(p_prev) + c.z.cwiseProduct(c.hh);
  return out;
}

GruStepGradOut gru_step_backward(const GruParams& p, const GruStepCache& c, const Vec& dp,
                                 GruParams& grad) {
  require(dp.size() == p.hidden_dim(), "gru_step_backward: upstream dim mismatch");

  const Vec dz = dp.cwiseProduct(c.hh - c.p_prev);
  const Vec dhh = dp.cwiseProduct(c.z);
  Vec dp_prev = dp.cwiseProduct((1.0 - c.z.array()).matrix());

  const Vec dph = dhh.cwiseProduct((1.0 - c.hh.array().square()).matrix());
  grad.W_hy.noalias() += dph * c.e.transpose();
  grad.W_hv.noalias() += dph * c.v.transpose();
  grad.W_hh.noalias() += dph * c.q.transpose();
  grad.b_h += dph;

  const Vec dq = p.W_hh.transpose() * dph;
  const Vec dr = dq.cwiseProduct(c.p_prev);
  dp_prev += dq.cwiseProduct(c.r);

  const Vec dpz = dz.cwiseProduct(c.z.cwiseProduct((1.0 - c.z.array()).matrix()));
  const Vec dpr = dr.cwiseProduct(c.r.cwiseProduct((1.0 - c.r.array()).matrix()));

  grad.W_zy.noalias() += dpz * c.e.transpose();
  grad.W_zv.noalias() += dpz * c.v.transpose();
  grad.W_zh.noalias() += dpz * c.p_prev.transpose();
  grad.b_z += dpz;
  grad.W_ry.noalias() += dpr * c.e.transpose();
  grad.W_rv.noalias() += dpr * c.v.transpose();
  grad.W_rh.noalias() += dpr * c.p_prev.transpose();
  grad.b_r += dpr;

  dp_prev += p.W_zh.transpose() * dpz + p.W_rh.transpose() * dpr;

  GruStepGradOut out;
  out.de = p.W_zy.transpose() * dpz + p.W_ry.transpose() * dpr + p.W_hy.transpose() * dph;
  out.dv = p.W_zv.transpose() * dpz + p.W_rv.transpose() * dpr + p.W_hv.transpose() * dph;
  out.dp_prev = std::move(dp_prev);
  return out;
}

void append_tensor_refs(LstmParams& p, const std::string& prefix, std::vector<TensorRef>& out) {
  out.push_back({prefix + "W_ix", &p.W_ix, nullptr});
  out.push_back({prefix + "W_ih", &p.W_ih, nullptr});
  out.push_back({prefix + "W_fx", &p.W_fx, nullptr});
  out.push_back({prefix + "W_fh", &p.W_fh, nullptr});
  out.push_back({prefix + "W_gx", &p.W_gx, nullptr});
  out.push_back({prefix + "W_gh", &p.W_gh, nullptr});
  out.push_back({prefix + "W_ox", &p.W_ox, nullptr});
  out.push_back({prefix + "W_oh", &p.W_oh, nullptr});
  out.push_back({prefix + "b_i", nullptr, &p.b_i});
  out.push_back({prefix + "b_f", nullptr, &p.b_f});
  out.push_back({prefix + "b_g", nullptr, &p.b_g});
  out.push_back({prefix + "b_o", nullptr, &p.b_o});
}

void append_tensor_refs(BoundaryParams& p, const std::string& prefix, std::vector<TensorRef>& out) {
  out.push_back({prefix + "v_s", nullptr, &p.v_s});
  out.push_back({prefix + "W_si", &p.W_si, nullptr});
  out.push_back({prefix + "W_sh", &p.W_sh, nullptr});
  out.push_back({prefix + "b_s", nullptr, &p.b_s});
}

void append_tensor_refs(GruParams& p, const std::string& prefix, std::vector<TensorRef>& out) {
  out.push_back({prefix + "W_zy", &p.W_zy, nullptr});
  out.push_back({prefix + "W_zv", &p.W_zv, nullptr});
  out.push_back({prefix + "W_zh", &p.W_zh, nullptr});
  out.push_back({prefix + "W_ry", &p.W_ry, nullptr});
  out.push_back({prefix + "W_rv", &p.W_rv, nullptr});
  out.push_back({prefix + "W_rh", &p.W_rh, nullptr});
  out.push_back({prefix + "W_hy", &p.W_hy, nullptr});
  out.push_back({prefix + "W_hv", &p.W_hv, nullptr});
  out.push_back({prefix + "W_hh", &p.W_hh, nullptr});
  out.push_back({prefix + "b_z", nullptr, &p.b_z});
  out.push_back({prefix + "b_r", nullptr, &p.b_r});
  out.push_back({prefix + "b_h", nullptr, &p.b_h});
}

std::vector<TensorRef> tensor_refs(LstmParams& p) {
  std::vector<TensorRef> out;
  append_tensor_refs(p, "", out);
  return out;
}

std::vector<TensorRef> tensor_refs(BoundaryParams& p) {
  std::vector<TensorRef> out;
  append_tensor_refs(p, "", out);
  return out;
}

std::vector<TensorRef> tensor_refs(GruParams& p) {
  std::vector<TensorRef> out;
  append_tensor_refs(p, "", out);
  return out;
}

}  // namespace bacap
