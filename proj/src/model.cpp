#include "bacap/model.hpp"

#include <stdexcept>

namespace bacap {

ModelDims dims_of(const ModelParams& m) {
  return ModelDims{m.encoder.feature_dim(), m.encoder.embed_dim(), m.encoder.hidden_dim(),
                   m.decoder.vocab_size()};
}

ModelParams zeros_like(const ModelParams& m) {
  return ModelParams{zeros_like(m.encoder), zeros_like(m.decoder)};
}

void append_tensor_refs(ModelParams& m, const std::string& prefix, std::vector<TensorRef>& out) {
  append_tensor_refs(m.encoder, prefix + "encoder.", out);
  append_tensor_refs(m.decoder, prefix + "decoder.", out);
}

std::vector<TensorRef> tensor_refs(ModelParams& m) {
  std::vector<TensorRef> out;
  append_tensor_refs(m, "", out);
  return out;
}

namespace {

void init_lstm(LstmParams& p, Index input_dim, Index hidden_dim, Rng& rng) {
  p.W_ix = glorot_init(hidden_dim, input_dim, rng);
  p.W_ih = orthogonal_init(hidden_dim, rng);
  p.W_fx = glorot_init(hidden_dim, input_dim, rng);
  p.W_fh = orthogonal_init(hidden_dim, rng);
  p.W_gx = glorot_init(hidden_dim, input_dim, rng);
  p.W_gh = orthogonal_init(hidden_dim, rng);
  p.W_ox = glorot_init(hidden_dim, input_dim, rng);
  p.W_oh = orthogonal_init(hidden_dim, rng);
  p.b_i = Vec::Zero(hidden_dim);
  p.b_f = Vec::Zero(hidden_dim);
  p.b_g = Vec::Zero(hidden_dim);
  p.b_o = Vec::Zero(hidden_dim);
}

}  // namespace

ModelParams make_model(const ModelDims& dims) {
  if (dims.feature_dim < 1 || dims.embed_dim < 1 || dims.hidden_dim < 1 || dims.vocab_size < 1) {
    throw std::invalid_argument("make_model: all dimensions must be >= 1");
  }
  ModelParams m;
  m.encoder.W_embed = Mat::Zero(dims.embed_dim, dims.feature_dim);
  m.encoder.b_embed = Vec::Zero(dims.embed_dim);
  m.encoder.layer1 = make_lstm_params(dims.embed_dim, dims.hidden_dim);
  m.encoder.boundary = make_boundary_params(dims.embed_dim, dims.hidden_dim);
  m.encoder.layer2 = make_lstm_params(dims.hidden_dim, dims.hidden_dim);
  m.decoder.gru = make_gru_params(dims.embed_dim, dims.hidden_dim, dims.hidden_dim);
  m.decoder.W_w = Mat::Zero(dims.embed_dim, dims.vocab_size);
  m.decoder.W_p = Mat::Zero(dims.vocab_size, dims.hidden_dim);
  return m;
}

ModelParams init_model(const ModelDims& dims, Rng& rng) {
  if (dims.feature_dim < 1 || dims.embed_dim < 1 || dims.hidden_dim < 1 || dims.vocab_size < 1) {
    throw std::invalid_argument("init_model: all dimensions must be >= 1");
  }
  const Index F = dims.feature_dim;
  const Index E = dims.embed_dim;
  const Index H = dims.hidden_dim;
  const Index N = dims.vocab_size;

  ModelParams m;
  m.encoder.W_embed = glorot_init(E, F, rng);
  m.encoder.b_embed = Vec::Zero(E);
  init_lstm(m.encoder.layer1, E, H, rng);
  m.encoder.boundary.v_s = glorot_init(H, 1, rng).col(0);
  m.encoder.boundary.W_si = glorot_init(H, E, rng);
  m.encoder.boundary.W_sh = orthogonal_init(H, rng);
  m.encoder.boundary.b_s = Vec::Zero(H);
  init_lstm(m.encoder.layer2, H, H, rng);

  GruParams& g = m.decoder.gru;
  g.W_zy = glorot_init(H, E, rng);
  g.W_zv = glorot_init(H, H, rng);
  g.W_zh = orthogonal_init(H, rng);
  g.W_ry = glorot_init(H, E, rng);
  g.W_rv = glorot_init(H, H, rng);
  g.W_rh = orthogonal_init(H, rng);
  g.W_hy = glorot_init(H, E, rng);
  g.W_hv = glorot_init(H, H, rng);
  g.W_hh = orthogonal_init(H, rng);
  g.b_z = Vec::Zero(H);
  g.b_r = Vec::Zero(H);
  g.b_h = Vec::Zero(H);
  m.decoder.W_w = glorot_init(E, N, rng);
  m.decoder.W_p = glorot_init(N, H, rng);
  return m;
}

ModelForward model_forward(const ModelParams& m, const FeatureSequence& f,
                           const CaptionTokens& caption, const BoundaryMode& mode, Rng* rng,
                           const EncodeOptions& opts) {
  EncodeOutput enc = encode(m.encoder, f, mode, rng, opts);
  CaptionLossOut dec = caption_loss(m.decoder, enc.result.video_vector, caption);
  return ModelForward{dec.loss, std::move(enc.result), std::move(enc.cache),
                      std::move(dec.cache)};
}

ModelForward model_forward_soft(const ModelParams& m, const FeatureSequence& f,
                                const CaptionTokens& caption) {
  EncodeOutput enc = encode_soft(m.encoder, f);
  CaptionLossOut dec = caption_loss(m.decoder, enc.result.video_vector, caption);
  return ModelForward{dec.loss, std::move(enc.result), std::move(enc.cache),
                      std::move(dec.cache)};
}

void model_backward(const ModelParams& m, const ModelForward& fwd, double scale,
                    ModelParams& grad) {
  const Vec dv = caption_loss_backward(m.decoder, fwd.dec_cache, scale, grad.decoder);
  encode_backward(m.encoder, fwd.enc_cache, dv, grad.encoder);
}

}  // namespace bacap
