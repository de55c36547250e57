#pragma once

#include "bacap/decoder.hpp"
#include "bacap/encoder.hpp"

namespace bacap {

struct ModelDims {
  Index feature_dim = 0;
  Index embed_dim = 0;   // shared size of the video-feature and word embeddings
  Index hidden_dim = 0;  // hidden size of both encoder layers and the decoder
  Index vocab_size = 0;

  bool operator==(const ModelDims&) const = default;
};

struct ModelParams {
  EncoderParams encoder;
  DecoderParams decoder;
};

ModelDims dims_of(const ModelParams& m);
ModelParams zeros_like(const ModelParams& m);
std::vector<TensorRef> tensor_refs(ModelParams& m);
void append_tensor_refs(ModelParams& m, const std::string& prefix, std::vector<TensorRef>& out);

// All-zero tensors of the right shapes (gradient accumulators, loading).
ModelParams make_model(const ModelDims& dims);

// Hidden-to-hidden matrices start orthogonal, every other matrix and the
// detector direction start Glorot, biases start at zero.
ModelParams init_model(const ModelDims& dims, Rng& rng);

struct ModelForward {
  double loss = 0.0;
  EncodeResult encoded;
  EncodeCache enc_cache;
  DecodeCache dec_cache;
};

// Encoder pass under `mode` followed by the teacher-forced caption loss.
ModelForward model_forward(const ModelParams& m, const FeatureSequence& f,
                           const CaptionTokens& caption, const BoundaryMode& mode,
                           Rng* rng = nullptr, const EncodeOptions& opts = {});

// Same, with the continuous boundary relaxation (gradient checking).
ModelForward model_forward_soft(const ModelParams& m, const FeatureSequence& f,
                                const CaptionTokens& caption);

// Accumulates gradients of `scale * loss` into `grad`.
void model_backward(const ModelParams& m, const ModelForward& fwd, double scale,
                    ModelParams& grad);

}  // namespace bacap
