#include "bacap/encoder.hpp"

#include <stdexcept>
#include <unordered_map>

namespace bacap {

EncoderParams zeros_like(const EncoderParams& p) {
  EncoderParams z;
  z.W_embed = Mat::Zero(p.W_embed.rows(), p.W_embed.cols());
  z.b_embed = Vec::Zero(p.b_embed.size());
  z.layer1 = zeros_like(p.layer1);
  z.boundary = zeros_like(p.boundary);
  z.layer2 = zeros_like(p.layer2);
  return z;
}

void append_tensor_refs(EncoderParams& p, const std::string& prefix, std::vector<TensorRef>& out) {
  out.push_back({prefix + "W_embed", &p.W_embed, nullptr});
  out.push_back({prefix + "b_embed", nullptr, &p.b_embed});
  append_tensor_refs(p.layer1, prefix + "layer1.", out);
  append_tensor_refs(p.boundary, prefix + "boundary.", out);
  append_tensor_refs(p.layer2, prefix + "layer2.", out);
}

std::vector<TensorRef> tensor_refs(EncoderParams& p) {
  std::vector<TensorRef> out;
  append_tensor_refs(p, "", out);
  return out;
}

std::vector<int> equal_chunk_decisions(Index n, Index m) {
  if (n < 1) throw std::invalid_argument("equal_chunk_decisions: n must be >= 1");
  if (m < 1 || m > n) throw std::invalid_argument("equal_chunk_decisions: need 1 <= m <= n");
  std::vector<int> decisions(static_cast<std::size_t>(n), 0);
  for (Index k = 1; k < m; ++k) {
    const Index t = (k * n + m - 1) / m + 1;  // ceil(k*n/m) + 1, 1-based
    decisions[static_cast<std::size_t>(t - 1)] = 1;
  }
  return decisions;
}

std::vector<Vec> embed_input(const EncoderParams& p, const FeatureSequence& f) {
  if (f.frames.empty()) throw std::invalid_argument("embed_input: empty feature sequence");
  std::vector<Vec> out;
  out.reserve(f.frames.size());
  for (const Vec& x : f.frames) {
    if (x.size() != p.feature_dim()) {
      throw std::invalid_argument("embed_input: frame dimension " + std::to_string(x.size()) +
                                  " does not match embedding input " +
                                  std::to_string(p.feature_dim()));
    }
    out.push_back(p.W_embed * x + p.b_embed);
  }
  return out;
}

namespace {

// Shared tail of the hard and soft passes: summary dropout + layer 2.
void run_layer2(const EncoderParams& p, Rng* rng, double summary_retain, EncodeResult& result,
                EncodeCache& cache) {
  const bool drop = summary_retain < 1.0;
  Vec h = Vec::Zero(p.layer2.hidden_dim());
  Vec c = Vec::Zero(p.layer2.hidden_dim());
  for (const Vec& raw : cache.summaries_raw) {
    Vec x = raw;
    if (drop) {
      Vec mask = dropout_mask(raw.size(), summary_retain, *rng);
      x = mask.cwiseProduct(raw);
      cache.summary_mask.push_back(std::move(mask));
    }
    LstmStepOut out = lstm_step(p.layer2, x, h, c);
    h = std::move(out.h);
    c = std::move(out.c);
    cache.layer2.push_back(std::move(out.cache));
  }
  result.video_vector = h;
  result.summaries = cache.summaries_raw;
}

}  // namespace

EncodeOutput encode(const EncoderParams& p, const FeatureSequence& f, const BoundaryMode& mode,
                    Rng* rng, const EncodeOptions& opts) {
  const Index n = f.length();
  if (n == 0) throw std::invalid_argument("encode: empty feature sequence");
  const bool needs_rng = mode.kind == BoundaryMode::Kind::kLearnedTrain ||
                         opts.input_retain < 1.0 || opts.summary_retain < 1.0;
  if (needs_rng && rng == nullptr) {
    throw std::invalid_argument("encode: rng required for sampled decisions or dropout");
  }

  std::vector<int> forced;
  if (mode.kind == BoundaryMode::Kind::kForced) {
    if (static_cast<Index>(mode.forced.size()) != n) {
      throw std::invalid_argument("encode: forced decisions must have one entry per timestep");
    }
    for (int s : mode.forced) {
      if (s != 0 && s != 1) throw std::invalid_argument("encode: forced decisions must be 0 or 1");
    }
    forced = mode.forced;
  } else if (mode.kind == BoundaryMode::Kind::kEqualChunks) {
    forced = equal_chunk_decisions(n, mode.chunks);
  }

  EncodeOutput out;
  EncodeCache& cache = out.cache;
  EncodeResult& result = out.result;
  cache.frames = f.frames;
  cache.embedded = embed_input(p, f);

  std::vector<Vec> layer1_inputs = cache.embedded;
  if (opts.input_retain < 1.0) {
    for (Vec& x : layer1_inputs) {
      Vec mask = dropout_mask(x.size(), opts.input_retain, *rng);
      x = mask.cwiseProduct(x);
      cache.input_mask.push_back(std::move(mask));
    }
  }

  BoundaryState state = zero_boundary_state(p.layer1.hidden_dim());
  for (Index t = 1; t <= n; ++t) {
    TauMode tau = TauMode::kForced;
    int forced_s = 0;
    switch (mode.kind) {
      case BoundaryMode::Kind::kLearnedTrain:
        tau = TauMode::kStochastic;
        break;
      case BoundaryMode::Kind::kLearnedTest:
        tau = TauMode::kDeterministic;
        break;
      case BoundaryMode::Kind::kForced:
      case BoundaryMode::Kind::kEqualChunks:
        forced_s = forced[static_cast<std::size_t>(t - 1)];
        break;
    }
    BoundaryStepOut step = boundary_lstm_step(p.layer1, p.boundary,
                                              layer1_inputs[static_cast<std::size_t>(t - 1)],
                                              state, tau, rng, forced_s);
    result.per_step_logits.push_back(step.cache.logit);
    if (step.emitted) {
      cache.summaries_raw.push_back(std::move(*step.emitted));
      cache.summary_step.push_back(t);
      result.boundaries.push_back(t);
    }
    cache.layer1.push_back(std::move(step.cache));
    state = std::move(step.next);
  }
  // Closing summary: the final hidden state always ends the last segment.
  cache.summaries_raw.push_back(state.h);
  cache.summary_step.push_back(n + 1);

  run_layer2(p, rng, opts.summary_retain, result, cache);
  return out;
}

EncodeOutput encode_soft(const EncoderParams& p, const FeatureSequence& f,
                         const EncodeOptions& opts) {
  const Index n = f.length();
  if (n == 0) throw std::invalid_argument("encode_soft: empty feature sequence");
  if (opts.input_retain < 1.0 || opts.summary_retain < 1.0) {
    throw std::invalid_argument("encode_soft: dropout is not supported in the relaxation");
  }

  EncodeOutput out;
  EncodeCache& cache = out.cache;
  EncodeResult& result = out.result;
  cache.soft = true;
  cache.frames = f.frames;
  cache.embedded = embed_input(p, f);

  Vec h = Vec::Zero(p.layer1.hidden_dim());
  Vec c = Vec::Zero(p.layer1.hidden_dim());
  for (Index t = 1; t <= n; ++t) {
    SoftBoundaryStepOut step =
        boundary_lstm_step_soft(p.layer1, p.boundary,
                                cache.embedded[static_cast<std::size_t>(t - 1)], h, c);
    result.per_step_logits.push_back(step.cache.logit);
    cache.summaries_raw.push_back(std::move(step.emitted));
    cache.summary_step.push_back(t);
    cache.layer1.push_back(std::move(step.cache));
    h = std::move(step.h);
    c = std::move(step.c);
  }
  cache.summaries_raw.push_back(h);
  cache.summary_step.push_back(n + 1);

  run_layer2(p, nullptr, 1.0, result, cache);
  return out;
}

void encode_backward(const EncoderParams& p, const EncodeCache& cache, const Vec& d_video,
                     EncoderParams& grad) {
  const Index n = static_cast<Index>(cache.layer1.size());
  const std::size_t n_summaries = cache.summaries_raw.size();

  // Layer 2 backward: from the final hidden state to each summary input.
  std::vector<Vec> d_summary(n_summaries);
  Vec dh2 = d_video;
  Vec dc2 = Vec::Zero(p.layer2.hidden_dim());
  for (std::size_t j = n_summaries; j-- > 0;) {
    LstmStepGradOut g = lstm_step_backward(p.layer2, cache.layer2[j], dh2, dc2, grad.layer2);
    dh2 = std::move(g.dh_prev);
    dc2 = std::move(g.dc_prev);
    if (!cache.summary_mask.empty()) g.dx = cache.summary_mask[j].cwiseProduct(g.dx);
    d_summary[j] = std::move(g.dx);
  }

  // Route each summary gradient to the step whose decision emitted it; the
  // closing summary is the final hidden state itself.
  std::unordered_map<Index, const Vec*> d_emitted_at;
  Vec dh1 = Vec::Zero(p.layer1.hidden_dim());
  Vec dc1 = Vec::Zero(p.layer1.hidden_dim());
  for (std::size_t j = 0; j < n_summaries; ++j) {
    if (cache.summary_step[j] == n + 1) {
      dh1 += d_summary[j];
    } else {
      d_emitted_at[cache.summary_step[j]] = &d_summary[j];
    }
  }

  // Layer 1 backward through the boundary-aware steps.
  std::vector<Vec> dx(static_cast<std::size_t>(n));
  for (Index t = n; t >= 1; --t) {
    auto it = d_emitted_at.find(t);
    const Vec* d_emitted = it == d_emitted_at.end() ? nullptr : it->second;
    BoundaryStepGradOut g =
        boundary_lstm_step_backward(p.layer1, p.boundary, cache.layer1[static_cast<std::size_t>(t - 1)],
                                    dh1, dc1, d_emitted, grad.layer1, grad.boundary);
    dh1 = std::move(g.dh_in);
    dc1 = std::move(g.dc_in);
    dx[static_cast<std::size_t>(t - 1)] = std::move(g.dx);
  }

  // Embedding backward, undoing input dropout where it was applied.
  for (Index t = 0; t < n; ++t) {
    Vec de = std::move(dx[static_cast<std::size_t>(t)]);
    if (!cache.input_mask.empty()) {
      de = cache.input_mask[static_cast<std::size_t>(t)].cwiseProduct(de);
    }
    grad.W_embed.noalias() += de * cache.frames[static_cast<std::size_t>(t)].transpose();
    grad.b_embed += de;
  }
}

BoundaryStats boundary_statistics(const std::vector<EncodeResult>& results) {
  if (results.empty()) {
    throw std::invalid_argument("boundary_statistics: empty result list");
  }
  BoundaryStats stats;
  std::size_t max_count = 0;
  for (const EncodeResult& r : results) max_count = std::max(max_count, r.boundaries.size());
  stats.count_histogram.assign(max_count + 1, 0);
  for (const EncodeResult& r : results) {
    stats.count_histogram[r.boundaries.size()] += 1;
    const Index n = r.length();
    for (Index t : r.boundaries) {
      const auto bin = static_cast<std::size_t>(
          std::min<Index>(99, (100 * t) / n));
      stats.position_histogram[bin] += 1;
    }
  }
  return stats;
}

}  // namespace bacap
