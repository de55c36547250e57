#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "bacap/model.hpp"
#include "bacap/training.hpp"
#include "test_support.hpp"

using namespace bacap;

namespace {

ModelDims small_dims() {
  ModelDims d;
  d.feature_dim = 4;
  d.embed_dim = 4;
  d.hidden_dim = 4;
  d.vocab_size = 8;
  return d;
}

}  // namespace

TEST_CASE("init_model shapes, orthogonal recurrences, zero biases") {
  Rng rng(80);
  ModelParams m = init_model(small_dims(), rng);
  CHECK(dims_of(m) == small_dims());

  // Hidden-to-hidden matrices start orthogonal.
  for (const Mat* w : {&m.encoder.layer1.W_ih, &m.encoder.layer1.W_fh, &m.encoder.layer1.W_gh,
                       &m.encoder.layer1.W_oh, &m.encoder.boundary.W_sh, &m.encoder.layer2.W_ih,
                       &m.decoder.gru.W_zh, &m.decoder.gru.W_rh, &m.decoder.gru.W_hh}) {
    const Mat gram = w->transpose() * (*w) - Mat::Identity(w->rows(), w->cols());
    CHECK(gram.cwiseAbs().maxCoeff() < 1e-10);
  }

  // Biases start at zero.
  for (const Vec* b : {&m.encoder.b_embed, &m.encoder.layer1.b_i, &m.encoder.layer1.b_f,
                       &m.encoder.boundary.b_s, &m.decoder.gru.b_z, &m.decoder.gru.b_h}) {
    CHECK(*b == Vec::Zero(b->size()));
  }

  // Input-side matrices are non-degenerate draws.
  CHECK(m.encoder.W_embed.cwiseAbs().maxCoeff() > 0.0);
  CHECK(m.decoder.W_w.cwiseAbs().maxCoeff() > 0.0);
  CHECK(m.encoder.boundary.v_s.cwiseAbs().maxCoeff() > 0.0);

  // Determinism per seed.
  Rng rng2(80);
  ModelParams m2 = init_model(small_dims(), rng2);
  auto ra = tensor_refs(m);
  auto rb = tensor_refs(m2);
  REQUIRE(ra.size() == rb.size());
  for (std::size_t k = 0; k < ra.size(); ++k) {
    for (Index i = 0; i < ra[k].size(); ++i) CHECK(ra[k].data()[i] == rb[k].data()[i]);
  }
}

TEST_CASE("every tensor appears exactly once in the model enumeration") {
  Rng rng(81);
  ModelParams m = init_model(small_dims(), rng);
  auto refs = tensor_refs(m);
  std::set<std::string> names;
  std::set<const double*> datas;
  for (const TensorRef& r : refs) {
    CHECK(names.insert(r.name).second);
    CHECK(datas.insert(r.data()).second);
    CHECK(r.size() > 0);
  }
  // Spot-check the fully qualified naming scheme.
  CHECK(names.count("encoder.W_embed") == 1);
  CHECK(names.count("encoder.layer1.W_ix") == 1);
  CHECK(names.count("encoder.boundary.v_s") == 1);
  CHECK(names.count("encoder.layer2.W_oh") == 1);
  CHECK(names.count("decoder.gru.W_zv") == 1);
  CHECK(names.count("decoder.W_w") == 1);
  CHECK(names.count("decoder.W_p") == 1);
  // 2 embedding + 12 + 4 + 12 encoder tensors, 12 + 2 decoder tensors.
  CHECK(refs.size() == 44);
}

TEST_CASE("gradient struct mirrors the parameter struct tensor for tensor") {
  Rng rng(82);
  ModelParams m = init_model(small_dims(), rng);
  ModelParams g = zeros_like(m);
  auto mr = tensor_refs(m);
  auto gr = tensor_refs(g);
  REQUIRE(mr.size() == gr.size());
  for (std::size_t k = 0; k < mr.size(); ++k) {
    CHECK(mr[k].name == gr[k].name);
    CHECK(mr[k].rows() == gr[k].rows());
    CHECK(mr[k].cols() == gr[k].cols());
    for (Index i = 0; i < gr[k].size(); ++i) CHECK(gr[k].data()[i] == 0.0);
  }
}

TEST_CASE("model_forward requires an rng for sampled boundaries") {
  Rng rng(83);
  ModelParams m = init_model(small_dims(), rng);
  const Sample s = testsup::random_sample("v", 6, 4, 2, 8, rng);
  CHECK_THROWS_AS(model_forward(m, s.features, s.caption, BoundaryMode::learned_train(), nullptr),
                  std::invalid_argument);
}

TEST_CASE("frozen-boundary gradient check on a random small model") {
  Rng rng(84);
  ModelParams m = init_model(small_dims(), rng);
  const Sample s = testsup::random_sample("v", 8, 4, 3, 8, rng);
  const GradCheckResult r = grad_check_frozen(m, s, 1234);
  INFO("worst tensor: " << r.worst_tensor);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("soft-relaxation gradient check on a random small model") {
  Rng rng(85);
  ModelParams m = init_model(small_dims(), rng);
  const Sample s = testsup::random_sample("v", 8, 4, 3, 8, rng);
  const GradCheckResult r = grad_check_soft(m, s);
  INFO("worst tensor: " << r.worst_tensor);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("gradient check degrades gracefully on an all-zero model") {
  ModelParams m = make_model(small_dims());
  Rng rng(86);
  const Sample s = testsup::random_sample("v", 5, 4, 2, 8, rng);
  const GradCheckResult frozen = grad_check_frozen(m, s, 99);
  CHECK(frozen.max_rel_error < 1e-6);
  const GradCheckResult soft = grad_check_soft(m, s);
  CHECK(soft.max_rel_error < 1e-6);
}

TEST_CASE("duplicating a sample in a batch doubles its gradient contribution") {
  Rng rng(87);
  ModelParams m = init_model(small_dims(), rng);
  const Sample s = testsup::random_sample("v", 7, 4, 3, 8, rng);

  const ModelForward fwd = model_forward(m, s.features, s.caption, BoundaryMode::learned_test());

  ModelParams twice = zeros_like(m);
  model_backward(m, fwd, 0.5, twice);
  model_backward(m, fwd, 0.5, twice);
  ModelParams once = zeros_like(m);
  model_backward(m, fwd, 1.0, once);

  auto ta = tensor_refs(twice);
  auto oa = tensor_refs(once);
  for (std::size_t k = 0; k < ta.size(); ++k) {
    for (Index i = 0; i < ta[k].size(); ++i) {
      CHECK(std::abs(ta[k].data()[i] - oa[k].data()[i]) < 1e-12);
    }
  }
}

TEST_CASE("soft forward loss is finite and caches mark the relaxation") {
  Rng rng(88);
  ModelParams m = init_model(small_dims(), rng);
  const Sample s = testsup::random_sample("v", 6, 4, 2, 8, rng);
  const ModelForward fwd = model_forward_soft(m, s.features, s.caption);
  CHECK(std::isfinite(fwd.loss));
  CHECK(fwd.loss >= 0.0);
  CHECK(fwd.enc_cache.soft);
}
