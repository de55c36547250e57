#include <doctest.h>

#include <cmath>
#include <limits>
#include <string>

#include "bacap/training.hpp"
#include "test_support.hpp"

using namespace bacap;

namespace {

ModelDims tiny_dims() {
  ModelDims d;
  d.feature_dim = 4;
  d.embed_dim = 4;
  d.hidden_dim = 4;
  d.vocab_size = 8;
  return d;
}

void fill_grads(ModelParams& g, double value) {
  for (TensorRef& r : tensor_refs(g)) {
    for (Index i = 0; i < r.size(); ++i) r.data()[i] = value;
  }
}

}  // namespace

TEST_CASE("adadelta five-step scalar trace with unit gradients") {
  const ModelDims unit{1, 1, 1, 1};
  ModelParams params = make_model(unit);
  OptimizerState state = make_optimizer_state(params);
  const AdadeltaConfig cfg;

  // Independent scalar recurrence: every coordinate follows the same path.
  double eg = 0.0, ex = 0.0, x = 0.0;
  double first_delta = 0.0;
  for (int step = 1; step <= 5; ++step) {
    ModelParams grads = zeros_like(params);
    fill_grads(grads, 1.0);
    adadelta_step(cfg, state, params, grads);

    eg = cfg.rho * eg + (1.0 - cfg.rho) * 1.0;
    const double dx = -cfg.lr * std::sqrt(ex + cfg.eps) / std::sqrt(eg + cfg.eps);
    ex = cfg.rho * ex + (1.0 - cfg.rho) * dx * dx;
    x += dx;
    if (step == 1) first_delta = dx;

    for (TensorRef& r : tensor_refs(params)) {
      for (Index i = 0; i < r.size(); ++i) CHECK(std::abs(r.data()[i] - x) < 1e-9);
    }
  }
  CHECK(std::abs(first_delta - (-0.0044721)) < 1e-6);  // hand-derived first update
  CHECK(first_delta == doctest::Approx(-0.004472091234310839).epsilon(1e-12));
}

TEST_CASE("adadelta first-step accumulator value") {
  const ModelDims unit{1, 1, 1, 1};
  ModelParams params = make_model(unit);
  OptimizerState state = make_optimizer_state(params);
  ModelParams grads = zeros_like(params);
  fill_grads(grads, 1.0);
  adadelta_step(AdadeltaConfig{}, state, params, grads);
  for (TensorRef& r : tensor_refs(state.grad_sq)) {
    for (Index i = 0; i < r.size(); ++i) {
      CHECK(r.data()[i] == doctest::Approx(0.05).epsilon(1e-15));
    }
  }
}

TEST_CASE("adadelta with zero gradients only decays the accumulators") {
  ModelParams params = make_model(tiny_dims());
  OptimizerState state = make_optimizer_state(params);
  const AdadeltaConfig cfg;

  ModelParams grads = zeros_like(params);
  fill_grads(grads, 1.0);
  adadelta_step(cfg, state, params, grads);  // populate the accumulators

  const ModelParams before = params;
  const OptimizerState acc_before = state;
  ModelParams zero = zeros_like(params);
  adadelta_step(cfg, state, params, zero);

  auto pb = tensor_refs(const_cast<ModelParams&>(before));
  auto pa = tensor_refs(params);
  for (std::size_t k = 0; k < pa.size(); ++k) {
    for (Index i = 0; i < pa[k].size(); ++i) CHECK(pa[k].data()[i] == pb[k].data()[i]);
  }
  auto gb = tensor_refs(const_cast<ModelParams&>(acc_before.grad_sq));
  auto ga = tensor_refs(state.grad_sq);
  auto ub = tensor_refs(const_cast<ModelParams&>(acc_before.update_sq));
  auto ua = tensor_refs(state.update_sq);
  for (std::size_t k = 0; k < ga.size(); ++k) {
    for (Index i = 0; i < ga[k].size(); ++i) {
      CHECK(ga[k].data()[i] == doctest::Approx(cfg.rho * gb[k].data()[i]).epsilon(1e-15));
      CHECK(ua[k].data()[i] == doctest::Approx(cfg.rho * ub[k].data()[i]).epsilon(1e-15));
    }
  }
}

TEST_CASE("adadelta updates oppose the gradient sign and respect the first-step bound") {
  Rng rng(90);
  ModelParams params = make_model(tiny_dims());
  OptimizerState state = make_optimizer_state(params);
  const AdadeltaConfig cfg;

  ModelParams grads = zeros_like(params);
  for (TensorRef& r : tensor_refs(grads)) {
    for (Index i = 0; i < r.size(); ++i) {
      r.data()[i] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * std::pow(10.0, rng.uniform_int(-3, 6));
    }
  }
  const ModelParams grads_copy = grads;
  adadelta_step(cfg, state, params, grads);

  auto pr = tensor_refs(params);
  auto gr = tensor_refs(const_cast<ModelParams&>(grads_copy));
  const double bound = cfg.lr * std::sqrt((0.0 + cfg.eps) / cfg.eps);
  for (std::size_t k = 0; k < pr.size(); ++k) {
    for (Index i = 0; i < pr[k].size(); ++i) {
      const double delta = pr[k].data()[i];  // params started at zero
      const double g = gr[k].data()[i];
      CHECK(delta * g < 0.0);  // strict opposition for nonzero gradients
      CHECK(std::abs(delta) <= bound);
    }
  }
}

TEST_CASE("adadelta rejects non-finite gradients before touching anything") {
  ModelParams params = make_model(tiny_dims());
  OptimizerState state = make_optimizer_state(params);
  ModelParams grads = zeros_like(params);
  fill_grads(grads, 1.0);
  adadelta_step(AdadeltaConfig{}, state, params, grads);

  const ModelParams params_before = params;
  const OptimizerState state_before = state;
  ModelParams bad = zeros_like(params);
  fill_grads(bad, 1.0);
  bad.decoder.W_p(0, 0) = std::numeric_limits<double>::quiet_NaN();

  CHECK_THROWS_AS(adadelta_step(AdadeltaConfig{}, state, params, bad), NumericError);

  auto pa = tensor_refs(params);
  auto pb = tensor_refs(const_cast<ModelParams&>(params_before));
  auto sa = tensor_refs(state.grad_sq);
  auto sb = tensor_refs(const_cast<OptimizerState&>(state_before).grad_sq);
  for (std::size_t k = 0; k < pa.size(); ++k) {
    for (Index i = 0; i < pa[k].size(); ++i) {
      CHECK(pa[k].data()[i] == pb[k].data()[i]);
      CHECK(sa[k].data()[i] == sb[k].data()[i]);
    }
  }
}

TEST_CASE("apply_dropout identity cases") {
  Rng rng(91);
  const Vec x = testsup::random_vec(6, rng);

  Rng fresh_a(5), fresh_b(5);
  CHECK(apply_dropout(x, 1.0, fresh_a, Phase::kTrain) == x);
  CHECK(fresh_a.uniform() == fresh_b.uniform());  // retain=1 consumes nothing

  Rng fresh_c(6), fresh_d(6);
  CHECK(apply_dropout(x, 0.3, fresh_c, Phase::kTest) == x);
  CHECK(fresh_c.uniform() == fresh_d.uniform());  // test phase consumes nothing
}

TEST_CASE("apply_dropout at retain 0.5 preserves the expectation") {
  Rng rng(92);
  const Vec x = Vec::Constant(10, 3.0);
  double sum = 0.0;
  const int reps = 100000;
  for (int rep = 0; rep < reps; ++rep) {
    const Vec y = apply_dropout(x, 0.5, rng, Phase::kTrain);
    for (Index i = 0; i < y.size(); ++i) {
      CHECK((y(i) == 0.0 || y(i) == 6.0));
      sum += y(i);
    }
  }
  CHECK(sum / (10.0 * reps) == doctest::Approx(3.0).epsilon(0.01));
}

TEST_CASE("train stops after one epoch when patience is zero and nothing improves") {
  Rng rng(93);
  const ModelParams m = init_model(tiny_dims(), rng);
  std::vector<Sample> data{testsup::random_sample("a", 6, 4, 2, 8, rng)};

  TrainConfig cfg;
  cfg.batch_size = 1;
  cfg.dropout_retain = 1.0;
  cfg.max_epochs = 10;
  cfg.patience = 0;
  cfg.seed = 7;
  cfg.adadelta.lr = 0.0;  // parameters frozen, so validation can never improve

  const TrainResult r = train(m, cfg, data, data);
  CHECK(r.log.size() == 1);
  CHECK(r.best_epoch == 0);  // the untrained baseline stays best
}

TEST_CASE("training is reproducible from the seed") {
  Rng rng(94);
  const ModelParams m = init_model(tiny_dims(), rng);
  std::vector<Sample> train_set{testsup::random_sample("a", 6, 4, 2, 8, rng),
                                testsup::random_sample("b", 5, 4, 3, 8, rng),
                                testsup::random_sample("c", 7, 4, 2, 8, rng)};
  std::vector<Sample> val_set{testsup::random_sample("d", 6, 4, 2, 8, rng)};

  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.dropout_retain = 0.5;
  cfg.max_epochs = 3;
  cfg.patience = 5;
  cfg.seed = 99;

  const TrainResult r1 = train(m, cfg, train_set, val_set);
  const TrainResult r2 = train(m, cfg, train_set, val_set);
  REQUIRE(r1.log.size() == r2.log.size());
  for (std::size_t i = 0; i < r1.log.size(); ++i) {
    CHECK(r1.log[i].epoch == r2.log[i].epoch);
    CHECK(r1.log[i].train_loss == r2.log[i].train_loss);  // bitwise
    CHECK(r1.log[i].val_loss == r2.log[i].val_loss);
  }
  CHECK(r1.best_epoch == r2.best_epoch);
  CHECK(r1.best_val_loss == r2.best_val_loss);
}

TEST_CASE("validation is deterministic: evaluating twice gives identical losses") {
  Rng rng(95);
  const ModelParams m = init_model(tiny_dims(), rng);
  std::vector<Sample> val_set{testsup::random_sample("a", 6, 4, 2, 8, rng),
                              testsup::random_sample("b", 9, 4, 3, 8, rng)};
  const double l1 = mean_caption_loss(m, val_set);
  const double l2 = mean_caption_loss(m, val_set);
  CHECK(l1 == l2);
  CHECK(std::isfinite(l1));
}

TEST_CASE("single-sample training loss strictly decreases on nearly all seeds") {
  int successes = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(1000 + seed);
    const ModelParams m = init_model(tiny_dims(), rng);
    std::vector<Sample> data{testsup::random_sample("only", 6, 4, 2, 8, rng)};

    TrainConfig cfg;
    cfg.batch_size = 1;
    cfg.dropout_retain = 1.0;
    cfg.max_epochs = 5;
    cfg.patience = 10;
    cfg.seed = seed;

    const TrainResult r = train(m, cfg, data, data);
    REQUIRE(r.log.size() == 5);
    bool strictly_decreasing = true;
    for (std::size_t i = 1; i < r.log.size(); ++i) {
      strictly_decreasing =
          strictly_decreasing && r.log[i].train_loss < r.log[i - 1].train_loss;
    }
    successes += strictly_decreasing ? 1 : 0;
  }
  CHECK(successes >= 19);  // at least 95% of 20 seeds
}

TEST_CASE("a non-finite training loss aborts naming the offending sample") {
  Rng rng(96);
  ModelParams m = init_model(tiny_dims(), rng);
  m.decoder.W_p(0, 0) = std::numeric_limits<double>::quiet_NaN();
  std::vector<Sample> data{testsup::random_sample("poisoned_sample", 6, 4, 2, 8, rng)};

  TrainConfig cfg;
  cfg.batch_size = 1;
  cfg.dropout_retain = 1.0;
  cfg.max_epochs = 1;
  cfg.seed = 3;

  try {
    train(m, cfg, data, data);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("poisoned_sample") != std::string::npos);
  }
}

TEST_CASE("train validates its inputs") {
  Rng rng(97);
  const ModelParams m = init_model(tiny_dims(), rng);
  const std::vector<Sample> data{testsup::random_sample("a", 6, 4, 2, 8, rng)};
  TrainConfig cfg;
  CHECK_THROWS_AS(train(m, cfg, {}, data), std::invalid_argument);
  CHECK_THROWS_AS(train(m, cfg, data, {}), std::invalid_argument);
  cfg.batch_size = 0;
  CHECK_THROWS_AS(train(m, cfg, data, data), std::invalid_argument);
}
