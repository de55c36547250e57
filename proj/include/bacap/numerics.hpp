#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace bacap {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

// Malformed file contents (bad magic, truncated payload, ...).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite values where finite ones are required (losses, gradients).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Derivative of the sigmoid expressed through its value s = sigmoid(x).
inline double sigmoid_deriv_from_value(double s) { return s * (1.0 - s); }

inline Vec sigmoid(const Vec& x) { return x.unaryExpr([](double v) { return sigmoid(v); }); }
inline Vec tanh(const Vec& x) { return x.array().tanh().matrix(); }

// Deterministic generator owned by a single caller; identical seed, identical stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_); }
  double gaussian() { return std::normal_distribution<double>(0.0, 1.0)(gen_); }

  // Integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(gen_);
  }

  // Seed for an independent child stream.
  std::uint64_t fork_seed() { return gen_(); }

 private:
  std::mt19937_64 gen_;
};

// Inverted-dropout mask: each entry is 1/retain with probability `retain` and
// 0 otherwise, so mask .* x has expectation x. retain = 1 consumes no random
// draws and returns all ones.
inline Vec dropout_mask(Index dim, double retain, Rng& rng) {
  if (!(retain > 0.0 && retain <= 1.0)) {
    throw std::invalid_argument("dropout_mask: retain must be in (0, 1]");
  }
  Vec mask = Vec::Ones(dim);
  if (retain == 1.0) return mask;
  for (Index i = 0; i < dim; ++i) {
    mask[i] = rng.uniform() < retain ? 1.0 / retain : 0.0;
  }
  return mask;
}

// Zero-mean Gaussian entries with variance 2/(rows+cols).
Mat glorot_init(Index rows, Index cols, Rng& rng);

// Square Q with Q^T Q = I, from QR of a Gaussian matrix; the triangular
// factor's diagonal is sign-corrected to be positive so the result is
// unique given the seed.
Mat orthogonal_init(Index dim, Rng& rng);

// Named view of one parameter tensor inside a parameter struct.
struct TensorRef {
  std::string name;
  Mat* mat = nullptr;
  Vec* vec = nullptr;

  double* data() const { return mat ? mat->data() : vec->data(); }
  Index size() const { return mat ? mat->size() : vec->size(); }
  Index rows() const { return mat ? mat->rows() : vec->size(); }
  Index cols() const { return mat ? mat->cols() : 1; }
};

// Central differences (f(p+eps) - f(p-eps)) / (2 eps) per coordinate, for any
// parameter struct with a tensor_refs() overload. Returns a same-shaped struct.
template <class Params>
Params finite_diff_grad(const std::function<double(const Params&)>& loss_fn, Params params,
                        double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_grad: eps must be > 0");
  Params grad = params;
  std::vector<TensorRef> pr = tensor_refs(params);
  std::vector<TensorRef> gr = tensor_refs(grad);
  for (std::size_t k = 0; k < pr.size(); ++k) {
    double* p = pr[k].data();
    double* g = gr[k].data();
    for (Index i = 0; i < pr[k].size(); ++i) {
      const double saved = p[i];
      p[i] = saved + eps;
      const double fp = loss_fn(params);
      p[i] = saved - eps;
      const double fm = loss_fn(params);
      p[i] = saved;
      if (!std::isfinite(fp) || !std::isfinite(fm)) {
        throw NumericError("finite_diff_grad: non-finite loss at " + pr[k].name);
      }
      g[i] = (fp - fm) / (2.0 * eps);
    }
  }
  return grad;
}

// Scalar convenience overload.
double finite_diff_grad(const std::function<double(double)>& loss_fn, double theta, double eps);

// Relative error between two gradient coordinates; coordinates where both
// sides are below 1e-12 in magnitude count as an exact match.
// Guarded relative error: relative above unit magnitude, absolute below.
// Comparisons against finite differences need the absolute floor — at step
// 1e-5 a double-precision loss carries roundoff of order 1e-10 per derivative
// estimate, which would swamp a pure ratio on near-zero coordinates.
inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

}  // namespace bacap
