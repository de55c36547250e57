#include "bacap/numerics.hpp"

#include <Eigen/QR>

namespace bacap {

Mat glorot_init(Index rows, Index cols, Rng& rng) {
  if (rows < 1 || cols < 1) throw std::invalid_argument("glorot_init: dimensions must be >= 1");
  const double stddev = std::sqrt(2.0 / static_cast<double>(rows + cols));
  Mat m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      m(i, j) = stddev * rng.gaussian();
    }
  }
  return m;
}

Mat orthogonal_init(Index dim, Rng& rng) {
  if (dim < 1) throw std::invalid_argument("orthogonal_init: dim must be >= 1");
  Mat a(dim, dim);
  for (Index i = 0; i < dim; ++i) {
    for (Index j = 0; j < dim; ++j) {
      a(i, j) = rng.gaussian();
    }
  }
  Eigen::HouseholderQR<Mat> qr(a);
  Mat q = qr.householderQ();
  const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < dim; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

double finite_diff_grad(const std::function<double(double)>& loss_fn, double theta, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_grad: eps must be > 0");
  const double fp = loss_fn(theta + eps);
  const double fm = loss_fn(theta - eps);
  if (!std::isfinite(fp) || !std::isfinite(fm)) {
    throw NumericError("finite_diff_grad: non-finite loss");
  }
  return (fp - fm) / (2.0 * eps);
}

}  // namespace bacap
