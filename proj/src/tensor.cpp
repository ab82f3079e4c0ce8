#include "reco/tensor.hpp"

#include <cmath>

#include "reco/threading.hpp"

namespace reco {

namespace {
void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}
} // namespace

void Tensor2D::axpy_(double alpha, const Tensor2D& other) {
  require(same_shape(other), "axpy_: shape mismatch");
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += alpha * other.v_[i];
}

void Tensor2D::scale_(double alpha) {
  for (double& x : v_) x *= alpha;
}

Tensor2D matmul(const Tensor2D& a, const Tensor2D& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  const long m = static_cast<long>(a.rows());
  const std::size_t k = a.cols(), n = b.cols();
  Tensor2D c(a.rows(), n, 0.0);
  const long work = m * static_cast<long>(k) * static_cast<long>(n);
#pragma omp parallel for schedule(static) if (work > kParallelGrainsize)
  for (long i = 0; i < m; ++i) {
    double* ci = c.row(static_cast<std::size_t>(i));
    const double* ai = a.row(static_cast<std::size_t>(i));
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      const double* bp = b.row(p);
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
  return c;
}

Tensor2D matmul_tn(const Tensor2D& a, const Tensor2D& b) {
  require(a.rows() == b.rows(), "matmul_tn: inner dimensions differ");
  const long m = static_cast<long>(a.cols());
  const std::size_t k = a.rows(), n = b.cols();
  Tensor2D c(a.cols(), n, 0.0);
  const long work = m * static_cast<long>(k) * static_cast<long>(n);
#pragma omp parallel for schedule(static) if (work > kParallelGrainsize)
  for (long i = 0; i < m; ++i) {
    double* ci = c.row(static_cast<std::size_t>(i));
    for (std::size_t p = 0; p < k; ++p) {
      const double api = a.at(p, static_cast<std::size_t>(i));
      const double* bp = b.row(p);
      for (std::size_t j = 0; j < n; ++j) ci[j] += api * bp[j];
    }
  }
  return c;
}

Tensor2D matmul_nt(const Tensor2D& a, const Tensor2D& b) {
  require(a.cols() == b.cols(), "matmul_nt: inner dimensions differ");
  const long m = static_cast<long>(a.rows());
  const std::size_t k = a.cols(), n = b.rows();
  Tensor2D c(a.rows(), n, 0.0);
  const long work = m * static_cast<long>(k) * static_cast<long>(n);
#pragma omp parallel for schedule(static) if (work > kParallelGrainsize)
  for (long i = 0; i < m; ++i) {
    double* ci = c.row(static_cast<std::size_t>(i));
    const double* ai = a.row(static_cast<std::size_t>(i));
    for (std::size_t j = 0; j < n; ++j) {
      const double* bj = b.row(j);
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] = s;
    }
  }
  return c;
}

Tensor2D transpose(const Tensor2D& a) {
  Tensor2D t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t.at(j, i) = a.at(i, j);
  return t;
}

Tensor2D col_sums(const Tensor2D& a) {
  Tensor2D s(1, a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.row(i);
    for (std::size_t j = 0; j < a.cols(); ++j) s.at(0, j) += ai[j];
  }
  return s;
}

void check_finite(const Tensor2D& a, const std::string& what) {
  const double* p = a.data();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(p[i]))
      throw std::runtime_error("non-finite value in " + what);
  }
}

} // namespace reco
