#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace reco {

// Dense row-major matrix of doubles. Value-like: copy/move freely.
class Tensor2D {
 public:
  Tensor2D() : rows_(0), cols_(0) {}
  Tensor2D(std::size_t rows, std::size_t cols, double init = 0.0)
      : rows_(rows), cols_(cols), v_(rows * cols, init) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return v_.size(); }

  double& at(std::size_t r, std::size_t c) { return v_[r * cols_ + c]; }
  double at(std::size_t r, std::size_t c) const { return v_[r * cols_ + c]; }

  double* row(std::size_t r) { return v_.data() + r * cols_; }
  const double* row(std::size_t r) const { return v_.data() + r * cols_; }

  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }

  bool same_shape(const Tensor2D& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

  void fill(double x) { v_.assign(v_.size(), x); }

  // this += alpha * other
  void axpy_(double alpha, const Tensor2D& other);
  void add_(const Tensor2D& other) { axpy_(1.0, other); }
  void sub_(const Tensor2D& other) { axpy_(-1.0, other); }
  void scale_(double alpha);

 private:
  std::size_t rows_, cols_;
  std::vector<double> v_;
};

// C = A · B. A is m×k, B is k×n. Each output element accumulates over k in
// ascending order, so the result is bit-identical at any thread count.
Tensor2D matmul(const Tensor2D& a, const Tensor2D& b);

// C = Aᵀ · B. A is k×m, B is k×n, C is m×n.
Tensor2D matmul_tn(const Tensor2D& a, const Tensor2D& b);

// C = A · Bᵀ. A is m×k, B is n×k, C is m×n.
Tensor2D matmul_nt(const Tensor2D& a, const Tensor2D& b);

Tensor2D transpose(const Tensor2D& a);

// Column sums as a 1×cols tensor (bias gradients).
Tensor2D col_sums(const Tensor2D& a);

// NaN/Inf anywhere is a contract violation.
void check_finite(const Tensor2D& a, const std::string& what);

} // namespace reco
