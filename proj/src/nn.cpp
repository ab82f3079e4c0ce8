#include "reco/nn.hpp"

#include <algorithm>
#include <cmath>

#include "reco/rng.hpp"

namespace reco {

namespace {
void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}
} // namespace

Tensor2D affine_forward(const Tensor2D& x, const Tensor2D& w,
                        const Tensor2D& b) {
  require(x.cols() == w.rows(), "affine_forward: x/w shape mismatch");
  require(b.rows() == 1 && b.cols() == w.cols(),
          "affine_forward: bias shape mismatch");
  Tensor2D y = matmul(x, w);
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double* yi = y.row(i);
    const double* bb = b.row(0);
    for (std::size_t j = 0; j < y.cols(); ++j) yi[j] += bb[j];
  }
  return y;
}

AffineGrads affine_backward(const Tensor2D& dy, const Tensor2D& x,
                            const Tensor2D& w) {
  require(dy.rows() == x.rows() && dy.cols() == w.cols(),
          "affine_backward: shape mismatch");
  AffineGrads g;
  g.dx = matmul_nt(dy, w);   // N×in
  g.dw = matmul_tn(x, dy);   // in×out
  g.db = col_sums(dy);       // 1×out
  return g;
}

Tensor2D relu_forward(const Tensor2D& x) {
  Tensor2D y = x;
  double* p = y.data();
  for (std::size_t i = 0; i < y.size(); ++i) p[i] = p[i] > 0.0 ? p[i] : 0.0;
  return y;
}

Tensor2D relu_backward(const Tensor2D& dy, const Tensor2D& x) {
  require(dy.same_shape(x), "relu_backward: shape mismatch");
  Tensor2D dx = dy;
  double* d = dx.data();
  const double* xp = x.data();
  for (std::size_t i = 0; i < dx.size(); ++i)
    if (xp[i] <= 0.0) d[i] = 0.0;
  return dx;
}

Tensor2D sigmoid_forward(const Tensor2D& x) {
  Tensor2D y = x;
  double* p = y.data();
  for (std::size_t i = 0; i < y.size(); ++i) p[i] = 1.0 / (1.0 + std::exp(-p[i]));
  return y;
}

Tensor2D sigmoid_backward(const Tensor2D& dy, const Tensor2D& y) {
  require(dy.same_shape(y), "sigmoid_backward: shape mismatch");
  Tensor2D dx = dy;
  double* d = dx.data();
  const double* yp = y.data();
  for (std::size_t i = 0; i < dx.size(); ++i) d[i] *= yp[i] * (1.0 - yp[i]);
  return dx;
}

Tensor2D softmax_rowwise(const Tensor2D& x) {
  Tensor2D y = x;
  for (std::size_t i = 0; i < y.rows(); ++i) {
    double* r = y.row(i);
    double mx = r[0];
    for (std::size_t j = 1; j < y.cols(); ++j) mx = std::max(mx, r[j]);
    double sum = 0.0;
    for (std::size_t j = 0; j < y.cols(); ++j) {
      r[j] = std::exp(r[j] - mx);
      sum += r[j];
    }
    for (std::size_t j = 0; j < y.cols(); ++j) r[j] /= sum;
  }
  return y;
}

Tensor2D softmax_rowwise_backward(const Tensor2D& dy, const Tensor2D& y) {
  require(dy.same_shape(y), "softmax_backward: shape mismatch");
  Tensor2D dx(dy.rows(), dy.cols());
  for (std::size_t i = 0; i < dy.rows(); ++i) {
    const double* dyr = dy.row(i);
    const double* yr = y.row(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < dy.cols(); ++j) dot += dyr[j] * yr[j];
    double* dxr = dx.row(i);
    for (std::size_t j = 0; j < dy.cols(); ++j)
      dxr[j] = yr[j] * (dyr[j] - dot);
  }
  return dx;
}

Tensor2D dropout_forward(const Tensor2D& x, double mask_prob, bool train,
                         std::uint64_t seed, Tensor2D* mask) {
  require(mask_prob >= 0.0 && mask_prob < 1.0, "dropout: bad mask_prob");
  if (mask) *mask = Tensor2D(x.rows(), x.cols(), 1.0);
  if (!train || mask_prob == 0.0) return x;
  Tensor2D y = x;
  auto eng = make_engine(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - mask_prob);
  double* yp = y.data();
  double* mp = mask ? mask->data() : nullptr;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double m = u(eng) < mask_prob ? 0.0 : keep_scale;
    yp[i] *= m;
    if (mp) mp[i] = m;
  }
  return y;
}

Tensor2D dropout_backward(const Tensor2D& dy, const Tensor2D& mask) {
  require(dy.same_shape(mask), "dropout_backward: shape mismatch");
  Tensor2D dx = dy;
  double* d = dx.data();
  const double* m = mask.data();
  for (std::size_t i = 0; i < dx.size(); ++i) d[i] *= m[i];
  return dx;
}

BceResult bce_loss(const Tensor2D& probs, const Tensor2D& labels) {
  require(probs.same_shape(labels), "bce_loss: shape mismatch");
  require(probs.size() > 0, "bce_loss: empty batch");
  const double eps = 1e-7;
  const std::size_t n = probs.size();
  BceResult r;
  r.dprobs = Tensor2D(probs.rows(), probs.cols());
  double loss = 0.0;
  const double* p = probs.data();
  const double* yv = labels.data();
  double* d = r.dprobs.data();
  for (std::size_t i = 0; i < n; ++i) {
    require(yv[i] == 0.0 || yv[i] == 1.0, "bce_loss: labels must be 0/1");
    const double pc = std::clamp(p[i], eps, 1.0 - eps);
    loss += yv[i] * std::log(pc) + (1.0 - yv[i]) * std::log(1.0 - pc);
    d[i] = -(yv[i] / pc - (1.0 - yv[i]) / (1.0 - pc)) / static_cast<double>(n);
  }
  r.loss = -loss / static_cast<double>(n);
  return r;
}

} // namespace reco
