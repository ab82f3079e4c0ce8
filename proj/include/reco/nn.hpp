#pragma once

#include <cstdint>

#include "reco/tensor.hpp"

namespace reco {

// y = x·w + b, x is N×in, w is in×out, b is 1×out broadcast over rows.
Tensor2D affine_forward(const Tensor2D& x, const Tensor2D& w,
                        const Tensor2D& b);

struct AffineGrads {
  Tensor2D dx, dw, db;
};
AffineGrads affine_backward(const Tensor2D& dy, const Tensor2D& x,
                            const Tensor2D& w);

Tensor2D relu_forward(const Tensor2D& x);
Tensor2D relu_backward(const Tensor2D& dy, const Tensor2D& x);

Tensor2D sigmoid_forward(const Tensor2D& x);
// y is the forward output; dy/dx = y(1-y).
Tensor2D sigmoid_backward(const Tensor2D& dy, const Tensor2D& y);

Tensor2D softmax_rowwise(const Tensor2D& x);
// y is the forward output. ds_i = y_i ⊙ (dy_i − <dy_i, y_i>).
Tensor2D softmax_rowwise_backward(const Tensor2D& dy, const Tensor2D& y);

// Inverted dropout: kept units scaled by 1/(1−p) at train time, eval is
// identity. The mask (0 or 1/(1−p) per element) is written to *mask so the
// backward pass can reuse it.
Tensor2D dropout_forward(const Tensor2D& x, double mask_prob, bool train,
                         std::uint64_t seed, Tensor2D* mask);
Tensor2D dropout_backward(const Tensor2D& dy, const Tensor2D& mask);

struct BceResult {
  double loss;
  Tensor2D dprobs; // gradient of the mean loss wrt each prob
};
// Mean binary cross-entropy. Probabilities are clamped to [ε, 1−ε], ε = 1e-7,
// before the logs; labels must be 0 or 1.
BceResult bce_loss(const Tensor2D& probs, const Tensor2D& labels);

} // namespace reco
