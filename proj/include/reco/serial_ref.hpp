#pragma once

// Plain serial reference implementations of every kernel that runs under
// OpenMP in the main library. These are deliberately naive (textbook loop
// order, no blocking, no threading) and exist so tests and the benchmark can
// compare the parallel kernels against an independent baseline. Production
// code must not link this library.

#include <complex>
#include <vector>

#include "reco/cco.hpp"
#include "reco/tensor.hpp"

namespace reco::serial {

// Textbook ijk triple loop with a local accumulator.
Tensor2D matmul_naive(const Tensor2D& a, const Tensor2D& b);

// O(n²) discrete Fourier transform straight from the definition:
// X[k] = Σ_t x[t]·e^(−2πi·k·t/n), unnormalized.
std::vector<std::complex<double>> dft_naive(
    const std::vector<std::complex<double>>& x);

// Pairwise cross-occurrence: every (a, b) table built by explicit set
// intersection, no shared counting pass, no threading.
SimilarityMatrix cross_occurrence_serial(const SparseInteractionMatrix& primary,
                                         const SparseInteractionMatrix& secondary,
                                         double llr_threshold = 0.0,
                                         std::size_t max_correlators = 50);

// Nearest-centroid sweep, one point at a time (squared Euclidean distance,
// lowest index wins ties).
std::vector<int> kmeans_assign_serial(const Tensor2D& points,
                                      const Tensor2D& centroids);

} // namespace reco::serial
