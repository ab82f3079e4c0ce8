#include "reco/serial_ref.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include <cmath>
#include <numbers>

namespace reco::serial {

Tensor2D matmul_naive(const Tensor2D& a, const Tensor2D& b) {
  if (a.cols() != b.rows())
    throw std::invalid_argument("matmul_naive: inner dimensions differ");
  Tensor2D c(a.rows(), b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a.at(i, p) * b.at(p, j);
      c.at(i, j) = s;
    }
  return c;
}

SimilarityMatrix cross_occurrence_serial(
    const SparseInteractionMatrix& primary,
    const SparseInteractionMatrix& secondary, double llr_threshold,
    std::size_t max_correlators) {
  std::set<std::string> universe(primary.row_ids().begin(),
                                 primary.row_ids().end());
  universe.insert(secondary.row_ids().begin(), secondary.row_ids().end());
  const long long n_universe = static_cast<long long>(universe.size());
  const bool same_targets = primary.col_ids() == secondary.col_ids();

  SimilarityMatrix sim;
  for (std::size_t b = 0; b < primary.n_cols(); ++b) {
    // Actor id set of item b.
    std::set<std::string> b_actors;
    for (std::size_t r : primary.col(b)) b_actors.insert(primary.row_ids()[r]);

    std::vector<SimilarityEntry> kept;
    for (std::size_t a = 0; a < secondary.n_cols(); ++a) {
      if (same_targets && secondary.col_ids()[a] == primary.col_ids()[b])
        continue;
      long long k11 = 0;
      for (std::size_t r : secondary.col(a))
        if (b_actors.count(secondary.row_ids()[r])) ++k11;
      if (k11 == 0) continue;
      const long long k12 = static_cast<long long>(secondary.col(a).size()) - k11;
      const long long k21 = static_cast<long long>(primary.col(b).size()) - k11;
      const long long k22 = n_universe - k11 - k12 - k21;
      const double score = llr(k11, k12, k21, k22);
      if (score > llr_threshold)
        kept.push_back(SimilarityEntry{secondary.col_ids()[a], score});
    }
    std::sort(kept.begin(), kept.end(),
              [](const SimilarityEntry& x, const SimilarityEntry& y) {
                if (x.score != y.score) return x.score > y.score;
                return x.item < y.item;
              });
    if (kept.size() > max_correlators) kept.resize(max_correlators);
    if (!kept.empty()) sim.by_item[primary.col_ids()[b]] = std::move(kept);
  }
  return sim;
}

std::vector<int> kmeans_assign_serial(const Tensor2D& points,
                                      const Tensor2D& centroids) {
  if (points.cols() != centroids.cols())
    throw std::invalid_argument("kmeans_assign_serial: dimension mismatch");
  std::vector<int> out(points.rows(), 0);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
      double dist = 0.0;
      for (std::size_t j = 0; j < points.cols(); ++j) {
        const double diff = points.at(i, j) - centroids.at(c, j);
        dist += diff * diff;
      }
      if (dist < best) {
        best = dist;
        out[i] = static_cast<int>(c);
      }
    }
  }
  return out;
}

std::vector<std::complex<double>> dft_naive(
    const std::vector<std::complex<double>>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> s(0.0, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      const double ang = -2.0 * std::numbers::pi *
                         static_cast<double>(k) * static_cast<double>(t) /
                         static_cast<double>(n);
      s += x[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = s;
  }
  return out;
}

} // namespace reco::serial
