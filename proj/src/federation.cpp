#include "reco/federation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "reco/metrics.hpp"
#include "reco/rng.hpp"
#include "reco/threading.hpp"

namespace reco {

namespace {

const std::set<std::string> kKnownGroups = {"embedding", "interaction",
                                            "output"};

std::vector<std::size_t> shuffled_indices(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  auto eng = make_engine(seed);
  std::shuffle(idx.begin(), idx.end(), eng);
  return idx;
}

// Deal n indices into k nearly equal chunks: the first n % k chunks get one
// extra element.
std::vector<std::vector<std::size_t>> deal(std::size_t n, std::size_t k,
                                           std::uint64_t seed) {
  auto idx = shuffled_indices(n, seed);
  std::vector<std::vector<std::size_t>> chunks(k);
  const std::size_t base = n / k, extra = n % k;
  std::size_t pos = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t take = base + (c < extra ? 1 : 0);
    chunks[c].assign(idx.begin() + pos, idx.begin() + pos + take);
    pos += take;
  }
  return chunks;
}

} // namespace

void RoundConfig::validate() const {
  if (num_clients == 0) throw std::invalid_argument("fed: num_clients == 0");
  if (client_fraction <= 0.0 || client_fraction > 1.0)
    throw std::invalid_argument("fed: client_fraction outside (0,1]");
  if (local_batch == 0) throw std::invalid_argument("fed: local_batch == 0");
  if (noise_sigma < 0.0) throw std::invalid_argument("fed: negative sigma");
  for (const auto& g : federation_plan)
    if (!kKnownGroups.count(g))
      throw std::invalid_argument("fed: unknown plan group " + g);
}

std::vector<ClientPartition> partition_iid(const std::vector<Sample>& train,
                                           const std::vector<Sample>& test,
                                           std::size_t k, std::uint64_t seed) {
  if (k == 0) throw std::invalid_argument("partition_iid: k == 0");
  if (train.size() < k)
    throw std::invalid_argument("partition_iid: fewer samples than clients");
  auto train_chunks = deal(train.size(), k, derive_seed(seed, 0));
  auto test_chunks = deal(test.size(), k, derive_seed(seed, 1));
  std::vector<ClientPartition> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    out[c].client_id = static_cast<int>(c);
    out[c].train.reserve(train_chunks[c].size());
    for (auto i : train_chunks[c]) out[c].train.push_back(train[i]);
    out[c].test.reserve(test_chunks[c].size());
    for (auto i : test_chunks[c]) out[c].test.push_back(test[i]);
  }
  return out;
}

// --------------------------------------------------------------------------
// Truncated SVD via randomized subspace iteration.

namespace {

// Modified Gram-Schmidt, in place. Columns that collapse numerically are
// re-seeded from a deterministic stream and re-orthogonalized, so the basis
// keeps full width even for rank-deficient inputs.
void orthonormalize_columns(Tensor2D& y, std::uint64_t seed) {
  const std::size_t n = y.rows(), k = y.cols();
  auto eng = make_engine(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t j = 0; j < k; ++j) {
    for (int attempt = 0; attempt < 3; ++attempt) {
      // Project out the previous columns.
      for (std::size_t prev = 0; prev < j; ++prev) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i)
          dot += y.at(i, prev) * y.at(i, j);
        for (std::size_t i = 0; i < n; ++i)
          y.at(i, j) -= dot * y.at(i, prev);
      }
      double norm = 0.0;
      for (std::size_t i = 0; i < n; ++i) norm += y.at(i, j) * y.at(i, j);
      norm = std::sqrt(norm);
      if (norm > 1e-10) {
        for (std::size_t i = 0; i < n; ++i) y.at(i, j) /= norm;
        break;
      }
      if (attempt == 2) {
        for (std::size_t i = 0; i < n; ++i) y.at(i, j) = 0.0;
        break;
      }
      for (std::size_t i = 0; i < n; ++i) y.at(i, j) = gauss(eng);
    }
  }
}

// Cyclic Jacobi eigendecomposition of a small symmetric matrix. Eigenpairs
// come back sorted by descending eigenvalue; vectors are the columns of v.
void eigen_sym_jacobi(Tensor2D m, Tensor2D& v, std::vector<double>& vals) {
  const std::size_t n = m.rows();
  v = Tensor2D(n, n);
  for (std::size_t i = 0; i < n; ++i) v.at(i, i) = 1.0;

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += m.at(i, j) * m.at(i, j);
    if (off < 1e-26) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = m.at(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t i = 0; i < n; ++i) {
          const double mip = m.at(i, p), miq = m.at(i, q);
          m.at(i, p) = c * mip - s * miq;
          m.at(i, q) = s * mip + c * miq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double mpi = m.at(p, i), mqi = m.at(q, i);
          m.at(p, i) = c * mpi - s * mqi;
          m.at(q, i) = s * mpi + c * mqi;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vip = v.at(i, p), viq = v.at(i, q);
          v.at(i, p) = c * vip - s * viq;
          v.at(i, q) = s * vip + c * viq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = m.at(i, i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return diag[a] > diag[b];
                   });
  vals.resize(n);
  Tensor2D sorted(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    vals[j] = diag[order[j]];
    for (std::size_t i = 0; i < n; ++i) sorted.at(i, j) = v.at(i, order[j]);
  }
  v = std::move(sorted);
}

// Core shared by the dense and sparse front ends: apply/applyT are x ↦ A·x
// and x ↦ Aᵀ·x.
TruncatedSvd randomized_svd(std::size_t rows, std::size_t cols,
                            std::size_t rank, std::size_t iters,
                            std::uint64_t seed,
                            const std::function<Tensor2D(const Tensor2D&)>& apply,
                            const std::function<Tensor2D(const Tensor2D&)>& applyT) {
  if (rank == 0) throw std::invalid_argument("truncated_svd: rank == 0");
  if (rank > std::min(rows, cols))
    throw std::invalid_argument("truncated_svd: rank exceeds dimensions");
  if (iters < 5) iters = 5; // subspace iteration floor

  Tensor2D omega(cols, rank);
  fill_normal(omega, 0.0, 1.0, derive_seed(seed, 0));
  Tensor2D q = apply(omega);
  orthonormalize_columns(q, derive_seed(seed, 1));
  for (std::size_t it = 0; it < iters; ++it) {
    Tensor2D z = applyT(q);
    orthonormalize_columns(z, derive_seed(seed, 2 + 2 * it));
    q = apply(z);
    orthonormalize_columns(q, derive_seed(seed, 3 + 2 * it));
  }

  // b = Qᵀ·A is rank×cols; bᵀ = Aᵀ·Q keeps the operator interface.
  Tensor2D bt = applyT(q);             // cols × rank
  Tensor2D small = matmul_tn(bt, bt);  // rank × rank, = B·Bᵀ
  Tensor2D w;
  std::vector<double> lambda;
  eigen_sym_jacobi(small, w, lambda);

  TruncatedSvd r;
  r.s.resize(rank);
  // Numerical-rank cutoff: the BᵀB eigenvalues square the conditioning, so
  // anything below max(dims)·ε·λ₀ is noise and becomes an exact zero.
  const double lam_tol = static_cast<double>(std::max(rows, cols)) *
                         std::numeric_limits<double>::epsilon() *
                         std::max(0.0, lambda[0]);
  for (std::size_t i = 0; i < rank; ++i)
    r.s[i] = lambda[i] > lam_tol ? std::sqrt(lambda[i]) : 0.0;
  r.u = matmul(q, w); // rows × rank
  // v = Bᵀ·W·Σ⁻¹, guarding vanished singular values.
  Tensor2D btw = matmul(bt, w); // cols × rank
  r.v = btw;
  for (std::size_t j = 0; j < rank; ++j) {
    const double inv = r.s[j] > 0.0 ? 1.0 / r.s[j] : 0.0;
    for (std::size_t i = 0; i < r.v.rows(); ++i) r.v.at(i, j) *= inv;
  }
  return r;
}

} // namespace

Tensor2D TruncatedSvd::embeddings() const {
  Tensor2D e = u;
  for (std::size_t j = 0; j < e.cols(); ++j)
    for (std::size_t i = 0; i < e.rows(); ++i) e.at(i, j) *= s[j];
  return e;
}

TruncatedSvd truncated_svd(const Tensor2D& a, std::size_t rank,
                           std::size_t iters, std::uint64_t seed) {
  return randomized_svd(
      a.rows(), a.cols(), rank, iters, seed,
      [&](const Tensor2D& x) { return matmul(a, x); },
      [&](const Tensor2D& x) { return matmul_tn(a, x); });
}

TruncatedSvd truncated_svd(const SparseInteractionMatrix& a, std::size_t rank,
                           std::size_t iters, std::uint64_t seed) {
  const auto rows = static_cast<long>(a.n_rows());
  const auto cols = static_cast<long>(a.n_cols());
  auto apply = [&](const Tensor2D& x) {
    Tensor2D y(a.n_rows(), x.cols());
    const long work = rows * static_cast<long>(x.cols());
#pragma omp parallel for schedule(static) if (work > kParallelGrainsize)
    for (long i = 0; i < rows; ++i) {
      double* out = y.row(static_cast<std::size_t>(i));
      for (std::size_t j : a.row(static_cast<std::size_t>(i))) {
        const double* src = x.row(j);
        for (std::size_t c = 0; c < x.cols(); ++c) out[c] += src[c];
      }
    }
    return y;
  };
  auto applyT = [&](const Tensor2D& x) {
    Tensor2D y(a.n_cols(), x.cols());
    const long work = cols * static_cast<long>(x.cols());
#pragma omp parallel for schedule(static) if (work > kParallelGrainsize)
    for (long j = 0; j < cols; ++j) {
      double* out = y.row(static_cast<std::size_t>(j));
      for (std::size_t i : a.col(static_cast<std::size_t>(j))) {
        const double* src = x.row(i);
        for (std::size_t c = 0; c < x.cols(); ++c) out[c] += src[c];
      }
    }
    return y;
  };
  return randomized_svd(a.n_rows(), a.n_cols(), rank, iters, seed, apply,
                        applyT);
}

// --------------------------------------------------------------------------
// k-means.

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double diff = a[i] - b[i];
    s += diff * diff;
  }
  return s;
}

} // namespace

std::vector<int> kmeans_assign(const Tensor2D& points,
                               const Tensor2D& centroids) {
  if (points.cols() != centroids.cols())
    throw std::invalid_argument("kmeans_assign: dimension mismatch");
  const std::size_t d = points.cols(), k = centroids.rows();
  const long ln = static_cast<long>(points.rows());
  std::vector<int> out(points.rows(), -1);
#pragma omp parallel for schedule(static) \
    if (ln * static_cast<long>(k) > kParallelGrainsize)
  for (long i = 0; i < ln; ++i) {
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (std::size_t c = 0; c < k; ++c) {
      const double dist =
          sq_dist(points.row(static_cast<std::size_t>(i)), centroids.row(c), d);
      if (dist < best) {
        best = dist;
        best_c = static_cast<int>(c);
      }
    }
    out[static_cast<std::size_t>(i)] = best_c;
  }
  return out;
}

KmeansResult kmeans(const Tensor2D& points, std::size_t k,
                    std::size_t max_iters, std::uint64_t seed) {
  const std::size_t n = points.rows(), d = points.cols();
  if (k == 0) throw std::invalid_argument("kmeans: k == 0");
  if (n < k) throw std::invalid_argument("kmeans: fewer points than clusters");

  auto eng = make_engine(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  // k-means++ seeding: first centroid uniform, the rest D²-weighted.
  Tensor2D centroids(k, d);
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  {
    const auto first = static_cast<std::size_t>(uni(eng) * static_cast<double>(n)) % n;
    std::memcpy(centroids.row(0), points.row(first), d * sizeof(double));
    for (std::size_t c = 1; c < k; ++c) {
      double total = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        d2[i] = std::min(d2[i], sq_dist(points.row(i), centroids.row(c - 1), d));
        total += d2[i];
      }
      std::size_t chosen = 0;
      if (total > 0.0) {
        const double r = uni(eng) * total;
        double acc = 0.0;
        chosen = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          acc += d2[i];
          if (acc >= r) {
            chosen = i;
            break;
          }
        }
      } else {
        // All remaining points coincide with a centroid; any choice works.
        chosen = static_cast<std::size_t>(uni(eng) * static_cast<double>(n)) % n;
      }
      std::memcpy(centroids.row(c), points.row(chosen), d * sizeof(double));
    }
  }

  KmeansResult res;
  res.assignments.assign(n, -1);

  for (std::size_t iter = 0; iter < max_iters; ++iter) {
    res.iters_run = iter + 1;
    std::vector<int> next = kmeans_assign(points, centroids);

    // Empty clusters grab the point farthest from its assigned centroid.
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i)
      counts[static_cast<std::size_t>(next[i])]++;
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      double worst = -1.0;
      std::size_t worst_i = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto ci = static_cast<std::size_t>(next[i]);
        if (counts[ci] <= 1) continue; // don't orphan another cluster
        const double dist = sq_dist(points.row(i), centroids.row(ci), d);
        if (dist > worst) {
          worst = dist;
          worst_i = i;
        }
      }
      // worst == 0 means every point sits on its centroid already; stealing
      // one would just oscillate, so the cluster stays empty.
      if (worst > 0.0) {
        counts[static_cast<std::size_t>(next[worst_i])]--;
        next[worst_i] = static_cast<int>(c);
        counts[c] = 1;
      }
    }

    const bool fixpoint = next == res.assignments;
    res.assignments = next;
    // Recompute means; a cluster that stayed empty keeps its old centroid.
    Tensor2D sums(k, d);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(res.assignments[i]);
      sizes[c]++;
      double* cr = sums.row(c);
      const double* pr = points.row(i);
      for (std::size_t j = 0; j < d; ++j) cr[j] += pr[j];
    }
    for (std::size_t c = 0; c < k; ++c)
      if (sizes[c] > 0)
        for (std::size_t j = 0; j < d; ++j)
          centroids.at(c, j) = sums.at(c, j) / static_cast<double>(sizes[c]);
    if (fixpoint) break;
  }

  res.centroids = centroids;
  res.inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    res.inertia += sq_dist(
        points.row(i),
        centroids.row(static_cast<std::size_t>(res.assignments[i])), d);
  return res;
}

std::vector<ClientPartition> partition_cluster(
    const Dataset& ds, const std::vector<Sample>& train,
    const std::vector<Sample>& test, std::size_t k, std::size_t rank,
    std::uint64_t seed) {
  // Binary user×movie occurrence matrix from the ratings.
  std::vector<std::pair<std::string, std::string>> pairs;
  pairs.reserve(ds.ratings.size());
  for (const auto& r : ds.ratings)
    pairs.emplace_back(std::to_string(r.user_id), std::to_string(r.movie_id));
  auto matrix = SparseInteractionMatrix::from_pairs(pairs);

  TruncatedSvd svd = truncated_svd(matrix, rank, 7, derive_seed(seed, 0));
  KmeansResult km =
      kmeans(svd.embeddings(), k, 100, derive_seed(seed, 1));

  std::vector<ClientPartition> out(k);
  for (std::size_t c = 0; c < k; ++c) out[c].client_id = static_cast<int>(c);
  bool warned_unknown = false;
  auto route = [&](const Sample& s) -> std::size_t {
    const auto idx = matrix.row_index(std::to_string(s.user_id));
    if (!idx) {
      if (!warned_unknown) {
        std::fprintf(stderr,
                     "partition_cluster: user %d missing from the rating "
                     "matrix; routing to client 0\n",
                     s.user_id);
        warned_unknown = true;
      }
      return 0;
    }
    return static_cast<std::size_t>(km.assignments[*idx]);
  };
  for (const auto& s : train) out[route(s)].train.push_back(s);
  for (const auto& s : test) out[route(s)].test.push_back(s);

  std::vector<ClientPartition> kept;
  for (auto& c : out) {
    if (c.train.empty() && c.test.empty()) {
      std::fprintf(stderr, "partition_cluster: client %d is empty, dropped\n",
                   c.client_id);
      continue;
    }
    kept.push_back(std::move(c));
  }
  return kept;
}

// --------------------------------------------------------------------------
// Aggregation and rounds.

void copy_groups(ParameterSet& dst, const ParameterSet& src,
                 const std::vector<std::string>& groups) {
  for (const auto& name : groups) {
    const ParameterGroup& from = src.group(name);
    ParameterGroup& to = dst.group(name);
    if (from.tensors.size() != to.tensors.size())
      throw std::invalid_argument("copy_groups: group shape mismatch");
    for (std::size_t i = 0; i < from.tensors.size(); ++i) {
      if (!from.tensors[i].value.same_shape(to.tensors[i].value))
        throw std::invalid_argument("copy_groups: tensor shape mismatch");
      to.tensors[i].value = from.tensors[i].value;
    }
  }
}

std::vector<std::string> group_complement(
    const ParameterSet& ps, const std::vector<std::string>& groups) {
  std::vector<std::string> out;
  for (const auto& g : ps.groups()) {
    if (std::find(groups.begin(), groups.end(), g.name) == groups.end())
      out.push_back(g.name);
  }
  return out;
}

ParameterSet fedavg_aggregate(const std::vector<ParameterSet>& client_params,
                              const std::vector<std::size_t>& sizes,
                              const std::vector<std::string>& plan) {
  if (client_params.empty())
    throw std::invalid_argument("fedavg_aggregate: no clients");
  if (client_params.size() != sizes.size())
    throw std::invalid_argument("fedavg_aggregate: sizes/clients mismatch");
  for (const auto& ps : client_params)
    if (!ps.same_structure(client_params.front()))
      throw std::invalid_argument("fedavg_aggregate: structural mismatch");
  const double total = static_cast<double>(
      std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}));
  if (total == 0.0)
    throw std::invalid_argument("fedavg_aggregate: total size is zero");

  ParameterSet agg = client_params.front();
  for (const auto& name : plan) {
    ParameterGroup& g = agg.group(name);
    for (std::size_t ti = 0; ti < g.tensors.size(); ++ti) {
      Tensor2D& acc = g.tensors[ti].value;
      acc.fill(0.0);
      for (std::size_t k = 0; k < client_params.size(); ++k) {
        const double w = static_cast<double>(sizes[k]) / total;
        acc.axpy_(w, client_params[k].group(name).tensors[ti].value);
      }
    }
  }
  return agg;
}

ParameterSet local_update(const ClientPartition& client,
                          const ParameterSet& global_params,
                          const ParameterSet& local_state,
                          const std::vector<std::string>& plan,
                          std::size_t epochs, std::size_t batch,
                          Optimizer& opt, CtrModel& model,
                          std::uint64_t seed) {
  copy_groups(model.params(), global_params, plan);
  copy_groups(model.params(), local_state,
              group_complement(model.params(), plan));
  if (client.train.empty()) {
    std::fprintf(stderr, "local_update: client %d has no training data\n",
                 client.client_id);
    return model.params();
  }
  if (epochs > 0)
    train_epochs(model, client.train, opt, batch, epochs, seed);
  return model.params();
}

void zero_sum_noise(std::vector<ParameterSet>& client_updates, double sigma,
                    const std::vector<std::size_t>& sizes,
                    const std::vector<std::string>& plan,
                    std::uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("zero_sum_noise: sigma < 0");
  if (sigma == 0.0) return;
  if (client_updates.size() < 2)
    throw std::invalid_argument(
        "zero_sum_noise: needs at least two clients to mask");
  if (client_updates.size() != sizes.size())
    throw std::invalid_argument("zero_sum_noise: sizes mismatch");
  const double total = static_cast<double>(
      std::accumulate(sizes.begin(), sizes.end(), std::size_t{0}));
  if (total == 0.0) throw std::invalid_argument("zero_sum_noise: empty total");

  const std::size_t n = client_updates.size();
  for (const auto& name : plan) {
    const std::size_t tensor_count =
        client_updates.front().group(name).tensors.size();
    for (std::size_t ti = 0; ti < tensor_count; ++ti) {
      const Tensor2D& shape =
          client_updates.front().group(name).tensors[ti].value;
      std::vector<Tensor2D> eta;
      eta.reserve(n);
      Tensor2D mean(shape.rows(), shape.cols());
      for (std::size_t k = 0; k < n; ++k) {
        Tensor2D e(shape.rows(), shape.cols());
        fill_normal(e, 0.0, sigma,
                    derive_seed(seed, fnv1a64(name) ^ (ti * 1315423911u) ^ k));
        mean.axpy_(static_cast<double>(sizes[k]) / total, e);
        eta.push_back(std::move(e));
      }
      for (std::size_t k = 0; k < n; ++k) {
        Tensor2D& w = client_updates[k].group(name).tensors[ti].value;
        w.add_(eta[k]);
        w.sub_(mean);
      }
    }
  }
}

FederatedRun run_rounds(const RoundConfig& cfg,
                        const std::vector<ClientPartition>& partitions,
                        const ModelFactory& factory) {
  cfg.validate();
  if (partitions.empty())
    throw std::invalid_argument("run_rounds: no client partitions");

  FederatedRun run;
  run.model = factory();
  const std::size_t n_clients = partitions.size();

  // Every client starts from the same initialization, so averaging stays
  // meaningful from round one.
  run.client_states.reserve(n_clients);
  for (std::size_t k = 0; k < n_clients; ++k)
    run.client_states.push_back(run.model->params());

  const std::size_t plan_params =
      cfg.federation_plan.empty()
          ? 0
          : run.model->params().param_count(cfg.federation_plan);

  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    const auto t0 = std::chrono::steady_clock::now();

    // Participant sampling (fraction 1.0 keeps everyone, in order).
    std::vector<std::size_t> participants;
    if (cfg.client_fraction >= 1.0) {
      participants.resize(n_clients);
      std::iota(participants.begin(), participants.end(), 0);
    } else {
      const auto m = std::max<std::size_t>(
          1, static_cast<std::size_t>(
                 std::llround(cfg.client_fraction *
                              static_cast<double>(n_clients))));
      participants = shuffled_indices(n_clients, derive_seed(cfg.seed, 0xF00 + round));
      participants.resize(m);
      std::sort(participants.begin(), participants.end());
    }

    std::vector<ParameterSet> updates;
    std::vector<std::size_t> sizes;
    std::vector<std::size_t> update_client; // partition index per update
    for (auto k : participants) {
      const ClientPartition& client = partitions[k];
      if (client.train.empty()) {
        std::fprintf(stderr, "run_rounds: skipping empty client %d\n",
                     client.client_id);
        continue;
      }
      auto model = factory();
      auto opt = make_optimizer(cfg.optimizer, cfg.learning_rate);
      ParameterSet trained = local_update(
          client, run.model->params(), run.client_states[k],
          cfg.federation_plan, cfg.local_epochs, cfg.local_batch, *opt,
          *model, derive_seed(cfg.seed, (round + 1) * 100003 + k));
      run.client_states[k] = trained; // full local copy persists
      updates.push_back(std::move(trained));
      sizes.push_back(client.n_k());
      update_client.push_back(k);
    }
    if (updates.empty())
      throw std::runtime_error("run_rounds: no trainable clients");

    if (cfg.noise_sigma > 0.0 && !cfg.federation_plan.empty())
      zero_sum_noise(updates, cfg.noise_sigma, sizes, cfg.federation_plan,
                     derive_seed(cfg.seed, 0xA000 + round));

    if (!cfg.federation_plan.empty()) {
      ParameterSet agg = fedavg_aggregate(updates, sizes, cfg.federation_plan);
      copy_groups(run.model->params(), agg, cfg.federation_plan);
    }

    // Federated evaluation: every client scores its own test slice with the
    // fresh broadcast plus its local groups; metrics are size-weighted.
    std::vector<double> aucs, lls;
    std::vector<std::size_t> auc_w, ll_w;
    {
      auto eval_model = factory();
      for (std::size_t k = 0; k < n_clients; ++k) {
        const ClientPartition& client = partitions[k];
        if (client.test.empty()) continue;
        copy_groups(eval_model->params(), run.model->params(),
                    cfg.federation_plan);
        copy_groups(eval_model->params(), run.client_states[k],
                    group_complement(eval_model->params(),
                                     cfg.federation_plan));
        auto probs = predict_probs(*eval_model, client.test);
        std::vector<int> labels;
        labels.reserve(client.test.size());
        std::size_t pos = 0;
        for (const auto& s : client.test) {
          labels.push_back(s.label > 0.5 ? 1 : 0);
          pos += labels.back();
        }
        lls.push_back(logloss(probs, labels));
        ll_w.push_back(client.test.size());
        if (pos > 0 && pos < labels.size()) {
          aucs.push_back(auc(probs, labels));
          auc_w.push_back(client.test.size());
        }
      }
    }

    RoundRecord rec;
    rec.round = round;
    rec.test_auc = aucs.empty()
                       ? std::numeric_limits<double>::quiet_NaN()
                       : federated_metric(aucs, auc_w);
    rec.test_logloss = lls.empty()
                           ? std::numeric_limits<double>::quiet_NaN()
                           : federated_metric(lls, ll_w);
    rec.client_sizes = sizes;
    rec.bytes_communicated =
        2ull * updates.size() * plan_params * sizeof(double);
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    run.history.rounds.push_back(std::move(rec));
  }
  return run;
}

void write_round_history_csv(const RoundHistory& h, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << "round,auc,logloss,bytes\n";
  for (const auto& r : h.rounds)
    f << r.round << ',' << r.test_auc << ',' << r.test_logloss << ','
      << r.bytes_communicated << '\n';
}

void write_round_history_json(const RoundHistory& h, const std::string& path) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& r : h.rounds) {
    rounds.push_back({{"round", r.round},
                      {"auc", r.test_auc},
                      {"logloss", r.test_logloss},
                      {"client_sizes", r.client_sizes},
                      {"wall_seconds", r.wall_seconds},
                      {"bytes", r.bytes_communicated}});
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << nlohmann::json{{"rounds", rounds}}.dump(2) << '\n';
}

} // namespace reco
