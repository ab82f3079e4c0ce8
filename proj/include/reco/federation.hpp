#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "reco/cco.hpp"
#include "reco/ctr.hpp"
#include "reco/ingest.hpp"
#include "reco/optim.hpp"
#include "reco/params.hpp"
#include "reco/tensor.hpp"

namespace reco {

// One simulated client: its slice of the global train/test split.
struct ClientPartition {
  int client_id = 0;
  std::vector<Sample> train;
  std::vector<Sample> test;

  std::size_t n_k() const { return train.size(); }
};

struct RoundConfig {
  std::size_t num_clients = 10;
  double client_fraction = 1.0; // all clients participate by default
  std::size_t local_epochs = 1;
  std::size_t local_batch = 256;
  std::size_t rounds = 10;
  // Parameter groups aggregated by the server; the complement stays local
  // on each client. Empty plan = purely local training.
  std::vector<std::string> federation_plan = {"embedding", "interaction",
                                              "output"};
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;
  std::string optimizer = "adam";
  double learning_rate = 1e-3;

  void validate() const;
};

struct RoundRecord {
  std::size_t round = 0;
  double test_auc = 0.0;
  double test_logloss = 0.0;
  std::vector<std::size_t> client_sizes; // participants' n_k this round
  double wall_seconds = 0.0;
  std::uint64_t bytes_communicated = 0;
};

struct RoundHistory {
  std::vector<RoundRecord> rounds;
};

void write_round_history_csv(const RoundHistory& h, const std::string& path);
void write_round_history_json(const RoundHistory& h, const std::string& path);

// Uniform random equal splits (±1) of train and test across k clients.
std::vector<ClientPartition> partition_iid(const std::vector<Sample>& train,
                                           const std::vector<Sample>& test,
                                           std::size_t k, std::uint64_t seed);

// Randomized truncated SVD. u is rows×rank, v is cols×rank, s descending.
struct TruncatedSvd {
  Tensor2D u;
  Tensor2D v;
  std::vector<double> s;

  // Left singular vectors scaled by the singular values: one embedding row
  // per matrix row.
  Tensor2D embeddings() const;
};

TruncatedSvd truncated_svd(const Tensor2D& a, std::size_t rank,
                           std::size_t iters = 7, std::uint64_t seed = 1);
TruncatedSvd truncated_svd(const SparseInteractionMatrix& a, std::size_t rank,
                           std::size_t iters = 7, std::uint64_t seed = 1);

struct KmeansResult {
  std::vector<int> assignments;
  Tensor2D centroids;
  double inertia = 0.0;
  std::size_t iters_run = 0;
};

// k-means++ seeding followed by Lloyd iterations to an assignment fixpoint.
KmeansResult kmeans(const Tensor2D& points, std::size_t k,
                    std::size_t max_iters = 100, std::uint64_t seed = 1);

// One Lloyd assignment sweep: nearest centroid per point by squared
// Euclidean distance, lowest index winning ties.
std::vector<int> kmeans_assign(const Tensor2D& points,
                               const Tensor2D& centroids);

// Non-IID split: SVD user embeddings from the rating matrix, k-means over
// users, every sample routed to its user's cluster.
std::vector<ClientPartition> partition_cluster(
    const Dataset& ds, const std::vector<Sample>& train,
    const std::vector<Sample>& test, std::size_t k = 10, std::size_t rank = 50,
    std::uint64_t seed = 1);

// Size-weighted average of the plan groups; everything else is copied from
// the first client.
ParameterSet fedavg_aggregate(const std::vector<ParameterSet>& client_params,
                              const std::vector<std::size_t>& sizes,
                              const std::vector<std::string>& plan);

// Copy the named groups' values from src into dst (shapes must match).
void copy_groups(ParameterSet& dst, const ParameterSet& src,
                 const std::vector<std::string>& groups);

// Complement of `groups` within dst's structure.
std::vector<std::string> group_complement(
    const ParameterSet& ps, const std::vector<std::string>& groups);

// One client round: plan groups from the broadcast, local groups from the
// client's persisted state, E epochs of B-sized batches. Returns the
// client's full post-training parameters.
ParameterSet local_update(const ClientPartition& client,
                          const ParameterSet& global_params,
                          const ParameterSet& local_state,
                          const std::vector<std::string>& plan,
                          std::size_t epochs, std::size_t batch,
                          Optimizer& opt, CtrModel& model, std::uint64_t seed);

// Masking noise: per-client N(0, σ²) draws on plan-group tensors, recentred
// so the size-weighted sum of the perturbations is exactly zero.
void zero_sum_noise(std::vector<ParameterSet>& client_updates, double sigma,
                    const std::vector<std::size_t>& sizes,
                    const std::vector<std::string>& plan, std::uint64_t seed);

using ModelFactory = std::function<std::unique_ptr<CtrModel>()>;

struct FederatedRun {
  RoundHistory history;
  std::unique_ptr<CtrModel> model;          // holds the final global params
  std::vector<ParameterSet> client_states;  // persisted local groups
};

FederatedRun run_rounds(const RoundConfig& cfg,
                        const std::vector<ClientPartition>& partitions,
                        const ModelFactory& factory);

} // namespace reco
