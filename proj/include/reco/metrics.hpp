#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace reco {

enum class AucMode { kExact, kThresholded10 };

// Exact mode: Mann-Whitney rank statistic, ties get half credit.
// Thresholded10 mode: ROC points at thresholds {0, 1/9, ..., 1} with
// score ≥ τ counted positive, corners (0,0) and (1,1) appended, area by the
// trapezoid rule. Labels must contain at least one positive and one negative.
double auc(const std::vector<double>& scores, const std::vector<int>& labels,
           AucMode mode = AucMode::kExact);

// Mean binary cross-entropy, same clamping as the training loss.
double logloss(const std::vector<double>& probs,
               const std::vector<int>& labels);

// One held-out rank per user, 1-based. rank ≤ k counts as a hit.
double hit_rate_at_k(const std::vector<std::size_t>& held_out_ranks,
                     std::size_t k = 10);

// Single relevant item per user: gain 1/log₂(rank+1) inside the top k,
// ideal DCG is 1, mean over users.
double ndcg_at_k(const std::vector<std::size_t>& held_out_ranks,
                 std::size_t k = 10);

// Σ_i (|D_i|/|D|)·v_i.
double federated_metric(const std::vector<double>& values,
                        const std::vector<std::size_t>& sizes);

// Scores one candidate item for one user. Must be callable for any pair.
using Scorer = std::function<double(int user_id, int item_id)>;

struct LooCase {
  int user_id;
  int held_out_item;
  std::vector<int> seen_items; // train-time items, excluded from negatives
};

struct LooResult {
  double hr;
  double ndcg;
  std::size_t users_evaluated;
  std::size_t users_skipped;
};

// Leave-one-out ranking: the held-out item competes against
// negatives_per_user unseen catalog items sampled uniformly per user
// (0 = the whole unseen catalog). Ties rank the held-out item after every
// tied competitor. Per-user RNG streams are derived from (seed, user_id), so
// results do not depend on evaluation order.
LooResult loo_ranking_eval(const Scorer& scorer,
                           const std::vector<LooCase>& cases,
                           const std::vector<int>& catalog,
                           std::size_t negatives_per_user = 100,
                           std::size_t k = 10, std::uint64_t seed = 1);

} // namespace reco
