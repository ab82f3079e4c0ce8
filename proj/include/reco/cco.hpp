#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "reco/ingest.hpp"

namespace reco {

// Binary actor×target incidence with id dictionaries. Row and column ids are
// sorted, so construction from the same pair set is deterministic.
class SparseInteractionMatrix {
 public:
  static SparseInteractionMatrix from_pairs(
      const std::vector<std::pair<std::string, std::string>>& pairs);

  std::size_t n_rows() const { return row_ids_.size(); }
  std::size_t n_cols() const { return col_ids_.size(); }
  std::size_t entry_count() const { return entries_; }

  const std::vector<std::string>& row_ids() const { return row_ids_; }
  const std::vector<std::string>& col_ids() const { return col_ids_; }
  std::optional<std::size_t> row_index(const std::string& id) const;
  std::optional<std::size_t> col_index(const std::string& id) const;

  // Adjacency, indices sorted ascending.
  const std::vector<std::size_t>& row(std::size_t r) const { return rows_[r]; }
  const std::vector<std::size_t>& col(std::size_t c) const { return cols_[c]; }

 private:
  std::vector<std::string> row_ids_, col_ids_;
  std::unordered_map<std::string, std::size_t> row_lookup_, col_lookup_;
  std::vector<std::vector<std::size_t>> rows_, cols_;
  std::size_t entries_ = 0;
};

SparseInteractionMatrix build_interaction_matrix(const EventLog& log,
                                                 const std::string& indicator);

// Dunning's G² log-likelihood ratio for a 2×2 contingency table, with
// 0·ln 0 := 0. Zero exactly when every cell matches the independence
// expectation rowsum·colsum/N.
double llr(long long k11, long long k12, long long k21, long long k22);

struct SimilarityEntry {
  std::string item;
  double score;
};

// Per primary item b: correlated secondary targets, score-descending,
// truncated to max_correlators, no self-pairs.
struct SimilarityMatrix {
  std::string indicator;
  std::map<std::string, std::vector<SimilarityEntry>> by_item;

  std::size_t entry_count() const;
};

// For every (secondary target a, primary target b) pair, build the 2×2 table
//   k11 = actors doing both, k12 = a only, k21 = b only,
//   k22 = rest of the union actor universe,
// keep pairs with llr > threshold, best max_correlators per b. Pairs with
// a = b are skipped when both matrices share one target dictionary.
SimilarityMatrix cross_occurrence(const SparseInteractionMatrix& primary,
                                  const SparseInteractionMatrix& secondary,
                                  double llr_threshold = 0.0,
                                  std::size_t max_correlators = 50);

void write_similarity_jsonl(const SimilarityMatrix& sim,
                            const std::string& path);
SimilarityMatrix read_similarity_jsonl(const std::string& path);

// score(b) = Σ over indicators Σ over history targets a correlated with b.
std::map<std::string, double> score_user(
    const std::map<std::string, std::set<std::string>>& histories,
    const std::map<std::string, SimilarityMatrix>& similarities);

using RecommendationList = std::vector<std::pair<std::string, double>>;

// Items by primary ("like") count descending, ties by ascending item id.
RecommendationList pop_rec(const EventLog& log, std::size_t k);

// Query facade: holds per-indicator similarity matrices, user histories and
// an inverted correlator index for fast scoring.
class CcoEngine {
 public:
  CcoEngine(const EventLog& log,
            std::map<std::string, SimilarityMatrix> similarities);

  // Unknown user → empty list (cold start).
  RecommendationList recommend_top_k(const std::string& user, std::size_t k,
                                     bool exclude_seen = true) const;

  std::map<std::string, double> score_map(const std::string& user) const;

  const std::map<std::string, SimilarityMatrix>& similarities() const {
    return sims_;
  }

 private:
  std::map<std::string, SimilarityMatrix> sims_;
  // indicator → actor → history targets
  std::map<std::string, std::unordered_map<std::string, std::vector<std::string>>>
      histories_;
  // indicator → secondary target a → [(item b, llr)]
  std::map<std::string,
           std::unordered_map<std::string, std::vector<SimilarityEntry>>>
      inverted_;
  std::unordered_map<std::string, std::set<std::string>> primary_seen_;
};

} // namespace reco
