#include "reco/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "reco/nn.hpp"
#include "reco/rng.hpp"
#include "reco/tensor.hpp"

namespace reco {

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

double auc_exact(const std::vector<double>& scores,
                 const std::vector<int>& labels) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] < scores[b];
  });

  // Average ranks over tie blocks, 1-based.
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
    i = j + 1;
  }

  double rank_sum_pos = 0.0;
  std::size_t npos = 0;
  for (std::size_t t = 0; t < n; ++t) {
    if (labels[t] == 1) {
      rank_sum_pos += rank[t];
      ++npos;
    }
  }
  const std::size_t nneg = n - npos;
  const double u = rank_sum_pos -
                   static_cast<double>(npos) * (static_cast<double>(npos) + 1.0) / 2.0;
  return u / (static_cast<double>(npos) * static_cast<double>(nneg));
}

double auc_thresholded10(const std::vector<double>& scores,
                         const std::vector<int>& labels) {
  std::size_t pos = 0, neg = 0;
  for (int l : labels) (l == 1 ? pos : neg) += 1;

  std::vector<std::pair<double, double>> pts; // (fpr, tpr)
  pts.reserve(12);
  pts.emplace_back(0.0, 0.0);
  pts.emplace_back(1.0, 1.0);
  for (int j = 0; j <= 9; ++j) {
    const double tau = static_cast<double>(j) / 9.0;
    std::size_t tp = 0, fp = 0;
    for (std::size_t t = 0; t < scores.size(); ++t) {
      if (scores[t] >= tau) (labels[t] == 1 ? tp : fp) += 1;
    }
    pts.emplace_back(static_cast<double>(fp) / static_cast<double>(neg),
                     static_cast<double>(tp) / static_cast<double>(pos));
  }
  std::sort(pts.begin(), pts.end());
  double area = 0.0;
  for (std::size_t t = 1; t < pts.size(); ++t)
    area += (pts[t].first - pts[t - 1].first) *
            (pts[t].second + pts[t - 1].second) / 2.0;
  return area;
}

} // namespace

double auc(const std::vector<double>& scores, const std::vector<int>& labels,
           AucMode mode) {
  require(scores.size() == labels.size(), "auc: length mismatch");
  require(!scores.empty(), "auc: empty input");
  bool has_pos = false, has_neg = false;
  for (int l : labels) {
    require(l == 0 || l == 1, "auc: labels must be 0/1");
    (l == 1 ? has_pos : has_neg) = true;
  }
  require(has_pos && has_neg, "auc: needs both classes");
  return mode == AucMode::kExact ? auc_exact(scores, labels)
                                 : auc_thresholded10(scores, labels);
}

double logloss(const std::vector<double>& probs,
               const std::vector<int>& labels) {
  require(probs.size() == labels.size(), "logloss: length mismatch");
  Tensor2D p(probs.size(), 1), y(probs.size(), 1);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    p.data()[i] = probs[i];
    y.data()[i] = static_cast<double>(labels[i]);
  }
  return bce_loss(p, y).loss;
}

double hit_rate_at_k(const std::vector<std::size_t>& held_out_ranks,
                     std::size_t k) {
  require(!held_out_ranks.empty(), "hit_rate_at_k: no users");
  std::size_t hits = 0;
  for (std::size_t r : held_out_ranks)
    if (r <= k) ++hits;
  return static_cast<double>(hits) / static_cast<double>(held_out_ranks.size());
}

double ndcg_at_k(const std::vector<std::size_t>& held_out_ranks,
                 std::size_t k) {
  require(!held_out_ranks.empty(), "ndcg_at_k: no users");
  double sum = 0.0;
  for (std::size_t r : held_out_ranks)
    if (r <= k) sum += 1.0 / std::log2(static_cast<double>(r) + 1.0);
  return sum / static_cast<double>(held_out_ranks.size());
}

double federated_metric(const std::vector<double>& values,
                        const std::vector<std::size_t>& sizes) {
  require(values.size() == sizes.size(), "federated_metric: length mismatch");
  require(!values.empty(), "federated_metric: no clients");
  std::size_t total = 0;
  for (std::size_t s : sizes) {
    require(s > 0, "federated_metric: zero-sized client");
    total += s;
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i)
    acc += (static_cast<double>(sizes[i]) / static_cast<double>(total)) * values[i];
  return acc;
}

LooResult loo_ranking_eval(const Scorer& scorer,
                           const std::vector<LooCase>& cases,
                           const std::vector<int>& catalog,
                           std::size_t negatives_per_user, std::size_t k,
                           std::uint64_t seed) {
  require(!cases.empty(), "loo_ranking_eval: no users");
  std::vector<std::size_t> ranks;
  ranks.reserve(cases.size());
  std::size_t skipped = 0;

  for (const auto& c : cases) {
    std::unordered_set<int> seen(c.seen_items.begin(), c.seen_items.end());
    seen.insert(c.held_out_item);
    std::vector<int> unseen;
    unseen.reserve(catalog.size());
    for (int item : catalog)
      if (!seen.count(item)) unseen.push_back(item);
    if (unseen.empty()) {
      std::fprintf(stderr,
                   "loo_ranking_eval: user %d has no unseen items, skipped\n",
                   c.user_id);
      ++skipped;
      continue;
    }

    std::vector<int> negatives;
    if (negatives_per_user == 0 || unseen.size() <= negatives_per_user) {
      negatives = unseen;
    } else {
      // Partial Fisher-Yates on a per-user stream: evaluation order of users
      // cannot change anyone's sample.
      auto eng = make_engine(derive_seed(seed, static_cast<std::uint64_t>(c.user_id)));
      for (std::size_t i = 0; i < negatives_per_user; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, unseen.size() - 1);
        std::swap(unseen[i], unseen[pick(eng)]);
      }
      negatives.assign(unseen.begin(),
                       unseen.begin() + static_cast<long>(negatives_per_user));
    }

    const double s_held = scorer(c.user_id, c.held_out_item);
    std::size_t rank = 1;
    for (int item : negatives) {
      if (scorer(c.user_id, item) >= s_held) ++rank; // ties count against us
    }
    ranks.push_back(rank);
  }

  require(!ranks.empty(), "loo_ranking_eval: all users skipped");
  LooResult r;
  r.hr = hit_rate_at_k(ranks, k);
  r.ndcg = ndcg_at_k(ranks, k);
  r.users_evaluated = ranks.size();
  r.users_skipped = skipped;
  return r;
}

} // namespace reco
