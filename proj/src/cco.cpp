#include "reco/cco.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "reco/threading.hpp"

namespace reco {

SparseInteractionMatrix SparseInteractionMatrix::from_pairs(
    const std::vector<std::pair<std::string, std::string>>& pairs) {
  SparseInteractionMatrix m;
  {
    std::set<std::string> rset, cset;
    for (const auto& [a, t] : pairs) {
      rset.insert(a);
      cset.insert(t);
    }
    m.row_ids_.assign(rset.begin(), rset.end());
    m.col_ids_.assign(cset.begin(), cset.end());
  }
  for (std::size_t i = 0; i < m.row_ids_.size(); ++i)
    m.row_lookup_[m.row_ids_[i]] = i;
  for (std::size_t i = 0; i < m.col_ids_.size(); ++i)
    m.col_lookup_[m.col_ids_[i]] = i;

  std::set<std::pair<std::size_t, std::size_t>> cells;
  for (const auto& [a, t] : pairs)
    cells.emplace(m.row_lookup_.at(a), m.col_lookup_.at(t));

  m.rows_.resize(m.row_ids_.size());
  m.cols_.resize(m.col_ids_.size());
  for (const auto& [r, c] : cells) {
    m.rows_[r].push_back(c);
    m.cols_[c].push_back(r);
  }
  m.entries_ = cells.size();
  return m;
}

std::optional<std::size_t> SparseInteractionMatrix::row_index(
    const std::string& id) const {
  auto it = row_lookup_.find(id);
  if (it == row_lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> SparseInteractionMatrix::col_index(
    const std::string& id) const {
  auto it = col_lookup_.find(id);
  if (it == col_lookup_.end()) return std::nullopt;
  return it->second;
}

SparseInteractionMatrix build_interaction_matrix(
    const EventLog& log, const std::string& indicator) {
  auto it = log.indicators.find(indicator);
  if (it == log.indicators.end())
    throw std::invalid_argument("unknown indicator: " + indicator);
  return SparseInteractionMatrix::from_pairs(it->second);
}

double llr(long long k11, long long k12, long long k21, long long k22) {
  if (k11 < 0 || k12 < 0 || k21 < 0 || k22 < 0)
    throw std::invalid_argument("llr: negative count");
  const long long n = k11 + k12 + k21 + k22;
  if (n == 0) throw std::invalid_argument("llr: empty table");

  const double nn = static_cast<double>(n);
  const double r1 = static_cast<double>(k11 + k12);
  const double r2 = static_cast<double>(k21 + k22);
  const double c1 = static_cast<double>(k11 + k21);
  const double c2 = static_cast<double>(k12 + k22);

  // k·ln(k·N / (row·col)) per cell; the ratio is 1 exactly on independent
  // integer tables, so those return exactly 0.
  auto term = [nn](long long k, double row, double col) {
    if (k == 0) return 0.0;
    const double kk = static_cast<double>(k);
    return kk * std::log(kk * nn / (row * col));
  };
  const double g = 2.0 * (term(k11, r1, c1) + term(k12, r1, c2) +
                          term(k21, r2, c1) + term(k22, r2, c2));
  return g > 0.0 ? g : 0.0;
}

std::size_t SimilarityMatrix::entry_count() const {
  std::size_t n = 0;
  for (const auto& [_, v] : by_item) n += v.size();
  return n;
}

SimilarityMatrix cross_occurrence(const SparseInteractionMatrix& primary,
                                  const SparseInteractionMatrix& secondary,
                                  double llr_threshold,
                                  std::size_t max_correlators) {
  // Shared actor universe: union for k22, with at least one common actor.
  std::vector<std::string> union_ids;
  {
    std::set<std::string> u(primary.row_ids().begin(), primary.row_ids().end());
    u.insert(secondary.row_ids().begin(), secondary.row_ids().end());
    union_ids.assign(u.begin(), u.end());
  }
  bool any_shared = false;
  for (const auto& id : primary.row_ids())
    if (secondary.row_index(id)) {
      any_shared = true;
      break;
    }
  if (!any_shared && primary.entry_count() > 0 && secondary.entry_count() > 0)
    throw std::invalid_argument(
        "cross_occurrence: actor spaces are disjoint");

  const long long n_universe = static_cast<long long>(union_ids.size());
  const bool same_targets = primary.col_ids() == secondary.col_ids();

  // primary row → secondary row for the shared actors.
  std::vector<long> to_secondary(primary.n_rows(), -1);
  for (std::size_t r = 0; r < primary.n_rows(); ++r) {
    if (auto s = secondary.row_index(primary.row_ids()[r]))
      to_secondary[r] = static_cast<long>(*s);
  }

  const std::size_t n_b = primary.n_cols();
  const std::size_t n_a = secondary.n_cols();
  std::vector<std::vector<SimilarityEntry>> per_item(n_b);

  // Each item b is independent, so the loop parallelizes without changing
  // any result. Scratch counters live per thread and are reset via the
  // touched list.
#pragma omp parallel
  {
    std::vector<long long> cnt(n_a, 0);
    std::vector<std::size_t> touched;
#pragma omp for schedule(dynamic, 16)
    for (long bi = 0; bi < static_cast<long>(n_b); ++bi) {
      const std::size_t b = static_cast<std::size_t>(bi);
      touched.clear();
      for (std::size_t actor : primary.col(b)) {
        const long srow = to_secondary[actor];
        if (srow < 0) continue;
        for (std::size_t a : secondary.row(static_cast<std::size_t>(srow))) {
          if (cnt[a] == 0) touched.push_back(a);
          ++cnt[a];
        }
      }

      const long long b_count = static_cast<long long>(primary.col(b).size());
      std::vector<SimilarityEntry> kept;
      for (std::size_t a : touched) {
        const long long k11 = cnt[a];
        cnt[a] = 0;
        if (same_targets && secondary.col_ids()[a] == primary.col_ids()[b])
          continue;
        const long long k12 =
            static_cast<long long>(secondary.col(a).size()) - k11;
        const long long k21 = b_count - k11;
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
      per_item[b] = std::move(kept);
    }
  }

  SimilarityMatrix sim;
  for (std::size_t b = 0; b < n_b; ++b) {
    if (!per_item[b].empty())
      sim.by_item[primary.col_ids()[b]] = std::move(per_item[b]);
  }
  return sim;
}

void write_similarity_jsonl(const SimilarityMatrix& sim,
                            const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  for (const auto& [item, entries] : sim.by_item) {
    nlohmann::json corr = nlohmann::json::array();
    for (const auto& e : entries)
      corr.push_back({{"item", e.item}, {"llr", e.score}});
    nlohmann::json j{
        {"item", item}, {"indicator", sim.indicator}, {"correlated", corr}};
    f << j.dump() << '\n';
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

SimilarityMatrix read_similarity_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  SimilarityMatrix sim;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    sim.indicator = j.at("indicator").get<std::string>();
    auto& entries = sim.by_item[j.at("item").get<std::string>()];
    for (const auto& c : j.at("correlated"))
      entries.push_back(SimilarityEntry{c.at("item").get<std::string>(),
                                        c.at("llr").get<double>()});
  }
  return sim;
}

std::map<std::string, double> score_user(
    const std::map<std::string, std::set<std::string>>& histories,
    const std::map<std::string, SimilarityMatrix>& similarities) {
  std::map<std::string, double> scores;
  for (const auto& [indicator, history] : histories) {
    auto it = similarities.find(indicator);
    if (it == similarities.end())
      throw std::invalid_argument("no similarity matrix for indicator " +
                                  indicator);
    for (const auto& [b, entries] : it->second.by_item) {
      for (const auto& e : entries) {
        if (history.count(e.item)) scores[b] += e.score;
      }
    }
  }
  return scores;
}

RecommendationList pop_rec(const EventLog& log, std::size_t k) {
  const auto& likes = log.indicators.at(log.primary);
  std::map<std::string, long long> counts;
  for (const auto& [_, item] : likes) ++counts[item];
  RecommendationList out;
  out.reserve(counts.size());
  for (const auto& [item, c] : counts)
    out.emplace_back(item, static_cast<double>(c));
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

CcoEngine::CcoEngine(const EventLog& log,
                     std::map<std::string, SimilarityMatrix> similarities)
    : sims_(std::move(similarities)) {
  for (const auto& [indicator, sim] : sims_) {
    auto it = log.indicators.find(indicator);
    if (it == log.indicators.end())
      throw std::invalid_argument("similarity indicator " + indicator +
                                  " missing from the event log");
    auto& hist = histories_[indicator];
    for (const auto& [actor, target] : it->second)
      hist[actor].push_back(target);

    auto& inv = inverted_[indicator];
    for (const auto& [b, entries] : sim.by_item)
      for (const auto& e : entries)
        inv[e.item].push_back(SimilarityEntry{b, e.score});
  }
  auto primary = log.indicators.find(log.primary);
  if (primary != log.indicators.end()) {
    for (const auto& [actor, target] : primary->second)
      primary_seen_[actor].insert(target);
  }
}

std::map<std::string, double> CcoEngine::score_map(
    const std::string& user) const {
  std::map<std::string, double> scores;
  for (const auto& [indicator, hist] : histories_) {
    auto uit = hist.find(user);
    if (uit == hist.end()) continue;
    const auto& inv = inverted_.at(indicator);
    for (const auto& a : uit->second) {
      auto ait = inv.find(a);
      if (ait == inv.end()) continue;
      for (const auto& e : ait->second) scores[e.item] += e.score;
    }
  }
  return scores;
}

RecommendationList CcoEngine::recommend_top_k(const std::string& user,
                                              std::size_t k,
                                              bool exclude_seen) const {
  std::map<std::string, double> scores = score_map(user);
  const std::set<std::string>* seen = nullptr;
  if (exclude_seen) {
    auto it = primary_seen_.find(user);
    if (it != primary_seen_.end()) seen = &it->second;
  }
  RecommendationList out;
  out.reserve(scores.size());
  for (const auto& [item, score] : scores) {
    if (seen && seen->count(item)) continue;
    out.emplace_back(item, score);
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });
  if (out.size() > k) out.resize(k);
  return out;
}

} // namespace reco
