#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "reco/cco.hpp"
#include "reco/rng.hpp"
#include "reco/serial_ref.hpp"
#include "reco/threading.hpp"

using namespace reco;

namespace {

// Independent oracle: G² as twice the gap between the two multinomial
// log-likelihoods — the saturated model (cell MLE p_ij = k_ij/N) versus the
// independence model (p_ij = row_i·col_j/N²).
double llr_oracle(long long k11, long long k12, long long k21, long long k22) {
  const double n = static_cast<double>(k11 + k12 + k21 + k22);
  const double cells[4] = {static_cast<double>(k11), static_cast<double>(k12),
                           static_cast<double>(k21), static_cast<double>(k22)};
  const double rows[4] = {cells[0] + cells[1], cells[0] + cells[1],
                          cells[2] + cells[3], cells[2] + cells[3]};
  const double colsums[4] = {cells[0] + cells[2], cells[1] + cells[3],
                             cells[0] + cells[2], cells[1] + cells[3]};
  double saturated = 0.0, independent = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (cells[i] == 0.0) continue;
    saturated += cells[i] * std::log(cells[i] / n);
    independent += cells[i] * std::log(rows[i] * colsums[i] / (n * n));
  }
  return 2.0 * (saturated - independent);
}

bool sims_equal(const SimilarityMatrix& a, const SimilarityMatrix& b,
                double tol = 1e-12) {
  if (a.by_item.size() != b.by_item.size()) return false;
  for (const auto& [item, ea] : a.by_item) {
    auto it = b.by_item.find(item);
    if (it == b.by_item.end() || it->second.size() != ea.size()) return false;
    for (std::size_t i = 0; i < ea.size(); ++i) {
      if (ea[i].item != it->second[i].item) return false;
      if (std::fabs(ea[i].score - it->second[i].score) > tol) return false;
    }
  }
  return true;
}

} // namespace

TEST_CASE("llr closed forms") {
  CHECK(llr(25, 25, 25, 25) == 0.0);
  CHECK(llr(10, 0, 0, 10) ==
        doctest::Approx(40.0 * std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(llr(-1, 0, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(llr(0, 0, 0, 0), std::invalid_argument);
}

TEST_CASE("llr matches the multinomial likelihood oracle on random tables") {
  auto eng = make_engine(2024);
  std::uniform_int_distribution<long long> cell(0, 50);
  std::size_t checked = 0;
  while (checked < 1000) {
    long long k11 = cell(eng), k12 = cell(eng), k21 = cell(eng),
              k22 = cell(eng);
    if (k11 + k12 + k21 + k22 == 0) continue;
    ++checked;
    CHECK(std::fabs(llr(k11, k12, k21, k22) - llr_oracle(k11, k12, k21, k22)) <=
          1e-9);
  }
}

TEST_CASE("llr symmetry and independence ⇒ zero") {
  auto eng = make_engine(4);
  std::uniform_int_distribution<long long> cell(0, 50);
  for (int i = 0; i < 200; ++i) {
    long long k11 = cell(eng), k12 = cell(eng), k21 = cell(eng),
              k22 = cell(eng);
    if (k11 + k12 + k21 + k22 == 0) continue;
    // Transpose and event-swap leave G² unchanged.
    CHECK(llr(k11, k12, k21, k22) == doctest::Approx(llr(k11, k21, k12, k22)));
    CHECK(llr(k11, k12, k21, k22) == doctest::Approx(llr(k22, k21, k12, k11)));
    CHECK(llr(k11, k12, k21, k22) >= 0.0);
  }
  // Exactly independent tables (outer products) give exactly zero.
  for (long long a : {1, 2, 5}) {
    for (long long b : {1, 3, 4}) {
      for (long long c : {1, 2}) {
        for (long long d : {1, 6}) {
          CHECK(llr(a * c, a * d, b * c, b * d) == 0.0);
        }
      }
    }
  }
}

TEST_CASE("interaction matrix construction") {
  EventLog log;
  log.primary = "like";
  log.indicators["like"] = {{"u1", "i1"}, {"u1", "i2"}, {"u2", "i1"}};
  SparseInteractionMatrix m = build_interaction_matrix(log, "like");
  CHECK(m.n_rows() == 2);
  CHECK(m.n_cols() == 2);
  CHECK(m.entry_count() == 3);
  CHECK(m.row_ids() == std::vector<std::string>{"u1", "u2"});
  CHECK(m.col(*m.col_index("i1")).size() == 2);
  CHECK(m.col(*m.col_index("i2")).size() == 1);
  CHECK_THROWS_AS(build_interaction_matrix(log, "view"), std::invalid_argument);

  // Duplicate pairs collapse.
  auto dup = SparseInteractionMatrix::from_pairs(
      {{"u1", "i1"}, {"u1", "i1"}, {"u2", "i2"}});
  CHECK(dup.entry_count() == 2);
}

TEST_CASE("self cross-occurrence on the co-liked toy") {
  // Users A and B like items 1 and 2 together; C likes item 3 alone.
  auto p = SparseInteractionMatrix::from_pairs({{"A", "1"},
                                                {"A", "2"},
                                                {"B", "1"},
                                                {"B", "2"},
                                                {"C", "3"}});
  SimilarityMatrix sim = cross_occurrence(p, p, 0.0, 50);

  // (1,2): k11=2, k12=0, k21=0, k22=1.
  REQUIRE(sim.by_item.count("1"));
  const auto& for1 = sim.by_item.at("1");
  REQUIRE(!for1.empty());
  CHECK(for1[0].item == "2");
  CHECK(for1[0].score == doctest::Approx(llr(2, 0, 0, 1)));
  // (1,3) never co-occurs: k11=0 → untouched, absent entirely.
  for (const auto& e : for1) CHECK(e.item != "3");
  // No self-pairs anywhere.
  for (const auto& [b, entries] : sim.by_item)
    for (const auto& e : entries) CHECK(e.item != b);
}

TEST_CASE("cross occurrence matches the serial pairwise reference") {
  // Random small instances, self and cross indicator, with and without
  // threshold/truncation.
  auto eng = make_engine(99);
  std::uniform_int_distribution<int> nu(2, 5), ni(2, 5), coin(0, 1);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<std::pair<std::string, std::string>> ppairs, spairs;
    const int users = nu(eng), items = ni(eng), tags = ni(eng);
    for (int u = 0; u < users; ++u) {
      for (int i = 0; i < items; ++i)
        if (coin(eng)) ppairs.emplace_back("u" + std::to_string(u),
                                           "i" + std::to_string(i));
      for (int t = 0; t < tags; ++t)
        if (coin(eng)) spairs.emplace_back("u" + std::to_string(u),
                                           "t" + std::to_string(t));
    }
    if (ppairs.empty() || spairs.empty()) continue;
    // Guarantee a shared actor; disjoint spaces are a contract violation.
    ppairs.emplace_back("u0", "i0");
    spairs.emplace_back("u0", "t0");
    auto p = SparseInteractionMatrix::from_pairs(ppairs);
    auto s = SparseInteractionMatrix::from_pairs(spairs);

    CHECK(sims_equal(cross_occurrence(p, s, 0.0, 50),
                     serial::cross_occurrence_serial(p, s, 0.0, 50)));
    CHECK(sims_equal(cross_occurrence(p, p, 0.0, 50),
                     serial::cross_occurrence_serial(p, p, 0.0, 50)));
    CHECK(sims_equal(cross_occurrence(p, s, 0.5, 2),
                     serial::cross_occurrence_serial(p, s, 0.5, 2)));
  }
}

TEST_CASE("cross occurrence edge cases") {
  auto p = SparseInteractionMatrix::from_pairs({{"A", "1"}, {"A", "2"}});
  // Single actor: every table is k22-free; with a positive threshold the
  // result can be empty.
  SimilarityMatrix single = cross_occurrence(p, p, 1e-6, 50);
  CHECK(single.by_item.empty());

  // Threshold at +inf filters everything.
  auto q = SparseInteractionMatrix::from_pairs(
      {{"A", "1"}, {"A", "2"}, {"B", "1"}, {"B", "2"}, {"C", "3"}});
  CHECK(cross_occurrence(q, q, std::numeric_limits<double>::infinity(), 50)
            .by_item.empty());

  // Disjoint actor spaces are a contract violation.
  auto other = SparseInteractionMatrix::from_pairs({{"Z", "9"}});
  CHECK_THROWS_AS(cross_occurrence(q, other, 0.0, 50), std::invalid_argument);

  // max_correlators truncates.
  SimilarityMatrix trunc = cross_occurrence(q, q, 0.0, 1);
  for (const auto& [_, entries] : trunc.by_item) CHECK(entries.size() <= 1);
}

TEST_CASE("score_user sums correlated history items additively") {
  std::map<std::string, SimilarityMatrix> sims;
  SimilarityMatrix s1;
  s1.indicator = "like";
  s1.by_item["b"] = {{"a", 5.0}};
  sims["like"] = s1;

  // Empty history → empty map.
  CHECK(score_user({}, sims).empty());

  std::map<std::string, std::set<std::string>> hist{{"like", {"a"}}};
  auto scores = score_user(hist, sims);
  REQUIRE(scores.count("b"));
  CHECK(scores.at("b") == doctest::Approx(5.0));

  SimilarityMatrix s2;
  s2.indicator = "dislike";
  s2.by_item["b"] = {{"x", 3.0}};
  s2.by_item["c"] = {{"x", 1.5}};
  sims["dislike"] = s2;
  std::map<std::string, std::set<std::string>> hist2{{"like", {"a"}},
                                                     {"dislike", {"x"}}};
  auto scores2 = score_user(hist2, sims);
  CHECK(scores2.at("b") == doctest::Approx(8.0));
  CHECK(scores2.at("c") == doctest::Approx(1.5));

  // Additivity over disjoint history splits.
  auto only_like = score_user({{"like", {"a"}}}, sims);
  auto only_dis = score_user({{"dislike", {"x"}}}, sims);
  for (const auto& [item, sc] : scores2) {
    double split_sum = 0.0;
    if (only_like.count(item)) split_sum += only_like.at(item);
    if (only_dis.count(item)) split_sum += only_dis.at(item);
    CHECK(sc == doctest::Approx(split_sum));
  }
}

TEST_CASE("engine recommendations, exclusion and cold start") {
  EventLog log;
  log.primary = "like";
  log.indicators["like"] = {{"A", "1"}, {"A", "2"}, {"B", "1"},
                            {"B", "2"}, {"B", "3"}, {"C", "2"},
                            {"C", "3"}, {"D", "4"}};
  auto p = build_interaction_matrix(log, "like");
  SimilarityMatrix sim = cross_occurrence(p, p, 0.0, 50);
  sim.indicator = "like";
  CcoEngine engine(log, {{"like", sim}});

  RecommendationList rec = engine.recommend_top_k("A", 10, true);
  for (const auto& [item, _] : rec) {
    CHECK(item != "1");
    CHECK(item != "2");
  }
  for (std::size_t i = 1; i < rec.size(); ++i)
    CHECK(rec[i - 1].second >= rec[i].second);

  RecommendationList with_seen = engine.recommend_top_k("A", 10, false);
  CHECK(with_seen.size() >= rec.size());

  CHECK(engine.recommend_top_k("nobody", 10).empty());

  // Engine scoring equals the free-function path.
  std::map<std::string, std::set<std::string>> hist{{"like", {"1", "2"}}};
  auto direct = score_user(hist, engine.similarities());
  auto via_engine = engine.score_map("A");
  CHECK(direct.size() == via_engine.size());
  for (const auto& [item, sc] : direct)
    CHECK(via_engine.at(item) == doctest::Approx(sc).epsilon(1e-12));
}

TEST_CASE("pop_rec orders by like count with id tie-break") {
  EventLog log;
  log.primary = "like";
  log.indicators["like"] = {{"u1", "a"}, {"u2", "a"}, {"u3", "a"},
                            {"u1", "b"}, {"u2", "c"}, {"u3", "c"}};
  RecommendationList top = pop_rec(log, 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0].first == "a");
  CHECK(top[0].second == doctest::Approx(3.0));
  CHECK(top[1].first == "c");

  CHECK(pop_rec(log, 0).empty());

  // Tie between b and c at count 1 resolves by ascending id.
  EventLog tie;
  tie.primary = "like";
  tie.indicators["like"] = {{"u1", "b"}, {"u2", "c"}};
  RecommendationList t = pop_rec(tie, 5);
  CHECK(t[0].first == "b");
  CHECK(t[1].first == "c");
}

TEST_CASE("similarity matrix jsonl round trip") {
  auto p = SparseInteractionMatrix::from_pairs(
      {{"A", "1"}, {"A", "2"}, {"B", "1"}, {"B", "2"}, {"C", "3"}});
  SimilarityMatrix sim = cross_occurrence(p, p, 0.0, 50);
  sim.indicator = "like";

  auto path = (std::filesystem::temp_directory_path() / "reco_sim_test.jsonl")
                  .string();
  write_similarity_jsonl(sim, path);
  SimilarityMatrix back = read_similarity_jsonl(path);
  CHECK(back.indicator == "like");
  CHECK(sims_equal(sim, back));
  std::filesystem::remove(path);
}

TEST_CASE("cross occurrence is bit-identical across thread counts") {
  std::vector<std::pair<std::string, std::string>> pairs;
  auto eng = make_engine(7);
  std::uniform_int_distribution<int> user(0, 49), item(0, 29);
  for (int i = 0; i < 600; ++i)
    pairs.emplace_back("u" + std::to_string(user(eng)),
                       "i" + std::to_string(item(eng)));
  auto p = SparseInteractionMatrix::from_pairs(pairs);

  set_num_threads(1);
  SimilarityMatrix s1 = cross_occurrence(p, p, 0.0, 50);
  set_num_threads(4);
  SimilarityMatrix s4 = cross_occurrence(p, p, 0.0, 50);
  set_num_threads(0);
  CHECK(sims_equal(s1, s4, 0.0));
}
