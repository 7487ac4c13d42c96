#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracles.hpp"
#include "reg/candidate_pool.hpp"
#include "test_helpers.hpp"

namespace reg {
namespace {

using testing::brute_class_count;
using testing::brute_shortest_paths;
using testing::random_graph;

TEST(CandidatePool, ShortestPathsMatchBruteForceOnRandomGraphs) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 40; ++trial) {
    auto g = random_graph(rng, 6 + rng() % 20, 1 + rng() % 4, 5 + rng() % 50);
    if (g.empty()) continue;
    GraphView view(g);
    std::vector<EntityId> src{static_cast<EntityId>(rng() % g.entities().size())};
    std::vector<EntityId> tgt{static_cast<EntityId>(rng() % g.entities().size()),
                              static_cast<EntityId>(rng() % g.entities().size())};
    EXPECT_EQ(shortest_paths(view, src, tgt, 100000), brute_shortest_paths(view, src, tgt, 100000))
        << "trial " << trial;
  }
}

TEST(CandidatePool, CapTruncatesEachPair) {
  // two parallel two-hop routes a-b-d, a-c-d
  GraphBuilder b;
  b.add("a", "r", "b");
  b.add("b", "r", "d");
  b.add("a", "r", "c");
  b.add("c", "r", "d");
  auto g = std::move(b).build();
  GraphView view(g);
  std::vector<EntityId> a{0}, d{2};
  auto all = shortest_paths(view, a, d, 10);
  ASSERT_EQ(all.size(), 2u);
  auto one = shortest_paths(view, a, d, 1);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0], all[0]);
  EXPECT_TRUE(shortest_paths(view, a, a, 10).empty());
}

TEST(CandidatePool, NeighborhoodsStartAtAnchor) {
  auto g = testing::fixture_graph();
  auto qs = testing::fixture_questions(g);
  const auto& q = qs.questions[0];
  auto view = working_graph(g, q);
  auto qn = query_neighborhood(view, q);
  ASSERT_EQ(qn.size(), 4u);
  for (const auto& p : qn) {
    EXPECT_EQ(p.length(), 1u);
    EXPECT_EQ(p.source(), q.query_entities[0]);
  }
  auto an = answer_neighborhood(view, q);
  ASSERT_EQ(an.size(), 1u);
  EXPECT_EQ(an[0].steps[0].orientation, Orientation::reverse);
}

// "When was Inception released?": one shortest path, four query-side edges
// of which one repeats the shortest path, one answer-side edge that repeats
// it as well.
TEST(CandidatePool, FixturePoolSizeOneHopQuestion) {
  auto g = testing::fixture_graph();
  auto qs = testing::fixture_questions(g);
  auto pool = build_pool(working_graph(g, qs.questions[0]), qs.questions[0]);
  EXPECT_EQ(pool.size(), 4u);
  EXPECT_EQ(pool.entries[0].provenance, Provenance::shortest_path);
}

// "Which films did James Cameron direct?": the two directed_by edges collapse
// into one query-side class and the shortest paths keep only Titanic, the
// lower-id answer; after dropping repeated triple sequences nine remain.
TEST(CandidatePool, FixturePoolSizeMultiAnswerQuestion) {
  auto g = testing::fixture_graph();
  auto qs = testing::fixture_questions(g);
  const auto& q = qs.questions[8];
  auto pool = build_pool(working_graph(g, q), q);
  EXPECT_EQ(pool.size(), 9u);
  ASSERT_TRUE(pool.representative_answer);
  EXPECT_EQ(g.entity_label(*pool.representative_answer), "Titanic");
  std::size_t raw = 0;
  for (const auto& e : pool.entries) raw += e.class_size;
  EXPECT_GT(raw, pool.size());
}

CandidatePool raw_pool(const GraphView& view, const Question& q) {
  CandidatePool pool;
  for (auto& p : shortest_paths(view, q.query_entities, q.answer_entities))
    pool.entries.push_back({std::move(p), Provenance::shortest_path, 1});
  for (auto& p : query_neighborhood(view, q)) pool.entries.push_back({std::move(p), Provenance::query_neighborhood, 1});
  for (auto& p : answer_neighborhood(view, q)) pool.entries.push_back({std::move(p), Provenance::answer_neighborhood, 1});
  return pool;
}

TEST(CandidatePool, MergesAreIdempotentAndMatchClassCount) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    auto g = random_graph(rng, 5 + rng() % 10, 1 + rng() % 3, 5 + rng() % 30);
    if (g.empty()) continue;
    Question q;
    q.query_entities = {static_cast<EntityId>(rng() % g.entities().size())};
    std::set<EntityId> answers{static_cast<EntityId>(rng() % g.entities().size()),
                               static_cast<EntityId>(rng() % g.entities().size())};
    q.answer_entities.assign(answers.begin(), answers.end());
    GraphView view(g);
    auto raw = raw_pool(view, q);

    auto merged = merge_relation_chains(raw);
    EXPECT_EQ(merged.size(), brute_class_count(raw));
    EXPECT_EQ(merge_relation_chains(merged), merged);
    std::size_t total = 0;
    for (const auto& e : merged.entries) total += e.class_size;
    EXPECT_EQ(total, raw.size());

    auto answered = merge_answers(raw, q);
    EXPECT_EQ(merge_answers(answered, q), answered);
    for (const auto& e : answered.entries)
      if (e.provenance == Provenance::shortest_path) EXPECT_EQ(e.path.target(), *answered.representative_answer);
  }
}

TEST(CandidatePool, WeakSupervisionIsShortestPathUnion) {
  auto g = testing::fixture_graph();
  auto qs = testing::fixture_questions(g);
  for (const auto& q : qs.questions) {
    auto view = working_graph(g, q);
    std::set<TripleId> expected;
    for (const auto& p : shortest_paths(view, q.query_entities, q.answer_entities))
      for (auto id : p.triple_ids()) expected.insert(id);
    auto weak = weak_supervision(view, q);
    EXPECT_EQ(weak, std::vector<TripleId>(expected.begin(), expected.end())) << q.id;
  }
}

TEST(CandidatePool, JsonRoundTrip) {
  auto g = testing::fixture_graph();
  auto qs = testing::fixture_questions(g);
  const auto& q = qs.questions[9];
  auto pool = build_pool(working_graph(g, q), q);
  auto j = pool_to_json(g, q.id, pool);
  EXPECT_EQ(j["id"], q.id);
  EXPECT_EQ(pool_from_json(g, j), pool);
}

TEST(CandidatePool, ProvenanceNames) {
  for (auto p : {Provenance::shortest_path, Provenance::query_neighborhood, Provenance::answer_neighborhood})
    EXPECT_EQ(parse_provenance(provenance_name(p)), p);
  EXPECT_ANY_THROW(parse_provenance("sideways"));
}

}  // namespace
}  // namespace reg
