#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "oracles.hpp"
#include "reg/reorganizer.hpp"
#include "test_helpers.hpp"

namespace reg {
namespace {

RetrievedSubgraph retrieve_all(const GraphView& view, std::mt19937_64& rng) {
  RetrievedSubgraph r;
  for (auto id : view.triple_ids())
    if (rng() % 4 != 0) r.triples.push_back({id, static_cast<double>(rng() % 5) / 4.0, {}});
  r.k = r.triples.size();
  return r;
}

TEST(Reorganizer, ExpansionMatchesBruteForce) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    auto g = testing::random_graph(rng, 8 + rng() % 12, 3, 5 + rng() % 25, true);
    if (g.empty()) continue;
    GraphView view(g);
    auto retrieved = retrieve_all(view, rng);
    std::vector<EntityId> q{static_cast<EntityId>(rng() % g.entities().size())};
    if (rng() % 2) q.push_back(static_cast<EntityId>(rng() % g.entities().size()));
    std::sort(q.begin(), q.end());
    q.erase(std::unique(q.begin(), q.end()), q.end());
    for (std::size_t len : {1u, 2u, 0u}) {
      auto got = expand_chains(view, retrieved, q, len, 1u << 30);
      EXPECT_EQ(got, testing::brute_chains(view, retrieved, q, len)) << "trial " << trial << " L " << len;
      for (const auto& c : got) EXPECT_TRUE(is_valid_chain(c));
    }
  }
}

TEST(Reorganizer, ChainCountCap) {
  auto g = testing::fixture_graph();
  auto qs = testing::fixture_questions(g);
  const auto& q = qs.questions[9];
  GraphView view(g);
  RetrievedSubgraph all;
  for (auto id : view.triple_ids()) all.triples.push_back({id, 1.0, {}});
  EXPECT_EQ(expand_chains(view, all, q.query_entities, 2, 2).size(), 2u);
}

TEST(Reorganizer, SplitSourceKeepsOrder) {
  auto g = testing::fixture_graph();
  GraphView view(g);
  std::vector<TripleId> ids{13, 0, 5, 1};
  std::vector<EntityId> q{*g.entities().find("Inception")};
  auto [src, tgt] = split_source(view, ids, q);
  EXPECT_EQ(src, (std::vector<TripleId>{0, 1}));
  EXPECT_EQ(tgt, (std::vector<TripleId>{13, 5}));
}

EvidenceChain one_step(const KnowledgeGraph& g, TripleId id, Orientation o, double score) {
  EvidenceChain c;
  c.steps = {make_step(g, id, o)};
  c.source = c.steps[0].entry();
  c.targets = {c.steps[0].exit()};
  c.scores = {score};
  c.relation_path = relation_path(c.path());
  return c;
}

TEST(Reorganizer, MultiAnswerMergeUnionsTargets) {
  auto g = testing::fixture_graph();
  // James Cameron ← directed_by ← {Titanic, Avatar}, plus born_in
  std::vector<EvidenceChain> chains{one_step(g, 14, Orientation::forward, 0.9),
                                    one_step(g, 9, Orientation::reverse, 0.8),
                                    one_step(g, 4, Orientation::reverse, 0.7)};
  auto merged = merge_multi_answer(chains);
  ASSERT_EQ(merged.size(), 2u);
  EXPECT_EQ(merged[1].steps[0].id, 4u);
  EXPECT_EQ(merged[1].targets.size(), 2u);
  EXPECT_TRUE(is_valid_chain(merged[1]));
  EXPECT_EQ(render_chain(merged[1], g), "James Cameron → [directed_by⁻] → {Titanic, Avatar}");
  EXPECT_EQ(merge_multi_answer(merged), merged);
}

EvidenceChain stub(EntityId source, std::vector<EntityId> targets) {
  EvidenceChain c;
  c.source = source;
  c.targets = std::move(targets);
  return c;
}

TEST(Reorganizer, MultiEntityLawOnRandomChains) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<EntityId> q{100, 101, 102};
    std::vector<EvidenceChain> chains;
    auto n = 1 + rng() % 8;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<EntityId> t;
      for (EntityId e = 0; e < 6; ++e)
        if (rng() % 3 == 0) t.push_back(e);
      if (t.empty()) t.push_back(static_cast<EntityId>(rng() % 6));
      chains.push_back(stub(q[rng() % 3], t));
      chains.back().scores = {static_cast<double>(i)};  // identifies the chain
    }
    auto groups = multi_entity_groups(chains, q);
    auto out = merge_multi_entity(chains, q);
    ASSERT_EQ(out.size(), chains.size());
    std::size_t pos = 0;
    std::vector<bool> grouped(chains.size(), false);
    for (const auto& members : groups) {
      std::vector<EntityId> common = chains[members[0]].targets;
      for (auto m : members) {
        std::vector<EntityId> inter;
        std::set_intersection(common.begin(), common.end(), chains[m].targets.begin(), chains[m].targets.end(),
                              std::back_inserter(inter));
        common = inter;
        grouped[m] = true;
      }
      ASSERT_FALSE(common.empty());
      for (auto m : members) {
        EXPECT_EQ(out[pos].scores, chains[m].scores);  // consecutive, in member order
        EXPECT_EQ(out[pos].targets, common);
        ++pos;
      }
    }
    for (std::size_t i = 0; i < chains.size(); ++i)
      if (!grouped[i]) EXPECT_EQ(out[pos++], chains[i]);
  }
}

TEST(Reorganizer, ThreeSourcesSharingATarget) {
  std::vector<EntityId> q{10, 11, 12};
  std::vector<EvidenceChain> chains{stub(10, {1, 7}), stub(11, {2}), stub(11, {7, 8}), stub(12, {3, 7})};
  auto out = merge_multi_entity(chains, q);
  EXPECT_EQ(out[0].source, 10u);
  EXPECT_EQ(out[1].source, 11u);
  EXPECT_EQ(out[2].source, 12u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(out[i].targets, (std::vector<EntityId>{7}));
  EXPECT_EQ(out[3].targets, (std::vector<EntityId>{2}));
  EXPECT_EQ(merge_multi_entity(chains, std::vector<EntityId>{10}), chains);
}

TEST(Reorganizer, FixtureMultiEntityQuestionLeadsWithSharedFilm) {
  auto g = testing::fixture_graph();
  auto qs = testing::fixture_questions(g);
  const auto& q = qs.questions[9];
  auto view = working_graph(g, q);
  RetrievedSubgraph all;
  for (auto id : view.triple_ids()) all.triples.push_back({id, 0.5, {}});
  auto chains = reorganize(view, all, q);
  ASSERT_GE(chains.size(), 2u);
  EXPECT_EQ(chains[0].targets, (std::vector<EntityId>{*g.entities().find("Titanic")}));
  EXPECT_NE(chains[0].source, chains[1].source);
  EXPECT_EQ(chains[1].targets, chains[0].targets);
}

TEST(Reorganizer, QaPromptLayout) {
  auto g = testing::fixture_graph();
  auto qs = testing::fixture_questions(g);
  const auto& q = qs.questions[0];
  auto demos = load_qa_demos(testing::data_path("fixture/qa_demos.jsonl"));
  auto req = build_qa_prompt(q, std::vector<std::string>{"Inception → [release_year] → 2010"}, demos);
  EXPECT_NE(req.system_text.find(kAnswerTaskMarker), std::string::npos);
  auto question_at = req.user_text.rfind("Question: When was Inception released?");
  ASSERT_NE(question_at, std::string::npos);
  EXPECT_NE(req.user_text.find("Evidence:\n1. Inception → [release_year] → 2010", question_at), std::string::npos);
  EXPECT_NE(req.user_text.find("The written_by relation"), std::string::npos);
  QaPromptOptions terse;
  terse.include_explanations = false;
  auto short_req = build_qa_prompt(q, std::vector<std::string>{"x"}, demos, terse);
  EXPECT_EQ(short_req.user_text.find("The written_by relation"), std::string::npos);
  auto empty = build_qa_prompt(q, std::vector<std::string>{}, {});
  EXPECT_NE(empty.user_text.find(kNoEvidenceMarker), std::string::npos);
  EXPECT_EQ(render_triple(0, g), "(Inception, directed_by, Christopher Nolan)");
}

TEST(Reorganizer, ChainsJsonRoundTrip) {
  auto g = testing::fixture_graph();
  std::vector<EvidenceChain> chains{one_step(g, 14, Orientation::forward, 0.9),
                                    one_step(g, 4, Orientation::reverse, 0.7)};
  chains[1].targets = {*g.entities().find("Titanic"), *g.entities().find("Avatar")};
  std::sort(chains[1].targets.begin(), chains[1].targets.end());
  RelationLabels over{{14, "born_in | birthplace"}};
  auto j = chains_to_json(g, "q9", chains, &over);
  auto back = chains_from_json(g, j);
  EXPECT_EQ(back.question_id, "q9");
  EXPECT_EQ(back.chains, chains);
  EXPECT_EQ(back.relation_labels.at(14), "born_in | birthplace");
}

}  // namespace
}  // namespace reg
