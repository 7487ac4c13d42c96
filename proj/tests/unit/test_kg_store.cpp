#include <gtest/gtest.h>

#include <sstream>

#include "reg/error.hpp"
#include "reg/kg_store.hpp"

namespace reg {
namespace {

KnowledgeGraph small_graph() {
  std::istringstream in(
      "a\tr1\tb\n"
      "b\tr2\tc\n"
      "a\tr1\tb\n"
      "c\tr1\ta\n"
      "d\tr3\td\n");
  return KnowledgeGraph::load(in, TripleFormat::tsv);
}

TEST(KgStore, InternsInFirstSeenOrderAndCollapsesDuplicates) {
  auto g = small_graph();
  EXPECT_EQ(g.size(), 4u);
  EXPECT_EQ(g.duplicates_collapsed(), 1u);
  EXPECT_EQ(g.entity_label(0), "a");
  EXPECT_EQ(g.entity_label(3), "d");
  EXPECT_EQ(g.relation_label(2), "r3");
  ASSERT_TRUE(g.find("b", "r2", "c"));
  EXPECT_EQ(*g.find("b", "r2", "c"), 1u);
  EXPECT_FALSE(g.find("c", "r2", "b"));
  EXPECT_FALSE(g.find("zz", "r2", "b"));
}

TEST(KgStore, NeighborsFollowLoadOrderAndReportSelfLoopOnce) {
  auto g = small_graph();
  EntityId a = *g.entities().find("a");
  EntityId d = *g.entities().find("d");
  EXPECT_EQ(g.neighbors(a, Direction::out), (std::vector<TripleId>{0}));
  EXPECT_EQ(g.neighbors(a, Direction::in), (std::vector<TripleId>{2}));
  EXPECT_EQ(g.neighbors(a, Direction::both), (std::vector<TripleId>{0, 2}));
  EXPECT_EQ(g.neighbors(d, Direction::both), (std::vector<TripleId>{3}));
  EXPECT_THROW(g.neighbors(99, Direction::both), LookupError);
}

TEST(KgStore, TsvErrorsNameTheLine) {
  std::istringstream in("a\tr\tb\nbroken line\n");
  try {
    KnowledgeGraph::load(in, TripleFormat::tsv);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  std::istringstream empty_field("a\t\tb\n");
  EXPECT_THROW(KnowledgeGraph::load(empty_field, TripleFormat::tsv), ParseError);
}

TEST(KgStore, JsonlLoadsSameGraphAsTsv) {
  std::istringstream in(
      "{\"h\": \"a\", \"r\": \"r1\", \"t\": \"b\"}\n"
      "\n"
      "{\"h\": \"b\", \"r\": \"r2\", \"t\": \"c\"}\n");
  auto g = KnowledgeGraph::load(in, TripleFormat::jsonl);
  EXPECT_EQ(g.size(), 2u);
  std::istringstream bad("{\"h\": \"a\", \"r\": \"r1\"}\n");
  EXPECT_THROW(KnowledgeGraph::load(bad, TripleFormat::jsonl), ParseError);
}

TEST(KgStore, SaveTsvRoundTrips) {
  auto g = small_graph();
  std::ostringstream out;
  g.save_tsv(out);
  std::istringstream in(out.str());
  auto h = KnowledgeGraph::load(in, TripleFormat::tsv);
  ASSERT_EQ(h.size(), g.size());
  for (TripleId i = 0; i < g.size(); ++i) EXPECT_EQ(h.triple(i), g.triple(i));
}

TEST(KgStore, ViewRestrictsAdjacencyWithoutRenumbering) {
  auto g = small_graph();
  GraphView v(g, {1, 2});
  EntityId a = *g.entities().find("a");
  EntityId c = *g.entities().find("c");
  EXPECT_TRUE(v.contains(2));
  EXPECT_FALSE(v.contains(0));
  EXPECT_EQ(v.neighbors(a, Direction::both), (std::vector<TripleId>{2}));
  EXPECT_EQ(v.neighbors(c, Direction::both), (std::vector<TripleId>{1, 2}));
  EXPECT_TRUE(v.neighbors(*g.entities().find("d"), Direction::both).empty());
  EXPECT_EQ(v.entities().size(), 3u);
  EXPECT_THROW(GraphView(g, {7}), LookupError);
}

TEST(KgStore, QuestionsResolveLabelsAndWarnOnUnknown) {
  auto g = small_graph();
  std::istringstream in(
      "{\"id\": \"q1\", \"question\": \"what?\", \"question_entities\": [\"b\", \"a\"], "
      "\"answer_entities\": [\"c\", \"nowhere\"], \"scope\": [[\"a\", \"r1\", \"b\"]]}\n");
  auto set = load_questions(in, g);
  ASSERT_EQ(set.questions.size(), 1u);
  const auto& q = set.questions[0];
  EXPECT_EQ(q.query_entities, (std::vector<EntityId>{0, 1}));
  EXPECT_EQ(q.answer_entities, (std::vector<EntityId>{2}));
  EXPECT_EQ(q.answer_labels, (std::vector<std::string>{"c", "nowhere"}));
  ASSERT_TRUE(q.scope);
  EXPECT_EQ(*q.scope, (std::vector<TripleId>{0}));
  EXPECT_EQ(set.warnings.size(), 1u);
  EXPECT_EQ(working_graph(g, q).size(), 1u);
}

TEST(KgStore, PathConnectivity) {
  auto g = small_graph();
  ReasoningPath p{{make_step(g, 0, Orientation::forward), make_step(g, 1, Orientation::forward)}};
  EXPECT_TRUE(p.is_connected());
  EXPECT_EQ(g.entity_label(p.source()), "a");
  EXPECT_EQ(g.entity_label(p.target()), "c");
  ReasoningPath broken{{make_step(g, 0, Orientation::reverse), make_step(g, 1, Orientation::forward)}};
  EXPECT_FALSE(broken.is_connected());
}

}  // namespace
}  // namespace reg
