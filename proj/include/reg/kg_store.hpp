#pragma once
// Knowledge-graph storage.
//
// Entities and relations are interned into dense ids in first-seen order.
// Triples keep their load order, which is the iteration order everywhere
// downstream. A KnowledgeGraph is immutable once built; GraphView restricts
// it to a per-question scope without renumbering triples, so triple ids are
// global and stable across views.

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace reg {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
using TripleId = std::uint32_t;

struct Triple {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const noexcept {
    std::uint64_t x = (std::uint64_t{t.head} << 32) ^ t.tail;
    x ^= std::uint64_t{t.relation} * 0x9e3779b97f4a7c15ULL;
    return std::hash<std::uint64_t>{}(x);
  }
};

class Vocabulary {
 public:
  std::uint32_t intern(std::string_view label);
  std::optional<std::uint32_t> find(std::string_view label) const;
  const std::string& label(std::uint32_t id) const;
  std::size_t size() const noexcept { return labels_.size(); }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::uint32_t> ids_;
};

enum class TripleFormat { tsv, jsonl };
enum class Direction { out, in, both };

class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  // Parses UTF-8 TSV (`head<TAB>relation<TAB>tail`) or JSONL ({h, r, t}).
  // Throws ParseError naming the offending line.
  static KnowledgeGraph load(std::istream& in, TripleFormat format);
  static KnowledgeGraph load_file(const std::string& path, TripleFormat format);

  const Vocabulary& entities() const noexcept { return entities_; }
  const Vocabulary& relations() const noexcept { return relations_; }
  const std::string& entity_label(EntityId e) const { return entities_.label(e); }
  const std::string& relation_label(RelationId r) const { return relations_.label(r); }

  std::span<const Triple> triples() const noexcept { return triples_; }
  const Triple& triple(TripleId id) const;
  std::size_t size() const noexcept { return triples_.size(); }
  bool empty() const noexcept { return triples_.empty(); }
  std::size_t duplicates_collapsed() const noexcept { return duplicates_; }

  std::optional<TripleId> find(const Triple& t) const;
  std::optional<TripleId> find(std::string_view head, std::string_view relation,
                               std::string_view tail) const;

  std::span<const TripleId> out_edges(EntityId e) const;
  std::span<const TripleId> in_edges(EntityId e) const;

  // Triple ids incident to e in load order. A self-loop is reported once.
  // Throws LookupError for an unknown entity.
  std::vector<TripleId> neighbors(EntityId e, Direction direction) const;

  void save_tsv(std::ostream& out) const;

 private:
  friend class GraphBuilder;

  Vocabulary entities_;
  Vocabulary relations_;
  std::vector<Triple> triples_;
  std::vector<std::vector<TripleId>> out_;
  std::vector<std::vector<TripleId>> in_;
  std::unordered_map<Triple, TripleId, TripleHash> lookup_;
  std::size_t duplicates_ = 0;
};

// Incremental construction; the result is immutable.
class GraphBuilder {
 public:
  // Returns the id of the (possibly pre-existing) triple.
  TripleId add(std::string_view head, std::string_view relation, std::string_view tail);
  KnowledgeGraph build() &&;

 private:
  KnowledgeGraph graph_;
};

// A restriction of a graph to a subset of its triples, with its own
// adjacency. Does not own the graph; the graph must outlive the view.
class GraphView {
 public:
  explicit GraphView(const KnowledgeGraph& graph);
  // Throws LookupError if scope names an unknown triple id.
  GraphView(const KnowledgeGraph& graph, std::vector<TripleId> scope);

  const KnowledgeGraph& graph() const noexcept { return *graph_; }
  std::span<const TripleId> triple_ids() const noexcept { return ids_; }
  const Triple& triple(TripleId id) const { return graph_->triple(id); }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  bool contains(TripleId id) const;

  std::span<const TripleId> out_edges(EntityId e) const;
  std::span<const TripleId> in_edges(EntityId e) const;
  // Unlike KnowledgeGraph::neighbors, entities absent from the view are not
  // an error; they simply have no incident triples here.
  std::vector<TripleId> neighbors(EntityId e, Direction direction) const;

  // Entities incident to at least one triple of the view, ascending.
  std::vector<EntityId> entities() const;

 private:
  const KnowledgeGraph* graph_;
  std::vector<TripleId> ids_;
  std::unordered_map<EntityId, std::vector<TripleId>> out_;
  std::unordered_map<EntityId, std::vector<TripleId>> in_;
};

struct Question {
  std::string id;
  std::string text;
  std::vector<EntityId> query_entities;   // sorted, unique
  std::vector<EntityId> answer_entities;  // sorted, unique; resolvable answers only
  std::vector<std::string> answer_labels;  // gold labels as given, including unresolvable ones
  std::optional<std::vector<TripleId>> scope;
};

GraphView working_graph(const KnowledgeGraph& graph, const Question& q);

struct QuestionSet {
  std::vector<Question> questions;
  std::vector<std::string> warnings;  // one entry per unresolvable label
};

// JSONL {id, question, question_entities, answer_entities, scope?}.
QuestionSet load_questions(std::istream& in, const KnowledgeGraph& graph);
QuestionSet load_questions_file(const std::string& path, const KnowledgeGraph& graph);

enum class Orientation : std::uint8_t { forward, reverse };

struct PathStep {
  TripleId id = 0;
  Triple triple;
  Orientation orientation = Orientation::forward;

  EntityId entry() const noexcept {
    return orientation == Orientation::forward ? triple.head : triple.tail;
  }
  EntityId exit() const noexcept {
    return orientation == Orientation::forward ? triple.tail : triple.head;
  }
  friend bool operator==(const PathStep& a, const PathStep& b) noexcept {
    return a.id == b.id && a.orientation == b.orientation;
  }
  friend auto operator<=>(const PathStep& a, const PathStep& b) noexcept {
    if (auto c = a.id <=> b.id; c != 0) return c;
    return a.orientation <=> b.orientation;
  }
};

PathStep make_step(const KnowledgeGraph& graph, TripleId id, Orientation orientation);

struct ReasoningPath {
  std::vector<PathStep> steps;

  std::size_t length() const noexcept { return steps.size(); }
  EntityId source() const { return steps.front().entry(); }
  EntityId target() const { return steps.back().exit(); }
  std::vector<TripleId> triple_ids() const;
  // Nonempty and every step starts where the previous one ended.
  bool is_connected() const;

  friend bool operator==(const ReasoningPath&, const ReasoningPath&) = default;
  friend auto operator<=>(const ReasoningPath& a, const ReasoningPath& b) {
    return a.steps <=> b.steps;
  }
};

}  // namespace reg
