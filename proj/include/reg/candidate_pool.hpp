#pragma once
// Candidate reasoning-path pool: query-answer shortest paths plus the
// one-hop neighborhoods of query and answer entities, compressed by
// representative-answer selection and relation-chain merging.

#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reg/json_io.hpp"
#include "reg/kg_store.hpp"

namespace reg {

enum class Provenance { shortest_path, query_neighborhood, answer_neighborhood };

const char* provenance_name(Provenance p);
Provenance parse_provenance(const std::string& name);

struct RelationPath {
  std::vector<RelationId> relations;
  std::vector<Orientation> orientations;

  friend auto operator<=>(const RelationPath&, const RelationPath&) = default;
  friend bool operator==(const RelationPath&, const RelationPath&) = default;
};

RelationPath relation_path(const ReasoningPath& path);

struct PoolEntry {
  ReasoningPath path;
  Provenance provenance = Provenance::shortest_path;
  std::size_t class_size = 1;  // number of raw paths this entry stands for

  friend bool operator==(const PoolEntry&, const PoolEntry&) = default;
};

struct CandidatePool {
  std::vector<PoolEntry> entries;
  std::optional<EntityId> representative_answer;

  std::size_t size() const noexcept { return entries.size(); }
  bool empty() const noexcept { return entries.empty(); }
  friend bool operator==(const CandidatePool&, const CandidatePool&) = default;
};

inline constexpr std::size_t kDefaultPathCap = 256;

// All minimum-length paths from each source to each target, traversing
// triples in either direction. Per (source, target) pair the result is in
// lexicographic (triple id, orientation) order, truncated to cap. Pairs are
// visited in ascending (source, target) order; s == t contributes nothing.
std::vector<ReasoningPath> shortest_paths(const GraphView& view, std::span<const EntityId> sources,
                                          std::span<const EntityId> targets,
                                          std::size_t cap = kDefaultPathCap);

// One length-1 path per triple incident to an anchor, oriented to start at
// the anchor (forward when the head is an anchor). Triple-id order.
std::vector<ReasoningPath> anchor_neighborhood(const GraphView& view,
                                               std::span<const EntityId> anchors);
std::vector<ReasoningPath> query_neighborhood(const GraphView& view, const Question& q);
std::vector<ReasoningPath> answer_neighborhood(const GraphView& view, const Question& q);

// Keeps shortest-path entries ending at one representative answer: the
// answer with the most shortest paths, ties to the smallest entity id.
CandidatePool merge_answers(CandidatePool pool, const Question& q);

// Collapses entries sharing (provenance, source entity, relation path) into
// the member with the lexicographically smallest step sequence. The
// representative takes the position of the class's first member and the
// summed class size.
CandidatePool merge_relation_chains(CandidatePool pool);

// Generates the three facets, applies both merges, then drops entries whose
// triple sequence repeats an earlier entry.
CandidatePool build_pool(const GraphView& view, const Question& q,
                         std::size_t cap = kDefaultPathCap);

// Weak supervision: the triple union of all query-answer shortest paths,
// ascending triple id.
std::vector<TripleId> weak_supervision(const GraphView& view, const Question& q,
                                       std::size_t cap = kDefaultPathCap);

json_io::json pool_to_json(const KnowledgeGraph& graph, const std::string& question_id,
                           const CandidatePool& pool);
CandidatePool pool_from_json(const KnowledgeGraph& graph, const json_io::json& j);

}  // namespace reg
