#pragma once
// Turns a retrieved triple set into ordered evidence chains anchored at the
// question entities, merges chains that share structure, and renders the
// question-answering prompt.

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "reg/candidate_pool.hpp"
#include "reg/json_io.hpp"
#include "reg/kg_store.hpp"
#include "reg/llm_client.hpp"
#include "reg/refiner.hpp"
#include "reg/retriever.hpp"

namespace reg {

struct EvidenceChain {
  std::vector<PathStep> steps;   // oriented outward from the source
  EntityId source = 0;           // query entity
  std::vector<EntityId> targets; // ascending; more than one after answer merging
  RelationPath relation_path;
  std::vector<double> scores;    // retriever score per step

  ReasoningPath path() const { return {steps}; }
  friend bool operator==(const EvidenceChain&, const EvidenceChain&) = default;
};

// True when the chain satisfies its structural invariants: non-empty,
// connected, starting at the source, consistent relation path, one score per
// step, and a non-empty ascending target set.
bool is_valid_chain(const EvidenceChain& chain);

// Splits retrieved triple ids into query-anchored triples (head or tail is a
// query entity) and the rest. Order is preserved.
std::pair<std::vector<TripleId>, std::vector<TripleId>> split_source(
    const GraphView& view, std::span<const TripleId> retrieved, std::span<const EntityId> query_entities);

inline constexpr std::size_t kUnlimitedLength = 0;
inline constexpr std::size_t kDefaultMaxChains = 5000;

// Expands every query-anchored triple through the remaining triples by
// entity matching, never reusing a triple within a chain. A triple whose head
// is a query entity grows forward (next head = current tail); one whose tail
// is a query entity grows backward (next tail = current head). Only maximal
// chains of length at most max_length are emitted (kUnlimitedLength for no
// cap). Output is ordered by descending score of the first triple, then by
// triple ids. At most max_chains chains are produced.
std::vector<EvidenceChain> expand_chains(const GraphView& view, const RetrievedSubgraph& retrieved,
                                         std::span<const EntityId> query_entities,
                                         std::size_t max_length = 2,
                                         std::size_t max_chains = kDefaultMaxChains);

// Collapses chains with the same source and relation path into the one with
// the smallest step sequence, taking the union of targets. The merged chain
// sits at the position of the group's first member.
std::vector<EvidenceChain> merge_multi_answer(std::vector<EvidenceChain> chains);

// Greedy grouping behind merge_multi_entity: each unclaimed chain in order
// seeds a group and claims later chains with a new source whose targets keep
// the running intersection non-empty. Only groups of two or more are
// returned, as indices into chains.
std::vector<std::vector<std::size_t>> multi_entity_groups(const std::vector<EvidenceChain>& chains,
                                                         std::span<const EntityId> query_entities);

// Groups chains from distinct query entities whose targets intersect: each
// group is placed consecutively with targets replaced by the intersection.
// Groups come first in order of their first member; ungrouped chains follow
// in their original order. A no-op for fewer than two query entities.
std::vector<EvidenceChain> merge_multi_entity(std::vector<EvidenceChain> chains,
                                              std::span<const EntityId> query_entities);

// Renders the chain as a path line; several targets become "{t1, t2}".
std::string render_chain(const EvidenceChain& chain, const KnowledgeGraph& graph,
                         const RelationLabels* overrides = nullptr);

// "(h, r, t)" for a single retrieved triple.
std::string render_triple(TripleId id, const KnowledgeGraph& graph, const RelationLabels* overrides = nullptr);

struct QaDemo {
  std::string question;
  std::vector<std::string> evidence;  // already rendered lines
  std::vector<std::string> answers;
  std::string explanation;
};

// JSONL {question, evidence, answers, explanation?}.
std::vector<QaDemo> load_qa_demos(const std::string& path);

struct QaPromptOptions {
  bool include_explanations = true;
};

inline constexpr const char* kNoEvidenceMarker = "No evidence retrieved.";

// Prompt over pre-rendered evidence lines (chains or flat triples).
CompletionRequest build_qa_prompt(const Question& q, const std::vector<std::string>& evidence,
                                  const std::vector<QaDemo>& demos, const QaPromptOptions& options = {});

CompletionRequest build_qa_prompt(const Question& q, const std::vector<EvidenceChain>& chains,
                                  const KnowledgeGraph& graph, const std::vector<QaDemo>& demos,
                                  const QaPromptOptions& options = {}, const RelationLabels* overrides = nullptr);

struct ReorganizeOptions {
  std::size_t max_length = 2;
  std::size_t max_chains = kDefaultMaxChains;
};

// expand_chains followed by both merges.
std::vector<EvidenceChain> reorganize(const GraphView& view, const RetrievedSubgraph& retrieved,
                                      const Question& q, const ReorganizeOptions& options = {});

struct ChainRecord {
  std::string question_id;
  std::vector<EvidenceChain> chains;
  RelationLabels relation_labels;  // display labels of merged parallel relations
};

json_io::json chains_to_json(const KnowledgeGraph& graph, const std::string& question_id,
                             const std::vector<EvidenceChain>& chains, const RelationLabels* overrides = nullptr);
ChainRecord chains_from_json(const KnowledgeGraph& graph, const json_io::json& j);

}  // namespace reg
