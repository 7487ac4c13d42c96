#pragma once
// LLM-guided refinement of the candidate pool into supervision triples.

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "reg/candidate_pool.hpp"
#include "reg/json_io.hpp"
#include "reg/kg_store.hpp"
#include "reg/llm_client.hpp"

namespace reg {

// Relation label substitutions keyed by triple id, used when parallel
// relations were merged into one retrieval unit.
using RelationLabels = std::unordered_map<TripleId, std::string>;

// "h1 → [r1] → t1 → [r2] → t2". Steps traversed against the edge direction
// render the relation with an inverse marker: "[r⁻]".
std::string textualize_path(const ReasoningPath& path, const KnowledgeGraph& graph,
                            const RelationLabels* overrides = nullptr);

struct RefineDemo {
  std::string question;
  std::vector<std::string> answers;
  std::vector<std::string> candidates;  // already textualized
  std::string selection;                // e.g. "1, 3"
  std::string explanation;
};

// Demonstrations from JSONL {question, answers, candidates, selection, explanation}.
std::vector<RefineDemo> load_refine_demos(const std::string& path);

// Throws Error if the pool is empty.
CompletionRequest build_refine_prompt(const Question& q, const CandidatePool& pool,
                                      const KnowledgeGraph& graph,
                                      const std::vector<RefineDemo>& demos);

struct Selection {
  std::vector<std::size_t> indices;  // 1-based, in response order, unique
  std::size_t dropped = 0;           // out-of-range values discarded
};

// Reads 1-based indices from the first line of the response that contains a
// digit. nullopt when no integer can be read at all.
std::optional<Selection> parse_selection(const std::string& response, std::size_t pool_size);

enum class FallbackPolicy {
  weak_supervision,  // use every shortest-path candidate
  empty,             // yield no supervision
  fail,              // throw
};

struct RefinedSupervision {
  std::string question_id;
  std::vector<std::size_t> selected_indices;  // 0-based pool positions
  std::vector<ReasoningPath> selected_paths;
  std::vector<TripleId> positive_triples;  // ascending, unique
  std::string refiner_tag;
  bool used_fallback = false;
};

// Triple union over the chosen pool positions.
RefinedSupervision extract_supervision(const std::string& question_id, const CandidatePool& pool,
                                       std::vector<std::size_t> positions, std::string refiner_tag);

inline constexpr std::size_t kDefaultPoolLimit = 137;

// Positions of at most limit entries, preferring shortest paths, then query
// neighborhoods, then answer neighborhoods; ascending.
std::vector<std::size_t> truncate_pool(const CandidatePool& pool, std::size_t limit);

struct RefineOptions {
  std::vector<RefineDemo> demos;
  FallbackPolicy fallback = FallbackPolicy::weak_supervision;
  std::string refiner_tag = "llm";
  std::size_t pool_limit = kDefaultPoolLimit;
};

// Prompts with at most options.pool_limit candidates (see truncate_pool);
// selected_indices always refer to positions in the untruncated pool.
RefinedSupervision refine(const Question& q, const CandidatePool& pool, const KnowledgeGraph& graph,
                          LlmClient& client, const RefineOptions& options = {});

json_io::json supervision_to_json(const KnowledgeGraph& graph, const RefinedSupervision& sup);

// The cache stores triples, not paths; selected_paths comes back empty.
RefinedSupervision supervision_from_json(const KnowledgeGraph& graph, const json_io::json& j);

}  // namespace reg
