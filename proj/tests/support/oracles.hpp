#pragma once
// Brute-force reference implementations used to cross-check the library.
// They favour obviousness over speed and share no code with src/.

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "reg/candidate_pool.hpp"
#include "reg/kg_store.hpp"
#include "reg/reorganizer.hpp"
#include "reg/retriever.hpp"

namespace reg::testing {

// Every minimum-length simple path from each source to each target over the
// view, either edge direction. Pairs in ascending (source, target) order,
// paths within a pair sorted, each pair truncated to cap.
std::vector<ReasoningPath> brute_shortest_paths(const GraphView& view, std::span<const EntityId> sources,
                                                std::span<const EntityId> targets, std::size_t cap);

// Every maximal anchored chain over the retrieved triples, ordered by
// descending first score, then step sequence. max_length 0 means no cap.
std::vector<EvidenceChain> brute_chains(const GraphView& view, const RetrievedSubgraph& retrieved,
                                        std::span<const EntityId> query_entities, std::size_t max_length);

// Number of distinct (provenance, source, relation path) keys, by pairwise
// comparison.
std::size_t brute_class_count(const CandidatePool& pool);

// Graph over entities "e0".."e{n-1}" and relations "r0".."r{m-1}" with
// `triples` random draws (duplicates collapse).
KnowledgeGraph random_graph(std::mt19937_64& rng, std::size_t entities, std::size_t relations,
                            std::size_t triples, bool allow_self_loops = false);

}  // namespace reg::testing
