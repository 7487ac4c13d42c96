#pragma once
// Directional distance encoding: hop distances from a set of anchor
// entities, following edge direction (forward) and against it (backward),
// capped at a depth with one extra "unreachable" bucket.

#include <cstddef>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "reg/kg_store.hpp"

namespace reg {

struct DirectionalDistance {
  std::uint32_t forward = 0;   // 0..depth, or depth + 1 when unreachable
  std::uint32_t backward = 0;
};

// Distances for every entity of the view plus the anchors themselves.
// Entities missing from the result are unreachable in both directions.
std::unordered_map<EntityId, DirectionalDistance> compute_dde(const GraphView& view,
                                                              std::span<const EntityId> anchors,
                                                              std::size_t depth);

// Splits sorted query entities into `slots` anchor sets: one entity per slot
// and the remainder pooled into the last slot. Unused slots are empty.
std::vector<std::vector<EntityId>> anchor_slots(std::span<const EntityId> query_entities,
                                                std::size_t slots);

inline std::size_t dde_block(std::size_t depth) { return depth + 2; }

// Writes a one-hot block of width depth + 2 at out[0..].
void write_one_hot(std::uint32_t distance, std::size_t depth, double* out);

}  // namespace reg
