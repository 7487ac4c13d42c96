#include "reg/dde.hpp"

#include <algorithm>
#include <deque>

#include "reg/error.hpp"

namespace reg {

namespace {

std::unordered_map<EntityId, std::uint32_t> directed_bfs(const GraphView& view,
                                                        std::span<const EntityId> anchors,
                                                        std::size_t depth, bool forward) {
  std::unordered_map<EntityId, std::uint32_t> dist;
  std::deque<EntityId> frontier;
  for (auto a : anchors)
    if (dist.emplace(a, 0).second) frontier.push_back(a);
  while (!frontier.empty()) {
    auto u = frontier.front();
    frontier.pop_front();
    auto du = dist[u];
    if (du >= depth) continue;
    auto edges = forward ? view.out_edges(u) : view.in_edges(u);
    for (auto id : edges) {
      const auto& t = view.triple(id);
      auto v = forward ? t.tail : t.head;
      if (dist.emplace(v, du + 1).second) frontier.push_back(v);
    }
  }
  return dist;
}

}  // namespace

std::unordered_map<EntityId, DirectionalDistance> compute_dde(const GraphView& view,
                                                              std::span<const EntityId> anchors,
                                                              std::size_t depth) {
  if (depth < 1) throw ConfigError("DDE depth must be at least 1");
  auto unreachable = static_cast<std::uint32_t>(depth + 1);
  auto fwd = directed_bfs(view, anchors, depth, true);
  auto bwd = directed_bfs(view, anchors, depth, false);

  std::unordered_map<EntityId, DirectionalDistance> codes;
  auto record = [&](EntityId e) {
    auto f = fwd.find(e);
    auto b = bwd.find(e);
    codes[e] = {f == fwd.end() ? unreachable : f->second, b == bwd.end() ? unreachable : b->second};
  };
  for (auto e : view.entities()) record(e);
  for (auto a : anchors) record(a);
  return codes;
}

std::vector<std::vector<EntityId>> anchor_slots(std::span<const EntityId> query_entities,
                                                std::size_t slots) {
  std::vector<std::vector<EntityId>> out(slots);
  if (slots == 0) return out;
  std::vector<EntityId> sorted(query_entities.begin(), query_entities.end());
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) out[std::min(i, slots - 1)].push_back(sorted[i]);
  return out;
}

void write_one_hot(std::uint32_t distance, std::size_t depth, double* out) {
  for (std::size_t i = 0; i < depth + 2; ++i) out[i] = 0.0;
  out[std::min<std::size_t>(distance, depth + 1)] = 1.0;
}

}  // namespace reg
