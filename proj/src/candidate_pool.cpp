#include "reg/candidate_pool.hpp"

#include <algorithm>
#include <deque>
#include <functional>
#include <map>
#include <set>
#include <unordered_map>

#include "reg/error.hpp"

namespace reg {

namespace {

std::vector<EntityId> sorted_unique(std::span<const EntityId> ids) {
  std::vector<EntityId> v(ids.begin(), ids.end());
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

// Undirected adjacency over a view, self-loops excluded, each list ordered
// by (triple id, orientation).
class UndirectedAdjacency {
 public:
  explicit UndirectedAdjacency(const GraphView& view) : view_(view) {}

  const std::vector<PathStep>& steps_from(EntityId u) {
    auto [it, inserted] = cache_.try_emplace(u);
    if (inserted) {
      auto& steps = it->second;
      const auto& graph = view_.graph();
      for (auto id : view_.out_edges(u))
        if (graph.triple(id).tail != u) steps.push_back(make_step(graph, id, Orientation::forward));
      for (auto id : view_.in_edges(u))
        if (graph.triple(id).head != u) steps.push_back(make_step(graph, id, Orientation::reverse));
      std::sort(steps.begin(), steps.end());
    }
    return it->second;
  }

 private:
  const GraphView& view_;
  std::unordered_map<EntityId, std::vector<PathStep>> cache_;
};

std::unordered_map<EntityId, std::size_t> bfs_distances(UndirectedAdjacency& adj, EntityId from) {
  std::unordered_map<EntityId, std::size_t> dist{{from, 0}};
  std::deque<EntityId> frontier{from};
  while (!frontier.empty()) {
    auto u = frontier.front();
    frontier.pop_front();
    auto du = dist[u];
    for (const auto& step : adj.steps_from(u)) {
      auto v = step.exit();
      if (dist.try_emplace(v, du + 1).second) frontier.push_back(v);
    }
  }
  return dist;
}

}  // namespace

const char* provenance_name(Provenance p) {
  switch (p) {
    case Provenance::shortest_path:
      return "shortest_path";
    case Provenance::query_neighborhood:
      return "query_neighborhood";
    case Provenance::answer_neighborhood:
      return "answer_neighborhood";
  }
  return "?";
}

Provenance parse_provenance(const std::string& name) {
  if (name == "shortest_path") return Provenance::shortest_path;
  if (name == "query_neighborhood") return Provenance::query_neighborhood;
  if (name == "answer_neighborhood") return Provenance::answer_neighborhood;
  throw LookupError("unknown provenance " + name);
}

RelationPath relation_path(const ReasoningPath& path) {
  RelationPath rp;
  rp.relations.reserve(path.steps.size());
  rp.orientations.reserve(path.steps.size());
  for (const auto& s : path.steps) {
    rp.relations.push_back(s.triple.relation);
    rp.orientations.push_back(s.orientation);
  }
  return rp;
}

std::vector<ReasoningPath> shortest_paths(const GraphView& view, std::span<const EntityId> sources,
                                          std::span<const EntityId> targets, std::size_t cap) {
  std::vector<ReasoningPath> result;
  if (cap == 0) return result;
  auto srcs = sorted_unique(sources);
  auto tgts = sorted_unique(targets);
  UndirectedAdjacency adj(view);
  std::map<EntityId, std::unordered_map<EntityId, std::size_t>> to_target;
  for (auto t : tgts) to_target.emplace(t, bfs_distances(adj, t));

  for (auto s : srcs) {
    for (auto t : tgts) {
      if (s == t) continue;
      const auto& dist = to_target.at(t);
      auto it = dist.find(s);
      if (it == dist.end()) continue;

      // Depth-first in step order: every step must bring us one hop closer
      // to t, which yields exactly the minimum-length paths.
      std::size_t emitted = 0;
      ReasoningPath current;
      std::function<void(EntityId, std::size_t)> descend = [&](EntityId u, std::size_t remaining) {
        if (emitted >= cap) return;
        if (remaining == 0) {
          result.push_back(current);
          ++emitted;
          return;
        }
        for (const auto& step : adj.steps_from(u)) {
          auto d = dist.find(step.exit());
          if (d == dist.end() || d->second + 1 != remaining) continue;
          current.steps.push_back(step);
          descend(step.exit(), remaining - 1);
          current.steps.pop_back();
          if (emitted >= cap) return;
        }
      };
      descend(s, it->second);
    }
  }
  return result;
}

std::vector<ReasoningPath> anchor_neighborhood(const GraphView& view,
                                               std::span<const EntityId> anchors) {
  auto anchor_set = sorted_unique(anchors);
  auto is_anchor = [&](EntityId e) {
    return std::binary_search(anchor_set.begin(), anchor_set.end(), e);
  };
  std::vector<ReasoningPath> paths;
  for (auto id : view.triple_ids()) {
    const auto& t = view.triple(id);
    if (is_anchor(t.head))
      paths.push_back({{make_step(view.graph(), id, Orientation::forward)}});
    else if (is_anchor(t.tail))
      paths.push_back({{make_step(view.graph(), id, Orientation::reverse)}});
  }
  return paths;
}

std::vector<ReasoningPath> query_neighborhood(const GraphView& view, const Question& q) {
  return anchor_neighborhood(view, q.query_entities);
}

std::vector<ReasoningPath> answer_neighborhood(const GraphView& view, const Question& q) {
  return anchor_neighborhood(view, q.answer_entities);
}

CandidatePool merge_answers(CandidatePool pool, const Question& q) {
  if (q.answer_entities.empty()) return pool;
  std::map<EntityId, std::size_t> counts;
  for (auto a : q.answer_entities) counts[a] = 0;
  for (const auto& e : pool.entries)
    if (e.provenance == Provenance::shortest_path) {
      auto it = counts.find(e.path.target());
      if (it != counts.end()) it->second += e.class_size;
    }
  // std::map iterates ascending, so the first maximum has the smallest id.
  auto best = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it)
    if (it->second > best->second) best = it;
  EntityId representative = best->first;

  std::erase_if(pool.entries, [&](const PoolEntry& e) {
    return e.provenance == Provenance::shortest_path && e.path.target() != representative;
  });
  pool.representative_answer = representative;
  return pool;
}

CandidatePool merge_relation_chains(CandidatePool pool) {
  using Key = std::tuple<Provenance, EntityId, RelationPath>;
  std::map<Key, std::size_t> slot_of;  // key -> index into merged
  std::vector<PoolEntry> merged;
  for (auto& entry : pool.entries) {
    Key key{entry.provenance, entry.path.source(), relation_path(entry.path)};
    auto [it, inserted] = slot_of.try_emplace(std::move(key), merged.size());
    if (inserted) {
      merged.push_back(std::move(entry));
      continue;
    }
    auto& rep = merged[it->second];
    auto size = rep.class_size + entry.class_size;
    if (entry.path < rep.path) rep.path = std::move(entry.path);
    rep.class_size = size;
  }
  pool.entries = std::move(merged);
  return pool;
}

CandidatePool build_pool(const GraphView& view, const Question& q, std::size_t cap) {
  CandidatePool pool;
  for (auto& p : shortest_paths(view, q.query_entities, q.answer_entities, cap))
    pool.entries.push_back({std::move(p), Provenance::shortest_path, 1});
  for (auto& p : query_neighborhood(view, q))
    pool.entries.push_back({std::move(p), Provenance::query_neighborhood, 1});
  for (auto& p : answer_neighborhood(view, q))
    pool.entries.push_back({std::move(p), Provenance::answer_neighborhood, 1});

  pool = merge_relation_chains(merge_answers(std::move(pool), q));

  std::set<std::vector<TripleId>> seen;
  std::erase_if(pool.entries,
                [&](const PoolEntry& e) { return !seen.insert(e.path.triple_ids()).second; });
  return pool;
}

std::vector<TripleId> weak_supervision(const GraphView& view, const Question& q, std::size_t cap) {
  std::vector<TripleId> ids;
  for (const auto& p : shortest_paths(view, q.query_entities, q.answer_entities, cap))
    for (const auto& s : p.steps) ids.push_back(s.id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

json_io::json pool_to_json(const KnowledgeGraph& graph, const std::string& question_id,
                           const CandidatePool& pool) {
  json_io::json paths = json_io::json::array();
  for (const auto& e : pool.entries) {
    auto j = json_io::path_to_json(graph, e.path);
    j["provenance"] = provenance_name(e.provenance);
    j["class_size"] = e.class_size;
    paths.push_back(std::move(j));
  }
  json_io::json rep = nullptr;
  if (pool.representative_answer) rep = graph.entity_label(*pool.representative_answer);
  return {{"id", question_id}, {"paths", std::move(paths)}, {"representative_answer", rep}};
}

CandidatePool pool_from_json(const KnowledgeGraph& graph, const json_io::json& j) {
  CandidatePool pool;
  for (const auto& p : j.at("paths")) {
    PoolEntry e;
    e.path = json_io::path_from_json(graph, p);
    e.provenance = parse_provenance(p.at("provenance").get<std::string>());
    e.class_size = p.value("class_size", std::size_t{1});
    pool.entries.push_back(std::move(e));
  }
  if (j.contains("representative_answer") && j["representative_answer"].is_string()) {
    auto label = j["representative_answer"].get<std::string>();
    auto id = graph.entities().find(label);
    if (!id) throw LookupError("unknown representative answer " + label);
    pool.representative_answer = *id;
  }
  return pool;
}

}  // namespace reg
