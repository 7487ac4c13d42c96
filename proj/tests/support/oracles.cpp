#include "oracles.hpp"

#include <algorithm>
#include <functional>
#include <string>

namespace reg::testing {

namespace {

// Reachability by repeated relaxation over undirected edges.
std::vector<std::vector<bool>> reachable(const GraphView& view, std::size_t n) {
  std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
  for (std::size_t i = 0; i < n; ++i) r[i][i] = true;
  bool changed = true;
  while (changed) {
    changed = false;
    for (auto id : view.triple_ids()) {
      const auto& t = view.triple(id);
      for (std::size_t s = 0; s < n; ++s) {
        if (r[s][t.head] && !r[s][t.tail]) r[s][t.tail] = changed = true;
        if (r[s][t.tail] && !r[s][t.head]) r[s][t.head] = changed = true;
      }
    }
  }
  return r;
}

}  // namespace

std::vector<ReasoningPath> brute_shortest_paths(const GraphView& view, std::span<const EntityId> sources,
                                                std::span<const EntityId> targets, std::size_t cap) {
  const auto& graph = view.graph();
  const std::size_t n = graph.entities().size();
  auto reach = reachable(view, n);
  std::vector<EntityId> src(sources.begin(), sources.end()), tgt(targets.begin(), targets.end());
  std::sort(src.begin(), src.end());
  src.erase(std::unique(src.begin(), src.end()), src.end());
  std::sort(tgt.begin(), tgt.end());
  tgt.erase(std::unique(tgt.begin(), tgt.end()), tgt.end());

  std::vector<ReasoningPath> out;
  for (auto s : src) {
    for (auto t : tgt) {
      if (s == t || s >= n || t >= n || !reach[s][t]) continue;
      std::vector<ReasoningPath> found;
      for (std::size_t len = 1; found.empty() && len < n; ++len) {
        ReasoningPath walk;
        std::vector<EntityId> visited{s};
        std::function<void(EntityId)> dfs = [&](EntityId at) {
          if (walk.steps.size() == len) {
            if (at == t) found.push_back(walk);
            return;
          }
          for (auto id : view.triple_ids()) {
            const auto& tr = view.triple(id);
            for (auto o : {Orientation::forward, Orientation::reverse}) {
              EntityId from = o == Orientation::forward ? tr.head : tr.tail;
              EntityId to = o == Orientation::forward ? tr.tail : tr.head;
              if (from != at) continue;
              if (std::find(visited.begin(), visited.end(), to) != visited.end()) continue;
              walk.steps.push_back(make_step(graph, id, o));
              visited.push_back(to);
              dfs(to);
              visited.pop_back();
              walk.steps.pop_back();
            }
          }
        };
        dfs(s);
      }
      std::sort(found.begin(), found.end());
      if (found.size() > cap) found.resize(cap);
      out.insert(out.end(), found.begin(), found.end());
    }
  }
  return out;
}

std::vector<EvidenceChain> brute_chains(const GraphView& view, const RetrievedSubgraph& retrieved,
                                        std::span<const EntityId> query_entities, std::size_t max_length) {
  const auto& graph = view.graph();
  auto is_query = [&](EntityId e) {
    return std::find(query_entities.begin(), query_entities.end(), e) != query_entities.end();
  };
  std::vector<TripleId> ids;
  std::vector<double> scores;
  for (const auto& st : retrieved.triples) {
    if (std::find(ids.begin(), ids.end(), st.id) != ids.end()) continue;
    ids.push_back(st.id);
    scores.push_back(st.score);
  }
  auto score_of = [&](TripleId id) {
    return scores[std::find(ids.begin(), ids.end(), id) - ids.begin()];
  };
  auto anchored = [&](TripleId id) {
    const auto& t = view.triple(id);
    return is_query(t.head) || is_query(t.tail);
  };
  // next triple continues the chain in its direction
  auto links = [&](const std::vector<PathStep>& seq, TripleId id) {
    if (anchored(id)) return false;
    for (const auto& s : seq)
      if (s.id == id) return false;
    const auto& t = view.triple(id);
    return seq.front().orientation == Orientation::forward ? t.head == seq.back().exit()
                                                           : t.tail == seq.back().exit();
  };

  std::vector<std::vector<PathStep>> level;
  for (auto id : ids) {
    const auto& t = view.triple(id);
    if (is_query(t.head)) level.push_back({make_step(graph, id, Orientation::forward)});
    if (is_query(t.tail) && t.head != t.tail) level.push_back({make_step(graph, id, Orientation::reverse)});
  }
  std::vector<std::vector<PathStep>> maximal;
  for (std::size_t len = 1; !level.empty(); ++len) {
    std::vector<std::vector<PathStep>> next;
    for (const auto& seq : level) {
      bool can_grow = false;
      for (auto id : ids)
        if (links(seq, id)) can_grow = true;
      if (!can_grow || len == max_length) {
        maximal.push_back(seq);
        continue;
      }
      for (auto id : ids) {
        if (!links(seq, id)) continue;
        auto grown = seq;
        grown.push_back(make_step(graph, id, seq.front().orientation));
        next.push_back(std::move(grown));
      }
    }
    level = std::move(next);
  }

  std::vector<EvidenceChain> out;
  for (auto& seq : maximal) {
    EvidenceChain c;
    c.source = seq.front().entry();
    c.targets = {seq.back().exit()};
    for (const auto& s : seq) c.scores.push_back(score_of(s.id));
    c.steps = std::move(seq);
    c.relation_path = relation_path(c.path());
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(), [](const EvidenceChain& a, const EvidenceChain& b) {
    if (a.scores.front() != b.scores.front()) return a.scores.front() > b.scores.front();
    return a.steps < b.steps;
  });
  return out;
}

std::size_t brute_class_count(const CandidatePool& pool) {
  std::size_t classes = 0;
  for (std::size_t i = 0; i < pool.entries.size(); ++i) {
    bool seen = false;
    for (std::size_t j = 0; j < i && !seen; ++j) {
      const auto& a = pool.entries[i];
      const auto& b = pool.entries[j];
      seen = a.provenance == b.provenance && a.path.source() == b.path.source() &&
             relation_path(a.path) == relation_path(b.path);
    }
    if (!seen) ++classes;
  }
  return classes;
}

KnowledgeGraph random_graph(std::mt19937_64& rng, std::size_t entities, std::size_t relations,
                            std::size_t triples, bool allow_self_loops) {
  std::uniform_int_distribution<std::size_t> pick_e(0, entities - 1), pick_r(0, relations - 1);
  GraphBuilder real;
  for (std::size_t i = 0; i < triples; ++i) {
    auto h = pick_e(rng), t = pick_e(rng);
    if (h == t && !allow_self_loops) continue;
    real.add("e" + std::to_string(h), "r" + std::to_string(pick_r(rng)), "e" + std::to_string(t));
  }
  return std::move(real).build();
}

}  // namespace reg::testing
