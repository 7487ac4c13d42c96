#include "reg/reorganizer.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "reg/error.hpp"

namespace reg {

using json_io::json;

namespace {

bool contains_sorted(const std::vector<EntityId>& sorted, EntityId e) {
  return std::binary_search(sorted.begin(), sorted.end(), e);
}

std::vector<EntityId> sorted_unique(std::span<const EntityId> ids) {
  std::vector<EntityId> out(ids.begin(), ids.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

EvidenceChain finish_chain(std::vector<PathStep> steps, std::vector<double> scores) {
  EvidenceChain c;
  c.source = steps.front().entry();
  c.targets = {steps.back().exit()};
  c.steps = std::move(steps);
  c.scores = std::move(scores);
  c.relation_path = relation_path(c.path());
  return c;
}

}  // namespace

bool is_valid_chain(const EvidenceChain& chain) {
  if (chain.steps.empty() || chain.targets.empty()) return false;
  if (chain.steps.front().entry() != chain.source) return false;
  if (!chain.path().is_connected()) return false;
  if (chain.scores.size() != chain.steps.size()) return false;
  if (!std::is_sorted(chain.targets.begin(), chain.targets.end()) ||
      std::adjacent_find(chain.targets.begin(), chain.targets.end()) != chain.targets.end())
    return false;
  return chain.relation_path == relation_path(chain.path());
}

std::pair<std::vector<TripleId>, std::vector<TripleId>> split_source(
    const GraphView& view, std::span<const TripleId> retrieved, std::span<const EntityId> query_entities) {
  auto q = sorted_unique(query_entities);
  std::pair<std::vector<TripleId>, std::vector<TripleId>> out;
  for (auto id : retrieved) {
    const auto& t = view.triple(id);
    if (contains_sorted(q, t.head) || contains_sorted(q, t.tail))
      out.first.push_back(id);
    else
      out.second.push_back(id);
  }
  return out;
}

std::vector<EvidenceChain> expand_chains(const GraphView& view, const RetrievedSubgraph& retrieved,
                                         std::span<const EntityId> query_entities, std::size_t max_length,
                                         std::size_t max_chains) {
  const auto& graph = view.graph();
  auto q = sorted_unique(query_entities);
  std::vector<TripleId> ids;
  std::unordered_map<TripleId, double> score;
  for (const auto& st : retrieved.triples) {
    if (score.emplace(st.id, st.score).second) ids.push_back(st.id);
  }
  auto [src, tgt] = split_source(view, ids, q);

  std::unordered_map<EntityId, std::vector<TripleId>> by_head;
  std::unordered_map<EntityId, std::vector<TripleId>> by_tail;
  for (auto id : tgt) {
    const auto& t = view.triple(id);
    by_head[t.head].push_back(id);
    by_tail[t.tail].push_back(id);
  }

  struct Partial {
    std::vector<PathStep> steps;
    std::vector<double> scores;
  };
  std::vector<Partial> frontier;
  for (auto id : src) {
    const auto& t = view.triple(id);
    if (contains_sorted(q, t.head)) frontier.push_back({{make_step(graph, id, Orientation::forward)}, {score[id]}});
    if (contains_sorted(q, t.tail) && t.head != t.tail)
      frontier.push_back({{make_step(graph, id, Orientation::reverse)}, {score[id]}});
  }

  static const std::vector<TripleId> kNone;
  std::vector<EvidenceChain> chains;
  while (!frontier.empty() && chains.size() < max_chains) {
    auto partial = std::move(frontier.back());
    frontier.pop_back();
    const auto& last = partial.steps.back();
    bool forward = partial.steps.front().orientation == Orientation::forward;
    const auto& index = forward ? by_head : by_tail;
    auto it = index.find(last.exit());
    const auto& next = it == index.end() ? kNone : it->second;

    bool extended = false;
    if (max_length == kUnlimitedLength || partial.steps.size() < max_length) {
      for (auto id : next) {
        bool used = std::any_of(partial.steps.begin(), partial.steps.end(),
                                [&](const PathStep& s) { return s.id == id; });
        if (used) continue;
        Partial grown = partial;
        grown.steps.push_back(make_step(graph, id, forward ? Orientation::forward : Orientation::reverse));
        grown.scores.push_back(score[id]);
        frontier.push_back(std::move(grown));
        extended = true;
      }
    }
    if (!extended) chains.push_back(finish_chain(std::move(partial.steps), std::move(partial.scores)));
  }

  std::stable_sort(chains.begin(), chains.end(), [](const EvidenceChain& a, const EvidenceChain& b) {
    if (a.scores.front() != b.scores.front()) return a.scores.front() > b.scores.front();
    return a.steps < b.steps;
  });
  return chains;
}

std::vector<EvidenceChain> merge_multi_answer(std::vector<EvidenceChain> chains) {
  std::vector<EvidenceChain> out;
  std::map<std::pair<EntityId, RelationPath>, std::size_t> group;
  for (auto& c : chains) {
    auto [it, inserted] = group.try_emplace({c.source, c.relation_path}, out.size());
    if (inserted) {
      out.push_back(std::move(c));
      continue;
    }
    auto& rep = out[it->second];
    std::vector<EntityId> targets;
    std::set_union(rep.targets.begin(), rep.targets.end(), c.targets.begin(), c.targets.end(),
                   std::back_inserter(targets));
    if (c.steps < rep.steps) {
      rep.steps = std::move(c.steps);
      rep.scores = std::move(c.scores);
    }
    rep.targets = std::move(targets);
  }
  return out;
}

std::vector<std::vector<std::size_t>> multi_entity_groups(const std::vector<EvidenceChain>& chains,
                                                         std::span<const EntityId> query_entities) {
  std::vector<std::vector<std::size_t>> groups;
  if (sorted_unique(query_entities).size() < 2) return groups;
  const auto n = chains.size();
  std::vector<bool> grouped(n, false);
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (grouped[seed]) continue;
    std::vector<std::size_t> members{seed};
    std::vector<EntityId> sources{chains[seed].source};
    auto common = chains[seed].targets;
    for (std::size_t j = seed + 1; j < n; ++j) {
      if (grouped[j]) continue;
      if (std::find(sources.begin(), sources.end(), chains[j].source) != sources.end()) continue;
      std::vector<EntityId> inter;
      std::set_intersection(common.begin(), common.end(), chains[j].targets.begin(), chains[j].targets.end(),
                            std::back_inserter(inter));
      if (inter.empty()) continue;
      members.push_back(j);
      sources.push_back(chains[j].source);
      common = std::move(inter);
    }
    if (members.size() < 2) continue;
    for (auto m : members) grouped[m] = true;
    groups.push_back(std::move(members));
  }
  return groups;
}

std::vector<EvidenceChain> merge_multi_entity(std::vector<EvidenceChain> chains,
                                              std::span<const EntityId> query_entities) {
  auto groups = multi_entity_groups(chains, query_entities);
  if (groups.empty()) return chains;
  std::vector<bool> grouped(chains.size(), false);
  std::vector<EvidenceChain> out;
  for (const auto& members : groups) {
    auto common = chains[members.front()].targets;
    for (auto m : members) {
      std::vector<EntityId> inter;
      std::set_intersection(common.begin(), common.end(), chains[m].targets.begin(), chains[m].targets.end(),
                            std::back_inserter(inter));
      common = std::move(inter);
    }
    for (auto m : members) {
      grouped[m] = true;
      out.push_back(chains[m]);
      out.back().targets = common;
    }
  }
  for (std::size_t i = 0; i < chains.size(); ++i)
    if (!grouped[i]) out.push_back(std::move(chains[i]));
  return out;
}

std::string render_chain(const EvidenceChain& chain, const KnowledgeGraph& graph,
                         const RelationLabels* overrides) {
  auto text = textualize_path(chain.path(), graph, overrides);
  if (chain.targets.size() == 1 && chain.targets.front() == chain.steps.back().exit()) return text;
  static const std::string kArrow = " → ";
  auto cut = text.rfind(kArrow);
  std::string targets;
  if (chain.targets.size() == 1) {
    targets = graph.entity_label(chain.targets.front());
  } else {
    targets = "{";
    for (std::size_t i = 0; i < chain.targets.size(); ++i) {
      if (i) targets += ", ";
      targets += graph.entity_label(chain.targets[i]);
    }
    targets += "}";
  }
  return text.substr(0, cut + kArrow.size()) + targets;
}

std::string render_triple(TripleId id, const KnowledgeGraph& graph, const RelationLabels* overrides) {
  const auto& t = graph.triple(id);
  const std::string* rel = &graph.relation_label(t.relation);
  if (overrides)
    if (auto it = overrides->find(id); it != overrides->end()) rel = &it->second;
  return "(" + graph.entity_label(t.head) + ", " + *rel + ", " + graph.entity_label(t.tail) + ")";
}

std::vector<QaDemo> load_qa_demos(const std::string& path) {
  std::vector<QaDemo> demos;
  for (const auto& j : json_io::read_jsonl_file(path)) {
    QaDemo d;
    d.question = j.at("question").get<std::string>();
    d.evidence = j.value("evidence", std::vector<std::string>{});
    d.answers = j.value("answers", std::vector<std::string>{});
    d.explanation = j.value("explanation", std::string{});
    demos.push_back(std::move(d));
  }
  return demos;
}

namespace {

const char* kAnswerInstructions =
    "Answer the question using the evidence chains retrieved from a knowledge graph. Each chain "
    "starts at an entity mentioned in the question and reads left to right; a relation marked "
    "with ⁻ is traversed from its tail to its head, and entities in braces are alternative "
    "endpoints reached through the same relations.\n"
    "Ground every answer in the evidence. If the evidence is insufficient, answer from your own "
    "knowledge.\n";

void append_evidence(std::ostringstream& out, const std::string& question,
                     const std::vector<std::string>& evidence) {
  out << "Question: " << question << '\n';
  out << "Evidence:\n";
  if (evidence.empty()) out << kNoEvidenceMarker << '\n';
  for (std::size_t i = 0; i < evidence.size(); ++i) out << (i + 1) << ". " << evidence[i] << '\n';
  out << '\n';
}

}  // namespace

CompletionRequest build_qa_prompt(const Question& q, const std::vector<std::string>& evidence,
                                  const std::vector<QaDemo>& demos, const QaPromptOptions& options) {
  CompletionRequest req;
  req.system_text = std::string(kAnswerTaskMarker) + "\n" + kAnswerInstructions;
  if (options.include_explanations)
    req.system_text += "Explain your reasoning in one or two sentences, then give the answers as a JSON list "
                       "of strings, most likely answer first, for example [\"Paris\"].";
  else
    req.system_text += "Reply with only a JSON list of answer strings, most likely answer first, for example "
                       "[\"Paris\"].";

  std::ostringstream user;
  for (std::size_t d = 0; d < demos.size(); ++d) {
    user << "Example " << (d + 1) << "\n";
    append_evidence(user, demos[d].question, demos[d].evidence);
    if (options.include_explanations && !demos[d].explanation.empty())
      user << "Explanation: " << demos[d].explanation << '\n';
    user << "Answer: " << json(demos[d].answers).dump() << "\n\n";
  }
  append_evidence(user, q.text, evidence);
  user << "Answer:";
  req.user_text = user.str();
  return req;
}

CompletionRequest build_qa_prompt(const Question& q, const std::vector<EvidenceChain>& chains,
                                  const KnowledgeGraph& graph, const std::vector<QaDemo>& demos,
                                  const QaPromptOptions& options, const RelationLabels* overrides) {
  std::vector<std::string> lines;
  lines.reserve(chains.size());
  for (const auto& c : chains) lines.push_back(render_chain(c, graph, overrides));
  return build_qa_prompt(q, lines, demos, options);
}

std::vector<EvidenceChain> reorganize(const GraphView& view, const RetrievedSubgraph& retrieved,
                                      const Question& q, const ReorganizeOptions& options) {
  auto chains = expand_chains(view, retrieved, q.query_entities, options.max_length, options.max_chains);
  chains = merge_multi_answer(std::move(chains));
  return merge_multi_entity(std::move(chains), q.query_entities);
}

json chains_to_json(const KnowledgeGraph& graph, const std::string& question_id,
                    const std::vector<EvidenceChain>& chains, const RelationLabels* overrides) {
  json arr = json::array();
  for (const auto& c : chains) {
    json targets = json::array();
    for (auto t : c.targets) targets.push_back(graph.entity_label(t));
    json relations = json::array();
    json labels = json::array();
    for (const auto& s : c.steps) {
      relations.push_back(graph.relation_label(s.triple.relation));
      const std::string* label = &graph.relation_label(s.triple.relation);
      if (overrides)
        if (auto it = overrides->find(s.id); it != overrides->end()) label = &it->second;
      labels.push_back(*label);
    }
    json rec{{"steps", json_io::path_to_json(graph, c.path())},
             {"source", graph.entity_label(c.source)},
             {"targets", std::move(targets)},
             {"relation_path", std::move(relations)},
             {"scores", c.scores}};
    if (labels != rec["relation_path"]) rec["relation_labels"] = std::move(labels);
    arr.push_back(std::move(rec));
  }
  return {{"question_id", question_id}, {"chains", std::move(arr)}};
}

ChainRecord chains_from_json(const KnowledgeGraph& graph, const json& j) {
  auto entity = [&](const std::string& label) {
    auto id = graph.entities().find(label);
    if (!id) throw LookupError("unknown entity " + label);
    return *id;
  };
  ChainRecord rec;
  rec.question_id = j.at("question_id").get<std::string>();
  for (const auto& c : j.at("chains")) {
    EvidenceChain chain;
    chain.steps = json_io::path_from_json(graph, c.at("steps")).steps;
    if (chain.steps.empty()) throw LookupError("chain without steps in " + rec.question_id);
    chain.source = entity(c.at("source").get<std::string>());
    for (const auto& t : c.at("targets")) chain.targets.push_back(entity(t.get<std::string>()));
    std::sort(chain.targets.begin(), chain.targets.end());
    chain.scores = c.value("scores", std::vector<double>(chain.steps.size(), 0.0));
    chain.relation_path = relation_path(chain.path());
    if (c.contains("relation_labels")) {
      auto labels = c["relation_labels"].get<std::vector<std::string>>();
      for (std::size_t i = 0; i < std::min(labels.size(), chain.steps.size()); ++i)
        if (labels[i] != graph.relation_label(chain.steps[i].triple.relation))
          rec.relation_labels[chain.steps[i].id] = labels[i];
    }
    rec.chains.push_back(std::move(chain));
  }
  return rec;
}

}  // namespace reg
