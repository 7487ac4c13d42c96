#include "reg/refiner.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "reg/error.hpp"

namespace reg {

using json_io::json;

std::string textualize_path(const ReasoningPath& path, const KnowledgeGraph& graph,
                            const RelationLabels* overrides) {
  if (path.steps.empty()) return "";
  std::string out = graph.entity_label(path.source());
  for (const auto& step : path.steps) {
    const std::string* rel = nullptr;
    if (overrides)
      if (auto it = overrides->find(step.id); it != overrides->end()) rel = &it->second;
    if (!rel) rel = &graph.relation_label(step.triple.relation);
    out += " → [";
    out += *rel;
    if (step.orientation == Orientation::reverse) out += "⁻";
    out += "] → ";
    out += graph.entity_label(step.exit());
  }
  return out;
}

std::vector<RefineDemo> load_refine_demos(const std::string& path) {
  std::vector<RefineDemo> demos;
  for (const auto& j : json_io::read_jsonl_file(path)) {
    RefineDemo d;
    d.question = j.at("question").get<std::string>();
    d.answers = j.value("answers", std::vector<std::string>{});
    d.candidates = j.value("candidates", std::vector<std::string>{});
    d.selection = j.value("selection", std::string{});
    d.explanation = j.value("explanation", std::string{});
    demos.push_back(std::move(d));
  }
  return demos;
}

namespace {

const char* kRefineInstructions =
    "You are given a question, its known answers, and candidate reasoning paths drawn from a "
    "knowledge graph. Each path is a chain of entities joined by relations and reads left to "
    "right; a relation marked with ⁻ is traversed from its tail to its head.\n"
    "Select the subset of candidate paths that together provide sufficient and logically "
    "coherent evidence for reaching the answers from the question. Leave out paths that are "
    "irrelevant or only coincidentally connect the entities.\n"
    "Reply with the selected path numbers as a comma-separated list on the first line (for "
    "example: 1, 3), then a brief explanation.";

void append_task(std::ostringstream& out, const std::string& question,
                 const std::vector<std::string>& answers, const std::vector<std::string>& candidates) {
  out << "Question: " << question << '\n';
  out << "Answers: " << json(answers).dump() << '\n';
  out << "Candidate reasoning paths:\n";
  for (std::size_t i = 0; i < candidates.size(); ++i) out << (i + 1) << ". " << candidates[i] << '\n';
  out << '\n';
}

std::vector<std::string> answer_labels(const Question& q, const KnowledgeGraph& graph) {
  if (!q.answer_labels.empty()) return q.answer_labels;
  std::vector<std::string> labels;
  for (auto a : q.answer_entities) labels.push_back(graph.entity_label(a));
  return labels;
}

}  // namespace

CompletionRequest build_refine_prompt(const Question& q, const CandidatePool& pool,
                                      const KnowledgeGraph& graph,
                                      const std::vector<RefineDemo>& demos) {
  if (pool.empty()) throw Error("question " + q.id + ": cannot refine an empty candidate pool");
  std::ostringstream user;
  for (std::size_t d = 0; d < demos.size(); ++d) {
    user << "Example " << (d + 1) << "\n";
    append_task(user, demos[d].question, demos[d].answers, demos[d].candidates);
    user << "Selection: " << demos[d].selection << '\n';
    if (!demos[d].explanation.empty()) user << "Explanation: " << demos[d].explanation << '\n';
    user << '\n';
  }
  std::vector<std::string> candidates;
  candidates.reserve(pool.size());
  for (const auto& e : pool.entries) candidates.push_back(textualize_path(e.path, graph));
  append_task(user, q.text, answer_labels(q, graph), candidates);
  user << "Selection:";

  CompletionRequest req;
  req.system_text = std::string(kRefineTaskMarker) + "\n" + kRefineInstructions;
  req.user_text = user.str();
  return req;
}

std::optional<Selection> parse_selection(const std::string& response, std::size_t pool_size) {
  std::istringstream in(response);
  std::string line;
  while (std::getline(in, line)) {
    if (std::none_of(line.begin(), line.end(), [](unsigned char c) { return std::isdigit(c); }))
      continue;
    Selection sel;
    std::size_t i = 0;
    while (i < line.size()) {
      if (!std::isdigit(static_cast<unsigned char>(line[i]))) {
        ++i;
        continue;
      }
      std::size_t j = i;
      while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
      auto digits = line.substr(i, j - i);
      i = j;
      // Anything too long to be an index is out of range by definition.
      std::size_t value = digits.size() > 9 ? pool_size + 1 : std::stoul(digits);
      if (value < 1 || value > pool_size) {
        ++sel.dropped;
        continue;
      }
      if (std::find(sel.indices.begin(), sel.indices.end(), value) == sel.indices.end())
        sel.indices.push_back(value);
    }
    return sel;
  }
  return std::nullopt;
}

RefinedSupervision extract_supervision(const std::string& question_id, const CandidatePool& pool,
                                       std::vector<std::size_t> positions, std::string refiner_tag) {
  RefinedSupervision sup;
  sup.question_id = question_id;
  sup.refiner_tag = std::move(refiner_tag);
  for (auto pos : positions) {
    if (pos >= pool.size()) throw LookupError("pool position out of range");
    if (std::find(sup.selected_indices.begin(), sup.selected_indices.end(), pos) !=
        sup.selected_indices.end())
      continue;
    sup.selected_indices.push_back(pos);
    sup.selected_paths.push_back(pool.entries[pos].path);
    for (const auto& s : pool.entries[pos].path.steps) sup.positive_triples.push_back(s.id);
  }
  std::sort(sup.positive_triples.begin(), sup.positive_triples.end());
  sup.positive_triples.erase(std::unique(sup.positive_triples.begin(), sup.positive_triples.end()),
                             sup.positive_triples.end());
  return sup;
}

std::vector<std::size_t> truncate_pool(const CandidatePool& pool, std::size_t limit) {
  std::vector<std::size_t> kept;
  for (auto prov : {Provenance::shortest_path, Provenance::query_neighborhood,
                    Provenance::answer_neighborhood})
    for (std::size_t i = 0; i < pool.size() && kept.size() < limit; ++i)
      if (pool.entries[i].provenance == prov) kept.push_back(i);
  std::sort(kept.begin(), kept.end());
  return kept;
}

RefinedSupervision refine(const Question& q, const CandidatePool& pool, const KnowledgeGraph& graph,
                          LlmClient& client, const RefineOptions& options) {
  if (pool.empty()) throw Error("question " + q.id + ": cannot refine an empty candidate pool");

  auto kept = truncate_pool(pool, options.pool_limit);
  CandidatePool shown;
  shown.representative_answer = pool.representative_answer;
  for (auto i : kept) shown.entries.push_back(pool.entries[i]);

  auto req = build_refine_prompt(q, shown, graph, options.demos);
  auto result = client.complete(req);
  auto selection = parse_selection(result.text, shown.size());

  if (selection && !selection->indices.empty()) {
    std::vector<std::size_t> positions;
    for (auto idx : selection->indices) positions.push_back(kept[idx - 1]);
    return extract_supervision(q.id, pool, std::move(positions), options.refiner_tag);
  }

  switch (options.fallback) {
    case FallbackPolicy::fail:
      throw Error("question " + q.id + ": refiner response has no usable selection");
    case FallbackPolicy::empty: {
      auto sup = extract_supervision(q.id, pool, {}, options.refiner_tag);
      sup.used_fallback = true;
      return sup;
    }
    case FallbackPolicy::weak_supervision:
      break;
  }
  std::vector<std::size_t> positions;
  for (std::size_t i = 0; i < pool.size(); ++i)
    if (pool.entries[i].provenance == Provenance::shortest_path) positions.push_back(i);
  auto sup = extract_supervision(q.id, pool, std::move(positions), options.refiner_tag);
  sup.used_fallback = true;
  return sup;
}

json supervision_to_json(const KnowledgeGraph& graph, const RefinedSupervision& sup) {
  json triples = json::array();
  for (auto id : sup.positive_triples) triples.push_back(json_io::triple_labels(graph, id));
  return {{"question_id", sup.question_id},
          {"selected_indices", sup.selected_indices},
          {"positive_triples", std::move(triples)},
          {"refiner_tag", sup.refiner_tag}};
}

RefinedSupervision supervision_from_json(const KnowledgeGraph& graph, const json& j) {
  RefinedSupervision sup;
  sup.question_id = j.at("question_id").get<std::string>();
  sup.selected_indices = j.value("selected_indices", std::vector<std::size_t>{});
  for (const auto& t : j.at("positive_triples"))
    sup.positive_triples.push_back(json_io::resolve_triple(graph, t));
  std::sort(sup.positive_triples.begin(), sup.positive_triples.end());
  sup.positive_triples.erase(std::unique(sup.positive_triples.begin(), sup.positive_triples.end()),
                             sup.positive_triples.end());
  sup.refiner_tag = j.value("refiner_tag", std::string{});
  return sup;
}

}  // namespace reg
