#include "reg/kg_store.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

#include "reg/error.hpp"

namespace reg {

namespace {

const std::vector<TripleId> kNoEdges;

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return c == ' ' || c == '\t' || c == '\r'; });
}

void add_sorted_unique(std::vector<EntityId>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

}  // namespace

std::uint32_t Vocabulary::intern(std::string_view label) {
  std::string key(label);
  auto it = ids_.find(key);
  if (it != ids_.end()) return it->second;
  auto id = static_cast<std::uint32_t>(labels_.size());
  labels_.push_back(key);
  ids_.emplace(std::move(key), id);
  return id;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view label) const {
  auto it = ids_.find(std::string(label));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::label(std::uint32_t id) const {
  if (id >= labels_.size()) throw LookupError("unknown vocabulary id " + std::to_string(id));
  return labels_[id];
}

TripleId GraphBuilder::add(std::string_view head, std::string_view relation,
                           std::string_view tail) {
  auto& g = graph_;
  Triple t{g.entities_.intern(head), g.relations_.intern(relation), g.entities_.intern(tail)};
  if (auto it = g.lookup_.find(t); it != g.lookup_.end()) {
    ++g.duplicates_;
    return it->second;
  }
  auto id = static_cast<TripleId>(g.triples_.size());
  g.triples_.push_back(t);
  g.lookup_.emplace(t, id);
  if (g.out_.size() < g.entities_.size()) {
    g.out_.resize(g.entities_.size());
    g.in_.resize(g.entities_.size());
  }
  g.out_[t.head].push_back(id);
  g.in_[t.tail].push_back(id);
  return id;
}

KnowledgeGraph GraphBuilder::build() && {
  graph_.out_.resize(graph_.entities_.size());
  graph_.in_.resize(graph_.entities_.size());
  return std::move(graph_);
}

KnowledgeGraph KnowledgeGraph::load(std::istream& in, TripleFormat format) {
  GraphBuilder builder;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;
    if (format == TripleFormat::tsv) {
      auto fields = split_tabs(line);
      if (fields.size() != 3)
        throw ParseError(lineno, "expected 3 tab-separated fields, got " +
                                     std::to_string(fields.size()));
      if (fields[0].empty() || fields[1].empty() || fields[2].empty())
        throw ParseError(lineno, "empty field");
      builder.add(fields[0], fields[1], fields[2]);
    } else {
      nlohmann::json rec;
      try {
        rec = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
      }
      if (!rec.is_object() || rec.size() != 3 || !rec.contains("h") || !rec.contains("r") ||
          !rec.contains("t"))
        throw ParseError(lineno, "expected an object with exactly keys h, r, t");
      for (const char* key : {"h", "r", "t"})
        if (!rec[key].is_string()) throw ParseError(lineno, std::string("field ") + key + " is not a string");
      builder.add(rec["h"].get<std::string>(), rec["r"].get<std::string>(),
                  rec["t"].get<std::string>());
    }
  }
  return std::move(builder).build();
}

KnowledgeGraph KnowledgeGraph::load_file(const std::string& path, TripleFormat format) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return load(in, format);
}

const Triple& KnowledgeGraph::triple(TripleId id) const {
  if (id >= triples_.size()) throw LookupError("unknown triple id " + std::to_string(id));
  return triples_[id];
}

std::optional<TripleId> KnowledgeGraph::find(const Triple& t) const {
  auto it = lookup_.find(t);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::optional<TripleId> KnowledgeGraph::find(std::string_view head, std::string_view relation,
                                             std::string_view tail) const {
  auto h = entities_.find(head);
  auto r = relations_.find(relation);
  auto t = entities_.find(tail);
  if (!h || !r || !t) return std::nullopt;
  return find(Triple{*h, *r, *t});
}

std::span<const TripleId> KnowledgeGraph::out_edges(EntityId e) const {
  if (e >= out_.size()) throw LookupError("unknown entity id " + std::to_string(e));
  return out_[e];
}

std::span<const TripleId> KnowledgeGraph::in_edges(EntityId e) const {
  if (e >= in_.size()) throw LookupError("unknown entity id " + std::to_string(e));
  return in_[e];
}

std::vector<TripleId> KnowledgeGraph::neighbors(EntityId e, Direction direction) const {
  auto out = out_edges(e);
  auto in = in_edges(e);
  switch (direction) {
    case Direction::out:
      return {out.begin(), out.end()};
    case Direction::in:
      return {in.begin(), in.end()};
    case Direction::both:
      break;
  }
  std::vector<TripleId> merged;
  merged.reserve(out.size() + in.size());
  std::set_union(out.begin(), out.end(), in.begin(), in.end(), std::back_inserter(merged));
  return merged;
}

void KnowledgeGraph::save_tsv(std::ostream& out) const {
  for (const auto& t : triples_)
    out << entities_.label(t.head) << '\t' << relations_.label(t.relation) << '\t'
        << entities_.label(t.tail) << '\n';
}

GraphView::GraphView(const KnowledgeGraph& graph) : graph_(&graph) {
  ids_.resize(graph.size());
  for (TripleId i = 0; i < graph.size(); ++i) ids_[i] = i;
  for (auto id : ids_) {
    const auto& t = graph.triple(id);
    out_[t.head].push_back(id);
    in_[t.tail].push_back(id);
  }
}

GraphView::GraphView(const KnowledgeGraph& graph, std::vector<TripleId> scope)
    : graph_(&graph), ids_(std::move(scope)) {
  std::sort(ids_.begin(), ids_.end());
  ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
  for (auto id : ids_) {
    const auto& t = graph.triple(id);  // throws on unknown id
    out_[t.head].push_back(id);
    in_[t.tail].push_back(id);
  }
}

bool GraphView::contains(TripleId id) const {
  return std::binary_search(ids_.begin(), ids_.end(), id);
}

std::span<const TripleId> GraphView::out_edges(EntityId e) const {
  auto it = out_.find(e);
  return it == out_.end() ? std::span<const TripleId>(kNoEdges) : std::span<const TripleId>(it->second);
}

std::span<const TripleId> GraphView::in_edges(EntityId e) const {
  auto it = in_.find(e);
  return it == in_.end() ? std::span<const TripleId>(kNoEdges) : std::span<const TripleId>(it->second);
}

std::vector<TripleId> GraphView::neighbors(EntityId e, Direction direction) const {
  auto out = out_edges(e);
  auto in = in_edges(e);
  if (direction == Direction::out) return {out.begin(), out.end()};
  if (direction == Direction::in) return {in.begin(), in.end()};
  std::vector<TripleId> merged;
  merged.reserve(out.size() + in.size());
  std::set_union(out.begin(), out.end(), in.begin(), in.end(), std::back_inserter(merged));
  return merged;
}

std::vector<EntityId> GraphView::entities() const {
  std::vector<EntityId> result;
  result.reserve(out_.size() + in_.size());
  for (const auto& [e, _] : out_) result.push_back(e);
  for (const auto& [e, _] : in_) result.push_back(e);
  add_sorted_unique(result);
  return result;
}

GraphView working_graph(const KnowledgeGraph& graph, const Question& q) {
  if (q.scope) return GraphView(graph, *q.scope);
  return GraphView(graph);
}

namespace {

std::vector<EntityId> resolve_labels(const nlohmann::json& arr, const KnowledgeGraph& graph,
                                     const std::string& qid, const char* field,
                                     std::vector<std::string>& warnings,
                                     std::vector<std::string>* labels_out, std::size_t lineno) {
  std::vector<EntityId> ids;
  if (arr.is_null()) return ids;
  if (!arr.is_array()) throw ParseError(lineno, std::string(field) + " must be a list");
  for (const auto& item : arr) {
    if (!item.is_string()) throw ParseError(lineno, std::string(field) + " entries must be strings");
    auto label = item.get<std::string>();
    if (labels_out) labels_out->push_back(label);
    if (auto id = graph.entities().find(label))
      ids.push_back(*id);
    else
      warnings.push_back("question " + qid + ": unresolvable " + field + " label '" + label + "'");
  }
  add_sorted_unique(ids);
  return ids;
}

}  // namespace

QuestionSet load_questions(std::istream& in, const KnowledgeGraph& graph) {
  QuestionSet set;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (blank(line)) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
    }
    if (!rec.is_object() || !rec.contains("id")) throw ParseError(lineno, "question record needs an id");
    Question q;
    q.id = rec["id"].is_string() ? rec["id"].get<std::string>() : rec["id"].dump();
    q.text = rec.value("question", std::string{});
    q.query_entities = resolve_labels(rec.value("question_entities", nlohmann::json()), graph, q.id,
                                      "question_entities", set.warnings, nullptr, lineno);
    q.answer_entities = resolve_labels(rec.value("answer_entities", nlohmann::json()), graph, q.id,
                                       "answer_entities", set.warnings, &q.answer_labels, lineno);
    if (rec.contains("scope") && !rec["scope"].is_null()) {
      std::vector<TripleId> scope;
      for (const auto& t : rec["scope"]) {
        if (!t.is_array() || t.size() != 3) throw ParseError(lineno, "scope entries must be [h, r, t]");
        auto id = graph.find(t[0].get<std::string>(), t[1].get<std::string>(),
                             t[2].get<std::string>());
        if (!id) {
          set.warnings.push_back("question " + q.id + ": unresolvable scope triple " + t.dump());
          continue;
        }
        scope.push_back(*id);
      }
      q.scope = std::move(scope);
    }
    set.questions.push_back(std::move(q));
  }
  return set;
}

QuestionSet load_questions_file(const std::string& path, const KnowledgeGraph& graph) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return load_questions(in, graph);
}

PathStep make_step(const KnowledgeGraph& graph, TripleId id, Orientation orientation) {
  return PathStep{id, graph.triple(id), orientation};
}

std::vector<TripleId> ReasoningPath::triple_ids() const {
  std::vector<TripleId> ids;
  ids.reserve(steps.size());
  for (const auto& s : steps) ids.push_back(s.id);
  return ids;
}

bool ReasoningPath::is_connected() const {
  if (steps.empty()) return false;
  for (std::size_t i = 1; i < steps.size(); ++i)
    if (steps[i - 1].exit() != steps[i].entry()) return false;
  return true;
}

}  // namespace reg
