#include "reg/json_io.hpp"

#include <fstream>

#include "reg/error.hpp"

namespace reg::json_io {

json triple_labels(const KnowledgeGraph& graph, TripleId id) {
  const auto& t = graph.triple(id);
  return json::array({graph.entity_label(t.head), graph.relation_label(t.relation),
                      graph.entity_label(t.tail)});
}

TripleId resolve_triple(const KnowledgeGraph& graph, const json& labels) {
  if (!labels.is_array() || labels.size() != 3)
    throw LookupError("triple must be [h, r, t], got " + labels.dump());
  auto id = graph.find(labels[0].get<std::string>(), labels[1].get<std::string>(),
                       labels[2].get<std::string>());
  if (!id) throw LookupError("triple not in graph: " + labels.dump());
  return *id;
}

const char* orientation_code(Orientation o) { return o == Orientation::forward ? "f" : "b"; }

Orientation parse_orientation(const std::string& code) {
  if (code == "f") return Orientation::forward;
  if (code == "b") return Orientation::reverse;
  throw LookupError("orientation must be f or b, got " + code);
}

json path_to_json(const KnowledgeGraph& graph, const ReasoningPath& path) {
  json triples = json::array();
  json orientations = json::array();
  for (const auto& s : path.steps) {
    triples.push_back(triple_labels(graph, s.id));
    orientations.push_back(orientation_code(s.orientation));
  }
  return {{"triples", std::move(triples)}, {"orientations", std::move(orientations)}};
}

ReasoningPath path_from_json(const KnowledgeGraph& graph, const json& j) {
  const auto& triples = j.at("triples");
  const auto& orientations = j.at("orientations");
  if (triples.size() != orientations.size())
    throw LookupError("path triples/orientations length mismatch");
  ReasoningPath path;
  for (std::size_t i = 0; i < triples.size(); ++i)
    path.steps.push_back(make_step(graph, resolve_triple(graph, triples[i]),
                                   parse_orientation(orientations[i].get<std::string>())));
  return path;
}

std::vector<json> read_jsonl(std::istream& in) {
  std::vector<json> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
    }
  }
  return records;
}

std::vector<json> read_jsonl_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return read_jsonl(in);
}

void write_jsonl(std::ostream& out, const std::vector<json>& records) {
  for (const auto& r : records) out << r.dump() << '\n';
}

void write_jsonl_file(const std::string& path, const std::vector<json>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  write_jsonl(out, records);
}

}  // namespace reg::json_io
