#pragma once
// Shared JSON/JSONL encoding for graph-referencing records.

#include <functional>
#include <istream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <string>
#include <vector>

#include "reg/kg_store.hpp"

namespace reg::json_io {

using json = nlohmann::json;

json triple_labels(const KnowledgeGraph& graph, TripleId id);
// Throws LookupError if the [h, r, t] labels do not name a triple of graph.
TripleId resolve_triple(const KnowledgeGraph& graph, const json& labels);

const char* orientation_code(Orientation o);
Orientation parse_orientation(const std::string& code);

json path_to_json(const KnowledgeGraph& graph, const ReasoningPath& path);
ReasoningPath path_from_json(const KnowledgeGraph& graph, const json& j);

// Reads one JSON value per nonblank line. Throws ParseError with the line number.
std::vector<json> read_jsonl(std::istream& in);
std::vector<json> read_jsonl_file(const std::string& path);
void write_jsonl(std::ostream& out, const std::vector<json>& records);
void write_jsonl_file(const std::string& path, const std::vector<json>& records);

}  // namespace reg::json_io
