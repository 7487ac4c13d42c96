#pragma once

#include <string>

#include "reg/kg_store.hpp"

namespace reg::testing {

inline std::string data_path(const std::string& rel) { return std::string(REG_TEST_DATA_DIR) + "/" + rel; }

inline KnowledgeGraph fixture_graph() { return KnowledgeGraph::load_file(data_path("fixture/kg.tsv"), TripleFormat::tsv); }

inline QuestionSet fixture_questions(const KnowledgeGraph& g) {
  return load_questions_file(data_path("fixture/questions.jsonl"), g);
}

}  // namespace reg::testing
