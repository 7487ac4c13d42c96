#pragma once
// Answer extraction from reader output and KGQA metrics.

#include <cstddef>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "reg/json_io.hpp"

namespace reg {

// ASCII case folding, trimmed, internal whitespace runs collapsed to one space.
std::string normalize_answer(std::string_view s);

// The first JSON list of strings in the text; otherwise items from
// "Answer:"/"Answers:" lines (comma separated) or bullet lines. Duplicates
// are dropped, keeping the first occurrence.
std::vector<std::string> extract_answers(std::string_view text);

struct Prediction {
  std::string question_id;
  std::vector<std::string> answers;  // rank order
};

// Canonical answer -> alternative surface forms.
using AliasTable = std::map<std::string, std::vector<std::string>>;
AliasTable load_aliases(const std::string& path);  // JSON object

struct QuestionScore {
  std::string question_id;
  std::vector<std::string> predicted;  // normalized, unique, rank order
  std::vector<std::string> gold;       // normalized, unique
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0, recall = 0, f1 = 0;
  bool hit = false;
  bool hit_at_1 = false;
};

struct EvalReport {
  double macro_f1 = 0, micro_f1 = 0, hit = 0, hit_at_1 = 0;
  std::vector<QuestionScore> per_question;  // prediction order
};

// Throws LookupError when a prediction has no gold entry.
EvalReport evaluate(const std::vector<Prediction>& predictions,
                    const std::map<std::string, std::vector<std::string>>& gold,
                    const AliasTable* aliases = nullptr);

json_io::json report_to_json(const EvalReport& report);
void write_report_csv(std::ostream& out, const EvalReport& report);

}  // namespace reg
