#include "reg/evaluator.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>
#include <unordered_map>
#include <unordered_set>

#include "reg/error.hpp"

namespace reg {

using json_io::json;

std::string normalize_answer(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : s) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
  }
  return out;
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// End of the bracketed span starting at text[open], honoring JSON strings.
std::size_t matching_bracket(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (c == '\\') ++i;
      else if (c == '"') in_string = false;
      continue;
    }
    if (c == '"') in_string = true;
    else if (c == '[') ++depth;
    else if (c == ']' && --depth == 0) return i;
  }
  return std::string_view::npos;
}

std::optional<std::vector<std::string>> first_json_list(std::string_view text) {
  for (auto open = text.find('['); open != std::string_view::npos; open = text.find('[', open + 1)) {
    auto close = matching_bracket(text, open);
    if (close == std::string_view::npos) continue;
    auto parsed = json::parse(text.substr(open, close - open + 1), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_array()) continue;
    if (!std::all_of(parsed.begin(), parsed.end(), [](const json& v) { return v.is_string(); })) continue;
    return parsed.get<std::vector<std::string>>();
  }
  return std::nullopt;
}

std::vector<std::string> split_commas(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    auto comma = s.find(',', start);
    auto item = trim(s.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (!item.empty()) out.push_back(std::move(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<std::string> fallback_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    auto line = trim(text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start));
    start = nl == std::string_view::npos ? text.size() : nl + 1;
    std::string lower = normalize_answer(line);
    for (const char* prefix : {"answers:", "answer:"}) {
      std::string_view p(prefix);
      if (lower.rfind(p, 0) == 0) {
        auto items = split_commas(std::string_view(line).substr(p.size()));
        out.insert(out.end(), items.begin(), items.end());
        break;
      }
    }
    for (std::string_view bullet : {"- ", "* ", "• "}) {
      if (line.rfind(bullet, 0) == 0) {
        auto item = trim(std::string_view(line).substr(bullet.size()));
        if (!item.empty()) out.push_back(std::move(item));
        break;
      }
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> extract_answers(std::string_view text) {
  auto list = first_json_list(text);
  auto raw = list ? std::move(*list) : fallback_list(text);
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (auto& a : raw) {
    auto t = trim(a);
    if (t.empty() || !seen.insert(t).second) continue;
    out.push_back(std::move(t));
  }
  return out;
}

AliasTable load_aliases(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  auto j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError(0, path + ": expected a JSON object");
  AliasTable table;
  for (auto it = j.begin(); it != j.end(); ++it) table[it.key()] = it.value().get<std::vector<std::string>>();
  return table;
}

EvalReport evaluate(const std::vector<Prediction>& predictions,
                    const std::map<std::string, std::vector<std::string>>& gold, const AliasTable* aliases) {
  std::unordered_map<std::string, std::string> canonical;
  if (aliases)
    for (const auto& [name, forms] : *aliases)
      for (const auto& f : forms) canonical.emplace(normalize_answer(f), normalize_answer(name));
  auto canon = [&](const std::string& s) {
    auto n = normalize_answer(s);
    auto it = canonical.find(n);
    return it == canonical.end() ? n : it->second;
  };
  auto unique_in_order = [](std::vector<std::string> v) {
    std::vector<std::string> out;
    for (auto& s : v)
      if (!s.empty() && std::find(out.begin(), out.end(), s) == out.end()) out.push_back(std::move(s));
    return out;
  };

  EvalReport report;
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& p : predictions) {
    auto g = gold.find(p.question_id);
    if (g == gold.end()) throw LookupError("no gold answers for question " + p.question_id);
    QuestionScore s;
    s.question_id = p.question_id;
    std::vector<std::string> pred, ref;
    for (const auto& a : p.answers) pred.push_back(canon(a));
    for (const auto& a : g->second) ref.push_back(canon(a));
    s.predicted = unique_in_order(std::move(pred));
    s.gold = unique_in_order(std::move(ref));
    for (const auto& a : s.predicted)
      if (std::find(s.gold.begin(), s.gold.end(), a) != s.gold.end()) ++s.tp;
    s.fp = s.predicted.size() - s.tp;
    s.fn = s.gold.size() - s.tp;
    if (!s.predicted.empty()) s.precision = static_cast<double>(s.tp) / static_cast<double>(s.predicted.size());
    if (!s.gold.empty()) s.recall = static_cast<double>(s.tp) / static_cast<double>(s.gold.size());
    if (s.tp > 0) s.f1 = 2.0 * static_cast<double>(s.tp) / static_cast<double>(2 * s.tp + s.fp + s.fn);
    s.hit = s.tp > 0;
    s.hit_at_1 = !s.predicted.empty() &&
                 std::find(s.gold.begin(), s.gold.end(), s.predicted.front()) != s.gold.end();
    tp += s.tp;
    fp += s.fp;
    fn += s.fn;
    report.per_question.push_back(std::move(s));
  }
  const auto n = report.per_question.size();
  if (n == 0) return report;
  for (const auto& s : report.per_question) {
    report.macro_f1 += s.f1;
    report.hit += s.hit ? 1.0 : 0.0;
    report.hit_at_1 += s.hit_at_1 ? 1.0 : 0.0;
  }
  report.macro_f1 /= static_cast<double>(n);
  report.hit /= static_cast<double>(n);
  report.hit_at_1 /= static_cast<double>(n);
  if (tp > 0) report.micro_f1 = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  return report;
}

json report_to_json(const EvalReport& report) {
  json rows = json::array();
  for (const auto& s : report.per_question)
    rows.push_back({{"question_id", s.question_id},
                    {"predicted", s.predicted},
                    {"gold", s.gold},
                    {"tp", s.tp},
                    {"fp", s.fp},
                    {"fn", s.fn},
                    {"precision", s.precision},
                    {"recall", s.recall},
                    {"f1", s.f1},
                    {"hit", s.hit},
                    {"hit_at_1", s.hit_at_1}});
  return {{"macro_f1", report.macro_f1},
          {"micro_f1", report.micro_f1},
          {"hit", report.hit},
          {"hit_at_1", report.hit_at_1},
          {"questions", report.per_question.size()},
          {"per_question", std::move(rows)}};
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  };
  out << "question_id,tp,fp,fn,precision,recall,f1,hit,hit_at_1\n";
  for (const auto& s : report.per_question)
    out << quote(s.question_id) << ',' << s.tp << ',' << s.fp << ',' << s.fn << ',' << s.precision << ','
        << s.recall << ',' << s.f1 << ',' << (s.hit ? 1 : 0) << ',' << (s.hit_at_1 ? 1 : 0) << '\n';
}

}  // namespace reg
