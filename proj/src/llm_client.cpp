#include "reg/llm_client.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <httplib.h>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>
#include <vector>

#include "reg/error.hpp"

namespace reg {

using json = nlohmann::json;

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::mock:
      return "mock";
    case Backend::replay:
      return "replay";
    case Backend::remote:
      return "remote";
  }
  return "?";
}

std::string request_digest(const CompletionRequest& req) {
  auto canonical = json::array({req.system_text, req.user_text, req.temperature, req.seed}).dump();
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(canonical.data(), canonical.size(), md, &len, EVP_sha256(), nullptr);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i)
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

std::size_t count_whitespace_tokens(const std::string& text) {
  std::istringstream in(text);
  std::size_t n = 0;
  std::string tok;
  while (in >> tok) ++n;
  return n;
}

CompletionResult LlmClient::complete(const CompletionRequest& req) {
  if (req.temperature < 0) throw ConfigError("temperature must be >= 0");
  return do_complete(req);
}

// ---------------------------------------------------------------------------
// Mock

namespace {

std::vector<std::string> lines_of(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.emplace_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

// "12. rest" -> (12, "rest")
std::optional<std::pair<std::size_t, std::string>> numbered_line(const std::string& line) {
  std::size_t i = 0;
  while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
  if (i == 0 || i + 1 >= line.size() || line[i] != '.' || line[i + 1] != ' ') return std::nullopt;
  return std::make_pair(static_cast<std::size_t>(std::stoul(line.substr(0, i))), line.substr(i + 2));
}

const std::string kArrow = " → ";

std::string last_segment(const std::string& chain) {
  auto pos = chain.rfind(kArrow);
  return pos == std::string::npos ? chain : chain.substr(pos + kArrow.size());
}

std::vector<std::string> split_list(std::string s, const std::string& sep) {
  std::vector<std::string> items;
  std::size_t start = 0;
  while (true) {
    auto pos = s.find(sep, start);
    items.push_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + sep.size();
  }
  return items;
}

std::vector<std::string> chain_targets(const std::string& evidence) {
  // Flat triple "(h, r, t)" or a chain ending in "t" or "{t1, t2}".
  if (evidence.size() >= 2 && evidence.front() == '(' && evidence.back() == ')') {
    auto parts = split_list(evidence.substr(1, evidence.size() - 2), ", ");
    return {parts.back()};
  }
  auto last = last_segment(evidence);
  if (last.size() >= 2 && last.front() == '{' && last.back() == '}')
    return split_list(last.substr(1, last.size() - 2), ", ");
  return {last};
}

std::string mock_refine(const std::vector<std::string>& lines) {
  std::vector<std::string> answers;
  std::vector<std::size_t> chosen;
  bool in_candidates = false;
  for (const auto& line : lines) {
    if (line.rfind("Answers: ", 0) == 0) {
      try {
        answers = json::parse(line.substr(9)).get<std::vector<std::string>>();
      } catch (const json::exception&) {
        answers.clear();
      }
    } else if (line == "Candidate reasoning paths:") {
      in_candidates = true;
    } else if (in_candidates) {
      auto numbered = numbered_line(line);
      if (!numbered) {
        in_candidates = false;
        continue;
      }
      auto target = last_segment(numbered->second);
      if (std::find(answers.begin(), answers.end(), target) != answers.end())
        chosen.push_back(numbered->first);
    }
  }
  if (chosen.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < chosen.size(); ++i) out += (i ? ", " : "") + std::to_string(chosen[i]);
  return out;
}

std::string mock_answer(const std::vector<std::string>& lines) {
  bool in_evidence = false;
  for (const auto& line : lines) {
    if (line == "Evidence:") {
      in_evidence = true;
      continue;
    }
    if (!in_evidence) continue;
    if (auto numbered = numbered_line(line)) return json(chain_targets(numbered->second)).dump();
    if (!line.empty()) break;
  }
  return "[]";
}

}  // namespace

CompletionResult MockClient::do_complete(const CompletionRequest& req) {
  // Demonstrations precede the task, so only the final "Question:" section counts.
  std::string_view user = req.user_text;
  auto q = user.rfind("Question: ");
  auto lines = lines_of(q == std::string_view::npos ? user : user.substr(q));

  CompletionResult result;
  result.backend = Backend::mock;
  if (req.system_text.find(kRefineTaskMarker) != std::string::npos)
    result.text = mock_refine(lines);
  else if (req.system_text.find(kAnswerTaskMarker) != std::string::npos)
    result.text = mock_answer(lines);
  else
    result.text = "";
  result.usage.prompt = count_whitespace_tokens(req.system_text) + count_whitespace_tokens(req.user_text);
  result.usage.completion = count_whitespace_tokens(result.text);
  return result;
}

// ---------------------------------------------------------------------------
// Replay

ReplayStore::ReplayStore(std::string path, bool persist) : path_(std::move(path)), persist_(persist) {
  std::ifstream in(path_);
  if (!in) return;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto j = json::parse(line);
      ReplayRecord rec;
      rec.text = j.at("text").get<std::string>();
      if (j.contains("usage")) {
        rec.usage.prompt = j["usage"].value("prompt", std::size_t{0});
        rec.usage.completion = j["usage"].value("completion", std::size_t{0});
      }
      records_[j.at("digest").get<std::string>()] = std::move(rec);
    } catch (const json::exception& e) {
      throw ParseError(lineno, std::string("replay store ") + path_ + ": " + e.what());
    }
  }
}

std::optional<ReplayRecord> ReplayStore::find(const std::string& digest) const {
  std::lock_guard lock(mutex_);
  auto it = records_.find(digest);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

void ReplayStore::put(const std::string& digest, const ReplayRecord& record) {
  std::lock_guard lock(mutex_);
  records_[digest] = record;
  if (persist_ && !path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    out << json{{"digest", digest},
                {"text", record.text},
                {"usage", {{"prompt", record.usage.prompt}, {"completion", record.usage.completion}}}}
               .dump()
        << '\n';
  }
}

std::size_t ReplayStore::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

CompletionResult ReplayClient::do_complete(const CompletionRequest& req) {
  auto digest = request_digest(req);
  auto rec = store_->find(digest);
  if (!rec) throw BackendError("replay", digest, "no recorded response");
  return {rec->text, rec->usage, Backend::replay};
}

// ---------------------------------------------------------------------------
// Remote

namespace {

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(std::chrono::seconds timeout) : timeout_(timeout) {}

  std::optional<HttpResponse> post(const std::string& url,
                                   const std::map<std::string, std::string>& headers,
                                   const std::string& body) override {
    auto scheme_end = url.find("://");
    auto path_start = url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
    std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(base);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    httplib::Headers hs;
    for (const auto& [k, v] : headers) hs.emplace(k, v);
    auto res = client.Post(path, hs, body, "application/json");
    if (!res) return std::nullopt;
    return HttpResponse{res->status, res->body};
  }

 private:
  std::chrono::seconds timeout_;
};

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? v : "";
}

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(std::chrono::seconds timeout) {
  return std::make_unique<HttplibTransport>(timeout);
}

RemoteConfig RemoteConfig::from_env() {
  RemoteConfig c;
  c.url = env_or_empty("REG_LLM_URL");
  c.model = env_or_empty("REG_LLM_MODEL");
  c.api_key = env_or_empty("REG_LLM_KEY");
  return c;
}

RemoteClient::RemoteClient(RemoteConfig config, std::unique_ptr<HttpTransport> transport,
                           std::shared_ptr<ReplayStore> cache, Sleeper sleeper)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      cache_(std::move(cache)),
      sleeper_(sleeper ? std::move(sleeper)
                       : Sleeper([](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); })),
      in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, config_.max_in_flight))) {
  if (config_.url.empty()) throw ConfigError("remote backend needs an endpoint URL (REG_LLM_URL)");
}

std::string RemoteClient::wire_body(const CompletionRequest& req) const {
  json messages = json::array();
  if (!req.system_text.empty()) messages.push_back({{"role", "system"}, {"content", req.system_text}});
  messages.push_back({{"role", "user"}, {"content", req.user_text}});
  return json{{"model", config_.model},
              {"messages", std::move(messages)},
              {"temperature", req.temperature},
              {"seed", req.seed},
              {"max_tokens", req.max_tokens}}
      .dump();
}

CompletionResult RemoteClient::do_complete(const CompletionRequest& req) {
  auto digest = request_digest(req);
  if (cache_)
    if (auto hit = cache_->find(digest)) return {hit->text, hit->usage, Backend::remote};

  std::map<std::string, std::string> headers;
  if (!config_.api_key.empty()) headers["Authorization"] = "Bearer " + config_.api_key;
  auto body = wire_body(req);

  std::string last_error = "no attempt made";
  auto backoff = config_.initial_backoff;
  for (int attempt = 1; attempt <= std::max(1, config_.attempts); ++attempt) {
    std::optional<HttpResponse> res;
    {
      in_flight_.acquire();
      struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
      } release{in_flight_};
      res = transport_->post(config_.url, headers, body);
    }
    bool retryable = true;
    if (!res) {
      last_error = "connection failed";
    } else if (res->status == 200) {
      try {
        auto j = json::parse(res->body);
        CompletionResult out;
        out.backend = Backend::remote;
        out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (j.contains("usage")) {
          out.usage.prompt = j["usage"].value("prompt_tokens", std::size_t{0});
          out.usage.completion = j["usage"].value("completion_tokens", std::size_t{0});
        }
        if (cache_) cache_->put(digest, {out.text, out.usage});
        return out;
      } catch (const json::exception& e) {
        last_error = std::string("malformed response: ") + e.what();
        retryable = false;
      }
    } else {
      last_error = "HTTP " + std::to_string(res->status);
      retryable = res->status == 408 || res->status == 429 || res->status >= 500;
    }
    if (!retryable) break;
    if (attempt < config_.attempts) {
      sleeper_(backoff);
      backoff *= 2;
    }
  }
  throw BackendError("remote", digest, last_error);
}

}  // namespace reg
