#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "reg/error.hpp"
#include "reg/json_io.hpp"
#include "reg/llm_client.hpp"

namespace reg {
namespace {

CompletionRequest request(std::string system, std::string user) {
  CompletionRequest r;
  r.system_text = std::move(system);
  r.user_text = std::move(user);
  return r;
}

TEST(LlmClient, DigestIsStableAndSensitiveToEveryField) {
  auto base = request("sys", "user");
  auto d = request_digest(base);
  EXPECT_EQ(d.size(), 64u);
  EXPECT_EQ(d, request_digest(base));
  auto other = base;
  other.user_text = "user ";
  EXPECT_NE(request_digest(other), d);
  other = base;
  other.temperature = 0.5;
  EXPECT_NE(request_digest(other), d);
  other = base;
  other.seed = 7;
  EXPECT_NE(request_digest(other), d);
  // field boundaries are unambiguous
  EXPECT_NE(request_digest(request("ab", "c")), request_digest(request("a", "bc")));
}

TEST(LlmClient, WhitespaceTokenCount) {
  EXPECT_EQ(count_whitespace_tokens(""), 0u);
  EXPECT_EQ(count_whitespace_tokens("  one two\n three\t"), 3u);
}

TEST(LlmClient, MockRefineSelectsPathsEndingAtAnswers) {
  MockClient mock;
  auto r = mock.complete(request(std::string(kRefineTaskMarker),
                                 "Question: who?\nAnswers: [\"B\"]\nCandidate reasoning paths:\n"
                                 "1. A → [r] → C\n2. A → [r] → B\n3. A → [s] → C → [t] → B\n\nSelect."));
  EXPECT_EQ(r.text, "2, 3");
  EXPECT_EQ(r.backend, Backend::mock);
  EXPECT_GT(r.usage.prompt, 0u);
  auto none = mock.complete(request(std::string(kRefineTaskMarker),
                                    "Question: who?\nAnswers: [\"Z\"]\nCandidate reasoning paths:\n1. A → [r] → C\n"));
  EXPECT_EQ(none.text, "none");
}

TEST(LlmClient, MockAnswerReadsFirstEvidenceLine) {
  MockClient mock;
  auto sys = std::string(kAnswerTaskMarker);
  EXPECT_EQ(mock.complete(request(sys, "Question: q\nEvidence:\n1. A → [r] → {B, C}\n2. A → [s] → D\nAnswer:")).text,
            "[\"B\",\"C\"]");
  EXPECT_EQ(mock.complete(request(sys, "Question: q\nEvidence:\n1. (A, r, B)\nAnswer:")).text, "[\"B\"]");
  EXPECT_EQ(mock.complete(request(sys, "Question: q\nEvidence:\nNo evidence retrieved.\nAnswer:")).text, "[]");
  // demonstrations before the final question are ignored
  EXPECT_EQ(mock.complete(request(sys, "Question: demo\nEvidence:\n1. X → [r] → Y\nAnswer: [\"Y\"]\n\n"
                                       "Question: q\nEvidence:\n1. A → [r] → B\nAnswer:"))
                .text,
            "[\"B\"]");
  EXPECT_EQ(mock.complete(request("plain", "hello")).text, "");
}

std::string temp_file(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("reg_llm_" + name);
  std::filesystem::remove(p);
  return p.string();
}

TEST(LlmClient, ReplayHitsAndMisses) {
  auto path = temp_file("replay.jsonl");
  auto req = request("s", "u");
  {
    ReplayStore store(path, true);
    store.put(request_digest(req), {"recorded", {3, 1}});
  }
  auto store = std::make_shared<ReplayStore>(path, false);
  EXPECT_EQ(store->size(), 1u);
  ReplayClient client(store);
  auto r = client.complete(req);
  EXPECT_EQ(r.text, "recorded");
  EXPECT_EQ(r.usage.prompt, 3u);
  EXPECT_EQ(r.backend, Backend::replay);
  try {
    client.complete(request("s", "other"));
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.backend(), "replay");
    EXPECT_EQ(e.digest(), request_digest(request("s", "other")));
  }
}

TEST(LlmClient, ReplayStoreRejectsMalformedLines) {
  auto path = temp_file("bad.jsonl");
  std::ofstream(path) << "{\"digest\": \"x\", \"text\": \"ok\"}\nnot json\n";
  try {
    ReplayStore store(path, false);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

class ScriptedTransport final : public HttpTransport {
 public:
  explicit ScriptedTransport(std::vector<std::optional<HttpResponse>> script) : script_(std::move(script)) {}
  std::optional<HttpResponse> post(const std::string&, const std::map<std::string, std::string>& headers,
                                   const std::string& body) override {
    last_body = body;
    last_headers = headers;
    ++calls;
    auto r = script_.at(std::min(calls - 1, script_.size() - 1));
    return r;
  }
  std::size_t calls = 0;
  std::string last_body;
  std::map<std::string, std::string> last_headers;

 private:
  std::vector<std::optional<HttpResponse>> script_;
};

const char* kOkBody = R"({"choices":[{"message":{"content":"42"}}],"usage":{"prompt_tokens":5,"completion_tokens":1}})";

TEST(LlmClient, RemoteRetriesTransientFailuresWithBackoff) {
  RemoteConfig cfg;
  cfg.url = "http://localhost:1/v1/chat/completions";
  cfg.model = "m";
  cfg.api_key = "k";
  auto transport = std::make_unique<ScriptedTransport>(
      std::vector<std::optional<HttpResponse>>{std::nullopt, HttpResponse{503, ""}, HttpResponse{200, kOkBody}});
  auto* raw = transport.get();
  std::vector<long> waits;
  auto cache = std::make_shared<ReplayStore>();
  RemoteClient client(cfg, std::move(transport), cache,
                      [&](std::chrono::milliseconds d) { waits.push_back(static_cast<long>(d.count())); });
  auto req = request("s", "u");
  auto r = client.complete(req);
  EXPECT_EQ(r.text, "42");
  EXPECT_EQ(r.usage.completion, 1u);
  EXPECT_EQ(raw->calls, 3u);
  EXPECT_EQ(waits, (std::vector<long>{500, 1000}));
  EXPECT_EQ(raw->last_headers["Authorization"], "Bearer k");
  auto body = nlohmann::json::parse(raw->last_body);
  EXPECT_EQ(body["model"], "m");
  EXPECT_EQ(body["messages"].size(), 2u);

  // served from the cache afterwards
  client.complete(req);
  EXPECT_EQ(raw->calls, 3u);
}

TEST(LlmClient, RemoteGivesUpOnClientErrors) {
  RemoteConfig cfg;
  cfg.url = "http://localhost:1/x";
  auto transport = std::make_unique<ScriptedTransport>(std::vector<std::optional<HttpResponse>>{HttpResponse{400, ""}});
  auto* raw = transport.get();
  RemoteClient client(cfg, std::move(transport), nullptr, [](std::chrono::milliseconds) {});
  EXPECT_THROW(client.complete(request("s", "u")), BackendError);
  EXPECT_EQ(raw->calls, 1u);
}

TEST(LlmClient, RemoteExhaustsAttempts) {
  RemoteConfig cfg;
  cfg.url = "http://localhost:1/x";
  cfg.attempts = 4;
  auto transport = std::make_unique<ScriptedTransport>(std::vector<std::optional<HttpResponse>>{HttpResponse{429, ""}});
  auto* raw = transport.get();
  RemoteClient client(cfg, std::move(transport), nullptr, [](std::chrono::milliseconds) {});
  EXPECT_THROW(client.complete(request("s", "u")), BackendError);
  EXPECT_EQ(raw->calls, 4u);
}

TEST(LlmClient, RemoteNeedsUrl) {
  EXPECT_THROW(RemoteClient(RemoteConfig{}, std::make_unique<ScriptedTransport>(
                                                std::vector<std::optional<HttpResponse>>{std::nullopt})),
               ConfigError);
}

}  // namespace
}  // namespace reg
