#pragma once
// Chat-completion clients: a deterministic mock oracle, a recorded-replay
// store, and a remote HTTP endpoint. All share LlmClient::complete.

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <unordered_map>

namespace reg {

struct CompletionRequest {
  std::string system_text;
  std::string user_text;
  double temperature = 0.0;
  std::int64_t seed = 42;
  std::size_t max_tokens = 1024;
};

struct TokenUsage {
  std::size_t prompt = 0;
  std::size_t completion = 0;
};

enum class Backend { mock, replay, remote };
const char* backend_name(Backend b);

struct CompletionResult {
  std::string text;
  TokenUsage usage;
  Backend backend = Backend::mock;
};

// Hex SHA-256 over (system_text, user_text, temperature, seed).
std::string request_digest(const CompletionRequest& req);

// Whitespace-delimited token count, the mock backend's usage estimate.
std::size_t count_whitespace_tokens(const std::string& text);

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  CompletionResult complete(const CompletionRequest& req);

 private:
  virtual CompletionResult do_complete(const CompletionRequest& req) = 0;
};

// Markers the prompt builders embed so the mock can tell the two tasks apart.
inline constexpr const char* kRefineTaskMarker = "TASK: select-reasoning-paths";
inline constexpr const char* kAnswerTaskMarker = "TASK: answer-from-evidence";

// Deterministic stand-in for an LLM.
//  - Refinement prompts: selects every candidate whose chain ends at one of
//    the answers listed in the prompt; replies "i, j, ..." or "none".
//  - QA prompts: answers with the target set of the first evidence line as a
//    JSON string list, or [] when there is no evidence.
class MockClient final : public LlmClient {
 private:
  CompletionResult do_complete(const CompletionRequest& req) override;
};

struct ReplayRecord {
  std::string text;
  TokenUsage usage;
};

// JSONL store {digest, text, usage}. Thread-safe.
class ReplayStore {
 public:
  ReplayStore() = default;
  // Loads path if it exists; appends go to the same file when persist is set.
  explicit ReplayStore(std::string path, bool persist = true);

  std::optional<ReplayRecord> find(const std::string& digest) const;
  void put(const std::string& digest, const ReplayRecord& record);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::string path_;
  bool persist_ = false;
  std::unordered_map<std::string, ReplayRecord> records_;
};

class ReplayClient final : public LlmClient {
 public:
  explicit ReplayClient(std::shared_ptr<const ReplayStore> store) : store_(std::move(store)) {}

 private:
  CompletionResult do_complete(const CompletionRequest& req) override;
  std::shared_ptr<const ReplayStore> store_;
};

struct HttpResponse {
  int status = 0;
  std::string body;
};

// Transport seam for the remote backend. Returns nullopt on a connection
// failure.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual std::optional<HttpResponse> post(const std::string& url,
                                           const std::map<std::string, std::string>& headers,
                                           const std::string& body) = 0;
};

std::unique_ptr<HttpTransport> make_http_transport(std::chrono::seconds timeout);

struct RemoteConfig {
  std::string url;    // full chat-completions endpoint
  std::string model;
  std::string api_key;
  std::size_t max_in_flight = 4;
  int attempts = 3;
  std::chrono::milliseconds initial_backoff{500};

  // REG_LLM_URL, REG_LLM_MODEL, REG_LLM_KEY.
  static RemoteConfig from_env();
};

class RemoteClient final : public LlmClient {
 public:
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  RemoteClient(RemoteConfig config, std::unique_ptr<HttpTransport> transport,
               std::shared_ptr<ReplayStore> cache = nullptr, Sleeper sleeper = {});

  // The request body sent over the wire, exposed for inspection.
  std::string wire_body(const CompletionRequest& req) const;

 private:
  CompletionResult do_complete(const CompletionRequest& req) override;

  RemoteConfig config_;
  std::unique_ptr<HttpTransport> transport_;
  std::shared_ptr<ReplayStore> cache_;
  Sleeper sleeper_;
  std::counting_semaphore<> in_flight_;
};

}  // namespace reg
