#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "daca/cost.hpp"

namespace daca {

struct ChatMessage {
  std::string role;  // system, user or assistant
  std::string content;
};

struct ChatRequest {
  std::vector<ChatMessage> messages;
  double temperature = 1.0;
  int max_output_tokens = 2048;
};

struct TokenUsage {
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

struct ChatResponse {
  std::string text;
  TokenUsage usage;
  bool refusal = false;
};

struct BackendProfile {
  std::string id;
  // openai, dashscope, mock_rules, mock_scripted, mock_echo
  std::string kind = "openai";
  std::string endpoint;
  std::string model_name;
  std::string auth_env_var;
  std::string pricing_id;
  std::chrono::milliseconds request_timeout{60000};
  // mock_scripted only
  std::string fixtures;
  std::string fallback = "error";

  bool is_mock() const { return kind.rfind("mock_", 0) == 0; }
};

// Request text used for hashing and token estimation: the last user message.
const std::string& last_user_message(const ChatRequest& req);
// Hex FNV-1a of the last user message; the key of scripted fixtures.
std::string request_digest(const ChatRequest& req);
// Throws PreconditionError unless the request has at least one user message
// and a non-negative temperature.
void check_request(const ChatRequest& req);

const std::vector<std::string>& default_refusal_patterns();
// Case-insensitive substring match against `patterns`.
bool detect_refusal(std::string_view text,
                    const std::vector<std::string>& patterns = default_refusal_patterns());

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  // Implementations must be safe to call from several threads.
  virtual ChatResponse chat(const ChatRequest& req) = 0;
  virtual std::string id() const = 0;
  virtual bool deterministic() const { return false; }
};

// Bounds concurrent live requests across backends, targets and embedders.
class RequestLimiter {
 public:
  explicit RequestLimiter(int limit);
  void acquire();
  void release();
  void set_limit(int limit);
  int limit() const;
  int in_flight() const;

  static RequestLimiter& global();

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  int limit_;
  int in_flight_ = 0;
};

class LimiterSlot {
 public:
  explicit LimiterSlot(RequestLimiter& l) : l_(l) { l_.acquire(); }
  ~LimiterSlot() { l_.release(); }
  LimiterSlot(const LimiterSlot&) = delete;
  LimiterSlot& operator=(const LimiterSlot&) = delete;

 private:
  RequestLimiter& l_;
};

// Validates the request, forwards to the backend and marks refusals.
ChatResponse chat(LlmBackend& backend, const ChatRequest& req);

// Builds a backend for `profile`. Live kinds read the auth env var here and
// throw ConfigError when it is unset, before any network traffic.
std::unique_ptr<LlmBackend> make_backend(const BackendProfile& profile, const PricingTable& pricing);

}  // namespace daca
