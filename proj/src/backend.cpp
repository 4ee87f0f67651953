#include "daca/backend.hpp"

#include <cstdlib>

#include <json.hpp>

#include "daca/error.hpp"
#include "daca/http.hpp"
#include "daca/mock_backends.hpp"
#include "daca/text.hpp"

namespace daca {

using nlohmann::json;

const std::string& last_user_message(const ChatRequest& req) {
  for (auto it = req.messages.rbegin(); it != req.messages.rend(); ++it) {
    if (it->role == "user") return it->content;
  }
  throw PreconditionError("request has no user message");
}

std::string request_digest(const ChatRequest& req) { return text::hex64(text::fnv1a64(last_user_message(req))); }

void check_request(const ChatRequest& req) {
  if (req.messages.empty()) throw PreconditionError("request has no messages");
  for (const auto& m : req.messages) {
    if (m.role != "system" && m.role != "user" && m.role != "assistant")
      throw PreconditionError("unknown message role: " + m.role);
  }
  last_user_message(req);
  if (!(req.temperature >= 0)) throw PreconditionError("temperature must be >= 0");
  if (req.max_output_tokens <= 0) throw PreconditionError("max_output_tokens must be positive");
}

const std::vector<std::string>& default_refusal_patterns() {
  static const std::vector<std::string> patterns = {
      "I can't assist",  "I can’t assist",       "I cannot assist", "unable to create", "content policy",
      "I can't help with", "I cannot help with", "I'm sorry, but I can't", "I won't be able to",
  };
  return patterns;
}

bool detect_refusal(std::string_view text, const std::vector<std::string>& patterns) {
  if (text.empty()) return false;
  const std::string lower = text::to_lower(text);
  for (const auto& p : patterns) {
    if (!p.empty() && lower.find(text::to_lower(p)) != std::string::npos) return true;
  }
  return false;
}

RequestLimiter::RequestLimiter(int limit) : limit_(limit < 1 ? 1 : limit) {}

void RequestLimiter::acquire() {
  std::unique_lock lk(mu_);
  cv_.wait(lk, [&] { return in_flight_ < limit_; });
  ++in_flight_;
}

void RequestLimiter::release() {
  {
    std::lock_guard lk(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

void RequestLimiter::set_limit(int limit) {
  {
    std::lock_guard lk(mu_);
    limit_ = limit < 1 ? 1 : limit;
  }
  cv_.notify_all();
}

int RequestLimiter::limit() const {
  std::lock_guard lk(mu_);
  return limit_;
}

int RequestLimiter::in_flight() const {
  std::lock_guard lk(mu_);
  return in_flight_;
}

RequestLimiter& RequestLimiter::global() {
  static RequestLimiter limiter(4);
  return limiter;
}

ChatResponse chat(LlmBackend& backend, const ChatRequest& req) {
  check_request(req);
  ChatResponse r = backend.chat(req);
  if (r.usage.input_tokens < 0 || r.usage.output_tokens < 0) throw BackendError("negative token usage");
  r.refusal = r.refusal || detect_refusal(r.text);
  return r;
}

namespace {

std::string require_env(const BackendProfile& p) {
  if (p.auth_env_var.empty()) throw ConfigError("profile " + p.id + " has no auth_env_var");
  const char* v = std::getenv(p.auth_env_var.c_str());
  if (!v || !*v) throw ConfigError("environment variable " + p.auth_env_var + " is not set for profile " + p.id);
  return v;
}

json messages_json(const ChatRequest& req) {
  json arr = json::array();
  for (const auto& m : req.messages) arr.push_back({{"role", m.role}, {"content", m.content}});
  return arr;
}

// Shared plumbing for the HTTP adapters; subclasses shape payloads.
class HttpChatBackend : public LlmBackend {
 public:
  HttpChatBackend(BackendProfile profile, PricingScheme scheme, std::string key)
      : profile_(std::move(profile)), scheme_(std::move(scheme)), key_(std::move(key)) {
    if (profile_.endpoint.empty()) throw ConfigError("profile " + profile_.id + " has no endpoint");
    parse_url(profile_.endpoint);
  }

  std::string id() const override { return profile_.id; }

  ChatResponse chat(const ChatRequest& req) override {
    const json payload = build(req);
    HttpResponse res;
    {
      LimiterSlot slot(RequestLimiter::global());
      res = http_post_json(profile_.endpoint, payload.dump(),
                           {{"Authorization", "Bearer " + key_}, {"Accept", "application/json"}},
                           profile_.request_timeout);
    }
    if (res.status < 200 || res.status >= 300)
      throw BackendError(profile_.id + ": HTTP " + std::to_string(res.status) + ": " + res.body.substr(0, 300));
    json body;
    try {
      body = json::parse(res.body);
    } catch (const json::exception& e) {
      throw BackendError(profile_.id + ": malformed payload: " + e.what());
    }
    ChatResponse out;
    try {
      parse(body, out);
    } catch (const json::exception& e) {
      throw BackendError(profile_.id + ": malformed payload: " + e.what());
    }
    const auto& prompt = last_user_message(req);
    if (out.usage.input_tokens == 0) out.usage.input_tokens = estimate_tokens(prompt, scheme_);
    if (out.usage.output_tokens == 0) out.usage.output_tokens = estimate_tokens(out.text, scheme_);
    return out;
  }

 protected:
  virtual json build(const ChatRequest& req) const = 0;
  virtual void parse(const json& body, ChatResponse& out) const = 0;

  BackendProfile profile_;
  PricingScheme scheme_;
  std::string key_;
};

class OpenAiBackend final : public HttpChatBackend {
 public:
  using HttpChatBackend::HttpChatBackend;

 protected:
  json build(const ChatRequest& req) const override {
    return {{"model", profile_.model_name},
            {"messages", messages_json(req)},
            {"temperature", req.temperature},
            {"max_tokens", req.max_output_tokens}};
  }
  void parse(const json& body, ChatResponse& out) const override {
    out.text = body.at("choices").at(0).at("message").at("content").get<std::string>();
    if (body.contains("usage") && body["usage"].is_object()) {
      out.usage.input_tokens = body["usage"].value("prompt_tokens", 0);
      out.usage.output_tokens = body["usage"].value("completion_tokens", 0);
    }
  }
};

class DashScopeBackend final : public HttpChatBackend {
 public:
  using HttpChatBackend::HttpChatBackend;

 protected:
  json build(const ChatRequest& req) const override {
    return {{"model", profile_.model_name},
            {"input", {{"messages", messages_json(req)}}},
            {"parameters",
             {{"temperature", req.temperature}, {"max_tokens", req.max_output_tokens}, {"result_format", "message"}}}};
  }
  void parse(const json& body, ChatResponse& out) const override {
    const auto& output = body.at("output");
    if (output.contains("choices"))
      out.text = output.at("choices").at(0).at("message").at("content").get<std::string>();
    else
      out.text = output.at("text").get<std::string>();
    if (body.contains("usage") && body["usage"].is_object()) {
      out.usage.input_tokens = body["usage"].value("input_tokens", 0);
      out.usage.output_tokens = body["usage"].value("output_tokens", 0);
    }
  }
};

}  // namespace

std::unique_ptr<LlmBackend> make_backend(const BackendProfile& profile, const PricingTable& pricing) {
  const PricingScheme& scheme = pricing.at(profile.pricing_id);
  if (profile.kind == "mock_rules") return make_rule_based_backend(profile.id, scheme);
  if (profile.kind == "mock_echo") return make_echo_backend(profile.id, scheme);
  if (profile.kind == "mock_scripted") {
    const auto fb = profile.fallback == "echo" ? ScriptedFallback::echo : ScriptedFallback::error;
    return make_scripted_backend(profile.id, profile.fixtures, fb, scheme);
  }
  if (profile.kind == "openai" || profile.kind == "dashscope") {
    std::string key = require_env(profile);
    if (profile.kind == "openai") return std::make_unique<OpenAiBackend>(profile, scheme, std::move(key));
    return std::make_unique<DashScopeBackend>(profile, scheme, std::move(key));
  }
  throw ConfigError("unknown backend kind: " + profile.kind);
}

}  // namespace daca
