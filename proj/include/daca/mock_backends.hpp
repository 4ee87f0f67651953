#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include "daca/backend.hpp"
#include "daca/corpus.hpp"

namespace daca {

enum class ScriptedFallback { error, echo };

// Replays JSONL fixtures {digest, response}; digest is request_digest().
// `fixtures` is a file path or "builtin:<name>" for a shipped fixture.
std::unique_ptr<LlmBackend> make_scripted_backend(const std::string& id, const std::string& fixtures,
                                                  ScriptedFallback fallback, const PricingScheme& scheme);
std::unique_ptr<LlmBackend> make_scripted_backend_from_text(const std::string& id, std::string_view jsonl,
                                                            ScriptedFallback fallback, const PricingScheme& scheme);

// Answers with the last user message.
std::unique_ptr<LlmBackend> make_echo_backend(const std::string& id, const PricingScheme& scheme);

// Deterministic text transformer emulating each helper prompt. It recognises
// the template behind a rendered prompt, extracts the slot values and applies
// the rules (JSON, see data/mock_rules.json). Unrecognised prompts raise
// ValidationError("unknown stage kind ...").
std::unique_ptr<LlmBackend> make_rule_based_backend(const std::string& id, const PricingScheme& scheme,
                                                    std::string_view rules_json = {},
                                                    const Corpus* corpus = nullptr);

// Which template a rendered prompt came from, with its slot values.
struct TemplateMatch {
  const PromptTemplate* tmpl = nullptr;
  SlotBindings values;
};
TemplateMatch match_template(const Corpus& c, std::string_view prompt);

// Forwards to `inner` and appends {digest, response} for each answer to
// `path`, producing a fixture file for make_scripted_backend.
class RecordingBackend final : public LlmBackend {
 public:
  RecordingBackend(LlmBackend& inner, std::string path);
  ChatResponse chat(const ChatRequest& req) override;
  std::string id() const override { return inner_.id(); }
  bool deterministic() const override { return inner_.deterministic(); }

 private:
  LlmBackend& inner_;
  std::string path_;
  std::mutex mu_;
};

}  // namespace daca
