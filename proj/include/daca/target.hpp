#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "daca/embedding.hpp"

namespace daca {

enum class FilterReason { blocklist_hit, embedding_threshold, provider_refusal, none };
enum class FilterMode { blocklist_only, embedding_only, both };
enum class TrialMode { one_time, reuse };

std::string_view to_string(FilterReason r);
FilterReason parse_filter_reason(std::string_view s);
std::string_view to_string(FilterMode m);
std::string_view to_string(TrialMode m);
TrialMode parse_trial_mode(std::string_view s);

struct FilterDecision {
  bool blocked = false;
  FilterReason reason = FilterReason::none;
  std::vector<std::string> matched;
};

struct Concept {
  std::string label;
  EmbeddingVector vector;
};

struct SimFilterConfig {
  std::vector<std::string> blocklist;
  std::vector<Concept> concepts;
  std::optional<double> threshold;
  FilterMode mode = FilterMode::blocklist_only;
};

// Text format: "mode: <mode>", "threshold: <tau>", "concept: <label> = <seed
// text>" (vector is hash_embed of the seed text), '#' comments, and every
// other non-blank line is a blocklist term. Throws ValidationError when the
// threshold requirement of the mode is not met.
SimFilterConfig parse_sim_filter(std::string_view text);
SimFilterConfig load_sim_filter(const std::string& path);
const SimFilterConfig& builtin_sim_filter();
void check_sim_filter(const SimFilterConfig& cfg);

FilterDecision filter_check(const SimFilterConfig& cfg, std::string_view prompt);

struct PseudoImage {
  std::string image_ref;
  std::string caption;
  EmbeddingVector embedding;
};

// Lowercased, whitespace-collapsed prompt.
std::string normalize_prompt(std::string_view prompt);
// Throws PreconditionError on an empty prompt.
PseudoImage stub_generate(std::string_view prompt);

struct TrialResult {
  std::string trial_id;
  std::string prompt_id;
  TrialMode mode = TrialMode::one_time;
  int attempt_index = 0;
  FilterDecision decision;
  std::optional<std::string> image_ref;
  // Simulated targets only.
  std::optional<std::string> caption;
  std::optional<EmbeddingVector> pseudo_embedding;
  std::string timestamp;
};

class Target {
 public:
  virtual ~Target() = default;
  virtual TrialResult submit(const std::string& trial_id, const std::string& prompt_id, std::string_view prompt,
                             TrialMode mode, int attempt_index) = 0;
  virtual bool live() const = 0;
};

class SimulatedTarget final : public Target {
 public:
  explicit SimulatedTarget(SimFilterConfig cfg);
  TrialResult submit(const std::string& trial_id, const std::string& prompt_id, std::string_view prompt,
                     TrialMode mode, int attempt_index) override;
  bool live() const override { return false; }
  const SimFilterConfig& config() const { return cfg_; }

 private:
  SimFilterConfig cfg_;
};

// All three must be on before anything talks to a live image API.
struct LiveSwitches {
  bool config_enabled = false;  // live_targets.enabled in the config file
  bool cli_flag = false;        // --live
  bool env_ack = false;         // DACA_LIVE_ACK=yes

  bool all() const { return config_enabled && cli_flag && env_ack; }
  static bool env_acknowledged();
};

struct LiveTargetConfig {
  std::string endpoint;
  std::string model = "dall-e-3";
  std::string auth_env_var;
  std::string size = "1024x1024";
  std::chrono::milliseconds timeout{120000};
};

// Image API adapter. The constructor throws ConfigError unless every switch
// is on and the auth variable is set.
class LiveTarget final : public Target {
 public:
  LiveTarget(LiveTargetConfig cfg, const LiveSwitches& switches);
  TrialResult submit(const std::string& trial_id, const std::string& prompt_id, std::string_view prompt,
                     TrialMode mode, int attempt_index) override;
  bool live() const override { return true; }

 private:
  LiveTargetConfig cfg_;
  std::string key_;
};

// Live target when a live config is given and all switches are on; the
// simulated target otherwise. `note` explains a fallback.
std::unique_ptr<Target> make_target(const SimFilterConfig& sim, const std::optional<LiveTargetConfig>& live,
                                    const LiveSwitches& switches, std::string* note = nullptr);

}  // namespace daca
