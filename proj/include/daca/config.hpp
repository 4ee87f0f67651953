#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "daca/backend.hpp"
#include "daca/campaign.hpp"
#include "daca/cost.hpp"
#include "daca/metrics.hpp"
#include "daca/target.hpp"

namespace daca {

// Contents of the YAML config file. Relative paths are resolved against the
// directory of the file.
struct AppConfig {
  std::vector<BackendProfile> backends;
  PricingTable pricing;
  SimFilterConfig sim_filter;
  std::optional<LiveTargetConfig> live_target;
  std::optional<EmbeddingEndpoint> embedding;
  bool live_targets_enabled = false;
  int max_concurrent_requests = 4;
  CampaignConfig campaign;

  const BackendProfile& backend(std::string_view id) const;
};

// Mock profiles plus the six provider profiles (live ones need their API
// key variables).
std::vector<BackendProfile> default_backend_profiles();

// Defaults only: builtin pricing, filter and backend profiles.
AppConfig default_config();

// Throws ConfigError for unreadable files and ValidationError for bad values.
AppConfig parse_config(std::string_view yaml, const std::string& base_dir = ".");
AppConfig load_config(const std::string& path);

// Backends, target and embedder built from a config for one command. The
// live image target and the live embedding endpoint are only used when every
// live switch is on; otherwise the simulated target and hash embeddings are.
struct Runtime {
  AppConfig config;
  std::vector<std::unique_ptr<LlmBackend>> owned;
  std::unique_ptr<Target> target;
  std::unique_ptr<Embedder> embedder;
  CampaignContext ctx;
  std::string note;
};

std::unique_ptr<Runtime> make_runtime(AppConfig cfg, const std::vector<std::string>& backbone_ids, bool live_flag);

}  // namespace daca
