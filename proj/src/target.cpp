#include "daca/target.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "daca/backend.hpp"
#include "daca/builtin_data.hpp"
#include "daca/error.hpp"
#include "daca/http.hpp"
#include "daca/pipeline.hpp"
#include "daca/text.hpp"

namespace daca {

std::string_view to_string(FilterReason r) {
  switch (r) {
    case FilterReason::blocklist_hit: return "blocklist_hit";
    case FilterReason::embedding_threshold: return "embedding_threshold";
    case FilterReason::provider_refusal: return "provider_refusal";
    case FilterReason::none: return "none";
  }
  return "?";
}

FilterReason parse_filter_reason(std::string_view s) {
  for (auto r : {FilterReason::blocklist_hit, FilterReason::embedding_threshold, FilterReason::provider_refusal,
                 FilterReason::none}) {
    if (to_string(r) == s) return r;
  }
  throw ValidationError("unknown filter reason: " + std::string(s));
}

std::string_view to_string(FilterMode m) {
  switch (m) {
    case FilterMode::blocklist_only: return "blocklist_only";
    case FilterMode::embedding_only: return "embedding_only";
    case FilterMode::both: return "both";
  }
  return "?";
}

std::string_view to_string(TrialMode m) { return m == TrialMode::one_time ? "one_time" : "reuse"; }

TrialMode parse_trial_mode(std::string_view s) {
  if (s == "one_time") return TrialMode::one_time;
  if (s == "reuse") return TrialMode::reuse;
  throw ValidationError("unknown trial mode: " + std::string(s));
}

void check_sim_filter(const SimFilterConfig& cfg) {
  const bool embedding = cfg.mode != FilterMode::blocklist_only;
  if (embedding && !cfg.threshold) throw ValidationError("embedding filter mode needs a threshold");
  if (!embedding && cfg.threshold) throw ValidationError("threshold given but embedding mode is off");
  if (cfg.threshold && (*cfg.threshold < 0 || *cfg.threshold > 1))
    throw ValidationError("threshold must lie in [0, 1]");
  for (const auto& c : cfg.concepts) {
    if (c.vector.dims != kEmbedDim) throw ValidationError("concept " + c.label + " has wrong dimension");
  }
}

SimFilterConfig parse_sim_filter(std::string_view input) {
  SimFilterConfig cfg;
  std::size_t line_no = 0;
  for (const auto& raw : text::split(input, "\n")) {
    ++line_no;
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const std::string where = "sim filter line " + std::to_string(line_no) + ": ";
    auto directive = [&](std::string_view key) -> std::optional<std::string> {
      if (line.size() > key.size() && line.compare(0, key.size(), key) == 0 && line[key.size()] == ':')
        return text::trim(std::string_view(line).substr(key.size() + 1));
      return std::nullopt;
    };
    if (auto v = directive("mode")) {
      if (*v == "blocklist_only") cfg.mode = FilterMode::blocklist_only;
      else if (*v == "embedding_only") cfg.mode = FilterMode::embedding_only;
      else if (*v == "both") cfg.mode = FilterMode::both;
      else throw ValidationError(where + "unknown mode " + *v);
    } else if (auto t = directive("threshold")) {
      try {
        std::size_t used = 0;
        cfg.threshold = std::stod(*t, &used);
        if (used != t->size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw ValidationError(where + "bad threshold " + *t);
      }
    } else if (auto c = directive("concept")) {
      const auto eq = c->find('=');
      if (eq == std::string::npos) throw ValidationError(where + "expected 'concept: <label> = <text>'");
      const std::string label = text::trim(c->substr(0, eq));
      const std::string seed = text::trim(c->substr(eq + 1));
      EmbeddingVector v = hash_embed(seed);
      if (label.empty() || v.is_zero()) throw ValidationError(where + "concept needs a label and content words");
      cfg.concepts.push_back({label, std::move(v)});
    } else {
      cfg.blocklist.push_back(text::to_lower(line));
    }
  }
  check_sim_filter(cfg);
  return cfg;
}

SimFilterConfig load_sim_filter(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open sim filter file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_sim_filter(ss.str());
}

const SimFilterConfig& builtin_sim_filter() {
  static const SimFilterConfig cfg = parse_sim_filter(builtin_file("sim_filter.txt"));
  return cfg;
}

FilterDecision filter_check(const SimFilterConfig& cfg, std::string_view prompt) {
  FilterDecision d;
  if (cfg.mode != FilterMode::embedding_only) {
    const auto toks = text::tokenize(prompt);
    for (const auto& term : cfg.blocklist) {
      if (text::contains_phrase(toks, text::tokenize(term))) d.matched.push_back(term);
    }
    if (!d.matched.empty()) {
      d.blocked = true;
      d.reason = FilterReason::blocklist_hit;
      return d;
    }
  }
  if (cfg.mode != FilterMode::blocklist_only && cfg.threshold) {
    const EmbeddingVector v = hash_embed(prompt);
    if (!v.is_zero()) {
      for (const auto& c : cfg.concepts) {
        if (cosine_similarity(v, c.vector) >= *cfg.threshold) d.matched.push_back(c.label);
      }
    }
    if (!d.matched.empty()) {
      d.blocked = true;
      d.reason = FilterReason::embedding_threshold;
    }
  }
  return d;
}

std::string normalize_prompt(std::string_view prompt) {
  std::string out;
  bool space = false;
  for (char c : text::trim(prompt)) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      space = true;
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

PseudoImage stub_generate(std::string_view prompt) {
  const std::string norm = normalize_prompt(prompt);
  if (norm.empty()) throw PreconditionError("nothing to generate: empty prompt");
  PseudoImage img;
  img.image_ref = "sim:" + text::hex64(text::fnv1a64(norm));
  img.caption = norm;
  img.embedding = hash_embed(prompt);
  return img;
}

SimulatedTarget::SimulatedTarget(SimFilterConfig cfg) : cfg_(std::move(cfg)) { check_sim_filter(cfg_); }

TrialResult SimulatedTarget::submit(const std::string& trial_id, const std::string& prompt_id,
                                    std::string_view prompt, TrialMode mode, int attempt_index) {
  TrialResult r;
  r.trial_id = trial_id;
  r.prompt_id = prompt_id;
  r.mode = mode;
  r.attempt_index = attempt_index;
  r.timestamp = utc_now_iso();
  r.decision = filter_check(cfg_, prompt);
  if (!r.decision.blocked) {
    PseudoImage img = stub_generate(prompt);
    r.image_ref = img.image_ref;
    r.caption = img.caption;
    r.pseudo_embedding = std::move(img.embedding);
  }
  return r;
}

bool LiveSwitches::env_acknowledged() {
  const char* v = std::getenv("DACA_LIVE_ACK");
  return v && std::string_view(v) == "yes";
}

LiveTarget::LiveTarget(LiveTargetConfig cfg, const LiveSwitches& switches) : cfg_(std::move(cfg)) {
  if (!switches.all())
    throw ConfigError(
        "live target refused: needs live_targets.enabled=true, the --live flag and DACA_LIVE_ACK=yes");
  if (cfg_.endpoint.empty()) throw ConfigError("live target has no endpoint");
  parse_url(cfg_.endpoint);
  if (!cfg_.auth_env_var.empty()) {
    const char* k = std::getenv(cfg_.auth_env_var.c_str());
    if (!k || !*k) throw ConfigError("environment variable " + cfg_.auth_env_var + " is not set");
    key_ = k;
  }
}

TrialResult LiveTarget::submit(const std::string& trial_id, const std::string& prompt_id, std::string_view prompt,
                               TrialMode mode, int attempt_index) {
  TrialResult r;
  r.trial_id = trial_id;
  r.prompt_id = prompt_id;
  r.mode = mode;
  r.attempt_index = attempt_index;
  const nlohmann::json payload = {{"model", cfg_.model}, {"prompt", std::string(prompt)}, {"n", 1},
                                  {"size", cfg_.size}};
  HttpHeaders headers;
  if (!key_.empty()) headers.emplace_back("Authorization", "Bearer " + key_);
  HttpResponse res;
  {
    LimiterSlot slot(RequestLimiter::global());
    res = http_post_json(cfg_.endpoint, payload.dump(), headers, cfg_.timeout);
  }
  r.timestamp = utc_now_iso();
  if (res.status < 200 || res.status >= 300) {
    const std::string lower = text::to_lower(res.body);
    if (lower.find("policy") != std::string::npos || lower.find("safety") != std::string::npos) {
      r.decision = {true, FilterReason::provider_refusal, {}};
      return r;
    }
    throw TransportError("image API returned HTTP " + std::to_string(res.status));
  }
  try {
    const auto body = nlohmann::json::parse(res.body);
    const auto& item = body.at("data").at(0);
    r.image_ref = item.contains("url") ? item.at("url").get<std::string>() : "b64:" + trial_id;
  } catch (const nlohmann::json::exception& e) {
    throw TransportError(std::string("malformed image API payload: ") + e.what());
  }
  return r;
}

std::unique_ptr<Target> make_target(const SimFilterConfig& sim, const std::optional<LiveTargetConfig>& live,
                                    const LiveSwitches& switches, std::string* note) {
  if (live && switches.all()) return std::make_unique<LiveTarget>(*live, switches);
  if (note) {
    if (!live)
      *note = "no live target configured; using the simulated target";
    else
      *note = "live target disabled (needs live_targets.enabled, --live and DACA_LIVE_ACK=yes); using the simulated target";
  }
  return std::make_unique<SimulatedTarget>(sim);
}

}  // namespace daca
