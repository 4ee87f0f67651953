#include "daca/pipeline.hpp"

#include <algorithm>
#include <ctime>
#include <set>
#include <thread>

#include "daca/builtin_data.hpp"
#include "daca/error.hpp"
#include "daca/text.hpp"

namespace daca {

std::string_view to_string(PipelineFamily f) {
  return f == PipelineFamily::ALL_IN_ONE_GO ? "ALL_IN_ONE_GO" : "STEPWISE";
}

PipelineFamily parse_pipeline_family(std::string_view s) {
  if (s == "ALL_IN_ONE_GO") return PipelineFamily::ALL_IN_ONE_GO;
  if (s == "STEPWISE") return PipelineFamily::STEPWISE;
  throw ValidationError("unknown pipeline family: " + std::string(s));
}

std::vector<Finding> validate_pipeline(const PipelineSpec& p, const Corpus& c) {
  std::vector<Finding> out;
  std::set<std::string> defined;
  for (const auto& v : p.entry_vars) {
    if (!defined.insert(v).second) out.push_back({p.id, "duplicate variable " + v});
  }
  std::map<std::string, std::size_t> produced_at;
  for (std::size_t k = 0; k < p.stages.size(); ++k) produced_at.emplace(p.stages[k].output_var, k);

  std::set<std::string> stage_ids;
  for (std::size_t k = 0; k < p.stages.size(); ++k) {
    const auto& st = p.stages[k];
    const std::string subject = p.id + "/" + st.id;
    if (st.id.empty()) out.push_back({subject, "empty stage id"});
    if (!stage_ids.insert(st.id).second) out.push_back({subject, "duplicate stage id"});

    const PromptTemplate* t = c.find(st.template_id);
    if (!t) out.push_back({subject, "unknown template " + st.template_id});

    std::set<std::string> bound;
    for (const auto& [slot, var] : st.input_bindings) {
      if (!bound.insert(slot).second) out.push_back({subject, "slot bound twice: " + slot});
      if (t && std::find(t->slots.begin(), t->slots.end(), slot) == t->slots.end())
        out.push_back({subject, "binding for unknown slot " + slot});
      if (!defined.count(var)) {
        auto it = produced_at.find(var);
        if (it != produced_at.end() && it->second >= k)
          out.push_back({subject, "use-before-definition of " + var});
        else
          out.push_back({subject, "undefined variable " + var});
      }
    }
    if (t) {
      for (const auto& slot : t->slots) {
        if (!bound.count(slot)) out.push_back({subject, "unbound slot " + slot});
      }
    }
    if (st.output_var.empty())
      out.push_back({subject, "missing output variable"});
    else if (!defined.insert(st.output_var).second)
      out.push_back({subject, "duplicate variable " + st.output_var});
  }
  const bool final_produced = std::any_of(p.stages.begin(), p.stages.end(),
                                          [&](const StageSpec& s) { return s.output_var == p.final_var; });
  if (!final_produced) out.push_back({p.id, "unreachable final_var " + p.final_var});
  return out;
}

std::vector<PipelineSpec> parse_pipeline_specs(std::string_view input) {
  std::vector<PipelineSpec> specs;
  PipelineSpec* cur = nullptr;
  StageSpec* stage = nullptr;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& what) -> void {
    throw ValidationError("pipeline spec line " + std::to_string(line_no) + ": " + what);
  };
  for (const auto& raw : text::split(input, "\n")) {
    ++line_no;
    std::string line = raw;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = text::trim(line);
    if (line.empty()) continue;
    const auto sp = line.find_first_of(" \t");
    const std::string key = line.substr(0, sp);
    const std::string rest = sp == std::string::npos ? "" : text::trim(std::string_view(line).substr(sp));
    if (key == "pipeline") {
      if (rest.empty()) fail("pipeline needs an id");
      specs.emplace_back();
      cur = &specs.back();
      cur->id = rest;
      stage = nullptr;
      continue;
    }
    if (!cur) fail("expected 'pipeline <id>' first");
    if (key == "family") {
      try {
        cur->family = parse_pipeline_family(rest);
      } catch (const ValidationError& e) {
        fail(e.what());
      }
    } else if (key == "entry") {
      for (auto& v : text::split(rest, " ")) {
        if (!v.empty()) cur->entry_vars.push_back(v);
      }
    } else if (key == "final") {
      cur->final_var = rest;
    } else if (key == "stage") {
      if (rest.empty()) fail("stage needs an id");
      cur->stages.emplace_back();
      stage = &cur->stages.back();
      stage->id = rest;
    } else if (key == "template" || key == "in" || key == "out") {
      if (!stage) fail("'" + key + "' outside a stage");
      if (key == "template") {
        stage->template_id = rest;
      } else if (key == "out") {
        stage->output_var = rest;
      } else {
        const auto eq = rest.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == rest.size()) fail("expected 'in <slot>=<var>'");
        stage->input_bindings.emplace_back(text::trim(rest.substr(0, eq)), text::trim(rest.substr(eq + 1)));
      }
    } else {
      fail("unknown keyword '" + key + "'");
    }
  }
  return specs;
}

std::string serialize_pipeline(const PipelineSpec& p) {
  std::string out = "pipeline " + p.id + "\n";
  out += "family " + std::string(to_string(p.family)) + "\n";
  out += "entry " + text::join(p.entry_vars, " ") + "\n";
  out += "final " + p.final_var + "\n";
  for (const auto& st : p.stages) {
    out += "\nstage " + st.id + "\n";
    out += "template " + st.template_id + "\n";
    for (const auto& [slot, var] : st.input_bindings) out += "in " + slot + "=" + var + "\n";
    out += "out " + st.output_var + "\n";
  }
  return out;
}

const std::vector<PipelineSpec>& builtin_pipelines() {
  static const std::vector<PipelineSpec> specs = parse_pipeline_specs(builtin_file("pipelines.txt"));
  return specs;
}

const PipelineSpec& builtin_pipeline(std::string_view id) {
  for (const auto& p : builtin_pipelines()) {
    if (p.id == id) return p;
  }
  throw ConfigError("unknown pipeline: " + std::string(id));
}

const PipelineSpec& pipeline_for(Category c) {
  switch (c) {
    case Category::character_copyright: return builtin_pipeline("all_in_one.character");
    case Category::artistic_copyright: return builtin_pipeline("all_in_one.artist");
    default: return builtin_pipeline("stepwise.harmful");
  }
}

std::map<std::string, std::string> entry_values(const PipelineSpec& p, const SensitivePrompt& sp) {
  std::map<std::string, std::string> vars;
  for (const auto& v : p.entry_vars) {
    if (v == "sensitive") {
      vars[v] = text::trim(sp.text);
    } else if (v == "subject") {
      vars[v] = sp.subject ? *sp.subject : derive_subject(sp.text);
    } else {
      throw PreconditionError("no value for entry variable '" + v + "' of pipeline " + p.id);
    }
    if (vars[v].empty()) throw PreconditionError("empty value for entry variable '" + v + "'");
  }
  return vars;
}

std::string utc_now_iso() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  const auto ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

PipelineRun run_pipeline(const PipelineSpec& p, const Corpus& c, const SensitivePrompt& sp, LlmBackend& backend,
                         const RunOptions& opts) {
  if (auto findings = validate_pipeline(p, c); !findings.empty())
    throw ValidationError("pipeline " + p.id + " invalid: " + findings.front().subject + ": " +
                          findings.front().message);

  PipelineRun run;
  run.run_id = opts.run_id.empty() ? sp.id + "." + backend.id() + "." + p.id : opts.run_id;
  run.sensitive_id = sp.id;
  run.backbone_id = backend.id();
  run.pipeline_id = p.id;
  run.started_at = utc_now_iso();

  auto sleep = opts.retry.sleeper
                   ? opts.retry.sleeper
                   : std::function<void(std::chrono::milliseconds)>(
                         [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); });

  std::map<std::string, std::string> vars;
  try {
    vars = entry_values(p, sp);
  } catch (const Error& e) {
    run.failed = true;
    run.error = e.what();
    run.failed_stage = 0;
    run.finished_at = utc_now_iso();
    return run;
  }

  for (std::size_t k = 0; k < p.stages.size(); ++k) {
    const auto& st = p.stages[k];
    const auto& t = c.at(st.template_id);
    SlotBindings b;
    for (const auto& [slot, var] : st.input_bindings) b[slot] = vars.at(var);

    StageTranscript tr;
    tr.stage_id = st.id;
    std::string last_error;
    bool ok = false;
    try {
      tr.rendered_prompt = render_template(t, b);
    } catch (const Error& e) {
      last_error = e.what();
    }

    if (!tr.rendered_prompt.empty()) {
      ChatRequest req;
      req.messages.push_back({"user", tr.rendered_prompt});
      req.temperature = opts.temperature;
      req.max_output_tokens = opts.max_output_tokens;
      auto backoff = opts.retry.initial_backoff;
      const int attempts = std::max(1, opts.retry.max_attempts);
      for (int attempt = 1; attempt <= attempts; ++attempt) {
        const auto t0 = std::chrono::steady_clock::now();
        try {
          ChatResponse resp = chat(backend, req);
          if (text::trim(resp.text).empty()) throw BackendError("empty response");
          tr.latency = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0);
          tr.response_text = std::move(resp.text);
          tr.usage = resp.usage;
          tr.refusal = resp.refusal;
          tr.attempts = attempt;
          ok = true;
          break;
        } catch (const BackendError& e) {
          last_error = e.what();
          if (attempt < attempts) {
            sleep(backoff);
            backoff *= 2;
          }
        } catch (const Error& e) {
          last_error = e.what();
          break;
        }
      }
    }

    if (!ok) {
      run.failed = true;
      run.failed_stage = k;
      run.error = "stage " + st.id + ": " + last_error;
      run.finished_at = utc_now_iso();
      return run;
    }
    vars[st.output_var] = tr.response_text;
    run.transcripts.push_back(std::move(tr));
  }
  run.adversarial_text = vars.at(p.final_var);
  run.finished_at = utc_now_iso();
  return run;
}

}  // namespace daca
