#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "daca/accounting.hpp"
#include "daca/config.hpp"
#include "daca/error.hpp"
#include "daca/metrics.hpp"
#include "daca/mock_backends.hpp"
#include "daca/report.hpp"
#include "daca/result_log.hpp"

namespace py = pybind11;
using namespace daca;

namespace {

const PricingScheme& scheme(const std::string& id) { return builtin_pricing().at(id); }

py::dict transform(const std::string& text, const std::string& category, const std::string& backbone,
                   const std::string& subject) {
  auto rt = make_runtime(default_config(), {backbone}, false);
  SensitivePrompt sp;
  sp.id = "py";
  sp.text = text;
  sp.category = parse_category(category);
  if (!subject.empty()) sp.subject = subject;
  const PipelineSpec& pipe = pipeline_for(sp.category);
  const Backbone& bb = rt->ctx.backbone(backbone);
  RunOptions opts;
  opts.temperature = bb.backend->deterministic() ? 0.0 : 1.0;
  PipelineRun run;
  {
    py::gil_scoped_release release;
    run = run_pipeline(pipe, builtin_corpus(), sp, *bb.backend, opts);
  }
  py::dict out;
  out["run_id"] = run.run_id;
  out["pipeline_id"] = run.pipeline_id;
  out["adversarial_text"] = run.adversarial_text;
  out["stages"] = run.transcripts.size();
  out["failed"] = run.failed;
  out["error"] = run.error;
  if (!run.failed) {
    const auto cost = account_run(run, pipe, builtin_corpus(), *bb.scheme);
    out["fixed_tokens"] = cost.fixed_tokens;
    out["total_cost"] = cost.total_cost.str();
  }
  return out;
}

py::dict check(const std::string& prompt) {
  const auto d = filter_check(builtin_sim_filter(), prompt);
  py::dict out;
  out["blocked"] = d.blocked;
  out["reason"] = std::string(to_string(d.reason));
  out["matched"] = d.matched;
  return out;
}

py::dict verdict(const std::string& text) {
  const auto v = parse_review_verdict(text);
  py::dict out;
  out["appropriate"] = v.appropriate ? py::cast(*v.appropriate) : py::none();
  out["label"] = v.label;
  out["reason"] = v.reason;
  return out;
}

}  // namespace

PYBIND11_MODULE(_daca, m) {
  m.doc() = "Bindings for the daca core library";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_RuntimeError);
  py::register_exception<BackendError>(m, "BackendError", PyExc_RuntimeError);
  py::register_exception<StorageError>(m, "StorageError", PyExc_OSError);

  m.def("template_ids", [] {
    std::vector<std::string> ids;
    for (const auto& t : builtin_corpus().templates) ids.push_back(t.id);
    return ids;
  });
  m.def("pipeline_ids", [] {
    std::vector<std::string> ids;
    for (const auto& p : builtin_pipelines()) ids.push_back(p.id);
    return ids;
  });
  m.def("pricing_ids", [] {
    std::vector<std::string> ids;
    for (const auto& s : builtin_pricing().schemes) ids.push_back(s.id);
    return ids;
  });
  m.def("estimate_tokens", [](const std::string& text, const std::string& id) { return estimate_tokens(text, scheme(id)); },
        py::arg("text"), py::arg("scheme") = "gpt-4.0");
  m.def("price_tokens",
        [](std::int64_t in, std::int64_t out, const std::string& id) { return price_tokens(in, out, scheme(id)).str(); },
        py::arg("input_tokens"), py::arg("output_tokens"), py::arg("scheme") = "gpt-4.0",
        "Exact decimal USD string.");
  m.def("fixed_tokens",
        [](const std::string& pipeline, const std::string& id) {
          return fixed_cost(builtin_pipeline(pipeline), builtin_corpus(), scheme(id)).tokens;
        },
        py::arg("pipeline"), py::arg("scheme") = "gpt-4.0");
  m.def("filter_check", &check, py::arg("prompt"));
  m.def("transform", &transform, py::arg("text"), py::arg("category"), py::arg("backbone") = "mock",
        py::arg("subject") = "");
  m.def("similarity",
        [](const std::string& a, const std::string& b) { return safe_cosine(hash_embed(a), hash_embed(b)); });
  m.def("parse_review_verdict", &verdict);
  m.def("format_percent", [](std::optional<double> r) { return format_percent(r); });
  m.def("report_text", [](const std::string& log) { return render_text(build_report_from_log(log)); });
  m.def("report_jsonl", [](const std::string& log) { return render_jsonl(build_report_from_log(log)); });
}
