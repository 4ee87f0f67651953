#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace daca {

enum class TemplateKind { GET, PROCESS, SUBSTITUTE, CONQUER, ALL_IN_ONE_DIVIDE, REVIEW };

std::string_view to_string(TemplateKind k);
TemplateKind parse_template_kind(std::string_view s);

struct PromptTemplate {
  std::string id;
  TemplateKind kind = TemplateKind::GET;
  std::string body;
  std::vector<std::string> slots;
  std::string notes;

  bool operator==(const PromptTemplate&) const = default;
};

using SlotBindings = std::map<std::string, std::string>;

struct Corpus {
  std::vector<PromptTemplate> templates;
  std::string version;

  const PromptTemplate* find(std::string_view id) const;
  const PromptTemplate& at(std::string_view id) const;

  bool operator==(const Corpus&) const = default;
};

// One problem found by a validator. `subject` names the template, pipeline or
// stage the message is about.
struct Finding {
  std::string subject;
  std::string message;

  bool operator==(const Finding&) const = default;
};

// Slot names in order of first appearance in `body`.
std::vector<std::string> body_slots(std::string_view body);

// Parses the corpus file format; throws ValidationError on malformed input,
// duplicate ids, empty bodies and slot/body mismatches.
Corpus parse_corpus(std::string_view text);
Corpus load_corpus(const std::string& path);
std::string serialize_corpus(const Corpus& c);

// The corpus shipped with the library.
const Corpus& builtin_corpus();

// Single pass: bound values are inserted verbatim and never rescanned.
std::string render_template(const PromptTemplate& t, const SlotBindings& b);

// Body with every slot marker removed.
std::string strip_slots(const PromptTemplate& t);

// Body split at its slot markers: literals.size() == slots.size() + 1 and
// slots[i] sits between literals[i] and literals[i + 1].
struct TemplateSegments {
  std::vector<std::string> literals;
  std::vector<std::string> slots;
};
TemplateSegments split_template(const PromptTemplate& t);

// Placeholder bindings ("<slot>") for every slot of `t`.
SlotBindings placeholder_bindings(const PromptTemplate& t);

// Invariant violations plus references from the builtin pipelines to
// templates missing in `c`.
std::vector<Finding> validate_corpus(const Corpus& c);

}  // namespace daca
