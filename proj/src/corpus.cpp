#include "daca/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "daca/builtin_data.hpp"
#include "daca/error.hpp"
#include "daca/pipeline.hpp"
#include "daca/text.hpp"

namespace daca {

namespace {

constexpr std::string_view kFence = "```";

struct SlotMatch {
  std::size_t begin;
  std::size_t end;  // one past ']'
  std::string name;
};

// Matches \[[a-z][a-z0-9_]*\] without std::regex.
std::vector<SlotMatch> scan_slots(std::string_view body) {
  std::vector<SlotMatch> out;
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] != '[') continue;
    std::size_t j = i + 1;
    if (j >= body.size() || body[j] < 'a' || body[j] > 'z') continue;
    while (j < body.size() &&
           ((body[j] >= 'a' && body[j] <= 'z') || (body[j] >= '0' && body[j] <= '9') || body[j] == '_'))
      ++j;
    if (j < body.size() && body[j] == ']') {
      out.push_back({i, j + 1, std::string(body.substr(i + 1, j - i - 1))});
      i = j;
    }
  }
  return out;
}

std::vector<std::string> slot_mismatch(const PromptTemplate& t) {
  std::vector<std::string> problems;
  const auto in_body = body_slots(t.body);
  std::set<std::string> declared;
  for (const auto& s : t.slots) {
    if (!declared.insert(s).second) problems.push_back("slot declared twice: " + s);
  }
  for (const auto& s : in_body) {
    if (!declared.count(s)) problems.push_back("body uses undeclared slot: " + s);
  }
  for (const auto& s : declared) {
    if (std::find(in_body.begin(), in_body.end(), s) == in_body.end())
      problems.push_back("declared slot missing from body: " + s);
  }
  return problems;
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  throw ValidationError("corpus line " + std::to_string(line) + ": " + what);
}

}  // namespace

std::string_view to_string(TemplateKind k) {
  switch (k) {
    case TemplateKind::GET: return "GET";
    case TemplateKind::PROCESS: return "PROCESS";
    case TemplateKind::SUBSTITUTE: return "SUBSTITUTE";
    case TemplateKind::CONQUER: return "CONQUER";
    case TemplateKind::ALL_IN_ONE_DIVIDE: return "ALL_IN_ONE_DIVIDE";
    case TemplateKind::REVIEW: return "REVIEW";
  }
  return "?";
}

TemplateKind parse_template_kind(std::string_view s) {
  for (auto k : {TemplateKind::GET, TemplateKind::PROCESS, TemplateKind::SUBSTITUTE, TemplateKind::CONQUER,
                 TemplateKind::ALL_IN_ONE_DIVIDE, TemplateKind::REVIEW}) {
    if (to_string(k) == s) return k;
  }
  throw ValidationError("unknown template kind: " + std::string(s));
}

const PromptTemplate* Corpus::find(std::string_view id) const {
  for (const auto& t : templates) {
    if (t.id == id) return &t;
  }
  return nullptr;
}

const PromptTemplate& Corpus::at(std::string_view id) const {
  if (const auto* t = find(id)) return *t;
  throw ValidationError("unknown template: " + std::string(id));
}

std::vector<std::string> body_slots(std::string_view body) {
  std::vector<std::string> names;
  for (auto& m : scan_slots(body)) {
    if (std::find(names.begin(), names.end(), m.name) == names.end()) names.push_back(m.name);
  }
  return names;
}

Corpus parse_corpus(std::string_view text) {
  Corpus c;
  std::vector<std::string> lines = text::split(text, "\n");
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  for (auto& l : lines) {
    if (!l.empty() && l.back() == '\r') l.pop_back();
  }

  std::size_t i = 0;
  auto skip_blank = [&] {
    while (i < lines.size() && text::trim(lines[i]).empty()) ++i;
  };
  skip_blank();
  if (i >= lines.size() || lines[i].rfind("corpus-version:", 0) != 0)
    parse_fail(i + 1, "expected 'corpus-version:' header");
  c.version = text::trim(std::string_view(lines[i]).substr(15));
  if (c.version.empty()) parse_fail(i + 1, "empty corpus version");
  ++i;

  std::set<std::string> ids;
  while (true) {
    skip_blank();
    if (i >= lines.size()) break;
    PromptTemplate t;
    bool have_id = false, have_kind = false, have_slots = false;
    const std::size_t doc_line = i + 1;
    while (i < lines.size() && lines[i] != kFence) {
      const std::string& l = lines[i];
      const auto colon = l.find(':');
      if (colon == std::string::npos) parse_fail(i + 1, "expected 'key: value' header");
      const std::string key = l.substr(0, colon);
      const std::string value = text::trim(std::string_view(l).substr(colon + 1));
      if (key == "id") {
        t.id = value;
        have_id = true;
      } else if (key == "kind") {
        try {
          t.kind = parse_template_kind(value);
        } catch (const ValidationError& e) {
          parse_fail(i + 1, e.what());
        }
        have_kind = true;
      } else if (key == "slots") {
        if (!value.empty()) {
          for (auto& s : text::split(value, ",")) t.slots.push_back(text::trim(s));
        }
        have_slots = true;
      } else if (key == "notes") {
        t.notes = value;
      } else {
        parse_fail(i + 1, "unknown header '" + key + "'");
      }
      ++i;
    }
    if (i >= lines.size()) parse_fail(doc_line, "missing body fence");
    if (!have_id || t.id.empty()) parse_fail(doc_line, "missing id");
    if (!have_kind) parse_fail(doc_line, "missing kind for " + t.id);
    if (!have_slots) parse_fail(doc_line, "missing slots for " + t.id);
    ++i;  // opening fence
    std::vector<std::string> body;
    while (i < lines.size() && lines[i] != kFence) body.push_back(lines[i++]);
    if (i >= lines.size()) parse_fail(doc_line, "unterminated body for " + t.id);
    ++i;  // closing fence
    t.body = text::join(body, "\n");
    if (t.body.empty()) parse_fail(doc_line, "empty body for " + t.id);
    if (!ids.insert(t.id).second) parse_fail(doc_line, "duplicate id " + t.id);
    if (auto problems = slot_mismatch(t); !problems.empty())
      parse_fail(doc_line, "slot mismatch in " + t.id + ": " + problems.front());
    c.templates.push_back(std::move(t));
  }
  return c;
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open corpus file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_corpus(ss.str());
}

std::string serialize_corpus(const Corpus& c) {
  std::string out = "corpus-version: " + c.version + "\n";
  for (const auto& t : c.templates) {
    out += "\nid: " + t.id + "\n";
    out += "kind: " + std::string(to_string(t.kind)) + "\n";
    out += "slots:" + (t.slots.empty() ? std::string() : " " + text::join(t.slots, ", ")) + "\n";
    out += "notes: " + t.notes + "\n";
    out += "```\n" + t.body + "\n```\n";
  }
  return out;
}

const Corpus& builtin_corpus() {
  static const Corpus c = parse_corpus(builtin_file("corpus.txt"));
  return c;
}

std::string render_template(const PromptTemplate& t, const SlotBindings& b) {
  for (const auto& [name, value] : b) {
    if (std::find(t.slots.begin(), t.slots.end(), name) == t.slots.end())
      throw ValidationError("binding for unknown slot '" + name + "' in template " + t.id);
    if (value.empty()) throw PreconditionError("empty binding for slot '" + name + "' in template " + t.id);
  }
  for (const auto& s : t.slots) {
    if (!b.count(s)) throw ValidationError("missing binding for slot '" + s + "' in template " + t.id);
  }
  std::string out;
  std::size_t cursor = 0;
  for (const auto& m : scan_slots(t.body)) {
    out.append(t.body, cursor, m.begin - cursor);
    out.append(b.at(m.name));
    cursor = m.end;
  }
  out.append(t.body, cursor, std::string::npos);
  return out;
}

std::string strip_slots(const PromptTemplate& t) {
  std::string out;
  std::size_t cursor = 0;
  for (const auto& m : scan_slots(t.body)) {
    out.append(t.body, cursor, m.begin - cursor);
    cursor = m.end;
  }
  out.append(t.body, cursor, std::string::npos);
  return out;
}

TemplateSegments split_template(const PromptTemplate& t) {
  TemplateSegments seg;
  std::size_t cursor = 0;
  for (const auto& m : scan_slots(t.body)) {
    seg.literals.push_back(t.body.substr(cursor, m.begin - cursor));
    seg.slots.push_back(m.name);
    cursor = m.end;
  }
  seg.literals.push_back(t.body.substr(cursor));
  return seg;
}

SlotBindings placeholder_bindings(const PromptTemplate& t) {
  SlotBindings b;
  for (const auto& s : t.slots) b[s] = "<" + s + ">";
  return b;
}

std::vector<Finding> validate_corpus(const Corpus& c) {
  std::vector<Finding> out;
  std::set<std::string> seen;
  for (const auto& t : c.templates) {
    const std::string subject = t.id.empty() ? "<unnamed>" : t.id;
    if (t.id.empty()) out.push_back({subject, "empty id"});
    if (!seen.insert(t.id).second) out.push_back({subject, "duplicate id"});
    if (t.body.empty()) out.push_back({subject, "empty body"});
    for (auto& p : slot_mismatch(t)) out.push_back({subject, "slot mismatch: " + p});
  }
  for (const auto& p : builtin_pipelines()) {
    for (const auto& st : p.stages) {
      if (!c.find(st.template_id))
        out.push_back({p.id + "/" + st.id, "builtin pipeline references unknown template " + st.template_id});
    }
  }
  return out;
}

}  // namespace daca
