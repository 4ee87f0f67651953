#include "daca/dataset.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "daca/builtin_data.hpp"
#include "daca/error.hpp"
#include "daca/text.hpp"

namespace daca {

std::string_view to_string(Category c) {
  switch (c) {
    case Category::discriminatory: return "discriminatory";
    case Category::inappropriate: return "inappropriate";
    case Category::character_copyright: return "character_copyright";
    case Category::artistic_copyright: return "artistic_copyright";
  }
  return "?";
}

Category parse_category(std::string_view s) {
  for (auto c : kAllCategories) {
    if (to_string(c) == s) return c;
  }
  throw ValidationError("unknown category: " + std::string(s));
}

bool is_copyright(Category c) {
  return c == Category::character_copyright || c == Category::artistic_copyright;
}

std::string derive_subject(std::string_view text) {
  std::string t = text::trim(text);
  const std::string lower = text::to_lower(t);
  constexpr std::string_view prefix = "please draw ";
  constexpr std::string_view suffix = " for me.";
  if (lower.rfind(prefix, 0) == 0 && lower.size() > prefix.size() + suffix.size() &&
      lower.compare(lower.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return t.substr(prefix.size(), t.size() - prefix.size() - suffix.size());
  }
  return t;
}

std::vector<SensitivePrompt> parse_dataset(std::string_view jsonl, std::string* warning) {
  std::vector<SensitivePrompt> out;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  for (const auto& raw : text::split(jsonl, "\n")) {
    ++line_no;
    const std::string line = text::trim(raw);
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    auto field = [&](const char* key) -> std::string {
      if (!j.contains(key) || !j[key].is_string())
        throw ValidationError("dataset line " + std::to_string(line_no) + ": missing string field '" + key + "'");
      return j[key].get<std::string>();
    };
    SensitivePrompt p;
    p.id = field("id");
    try {
      p.category = parse_category(field("category"));
    } catch (const ValidationError& e) {
      throw ValidationError("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    p.text = field("text");
    if (text::trim(p.text).empty())
      throw ValidationError("dataset line " + std::to_string(line_no) + ": empty text");
    if (j.contains("subject")) p.subject = field("subject");
    if (!ids.insert(p.id).second)
      throw ValidationError("dataset line " + std::to_string(line_no) + ": duplicate id " + p.id);
    out.push_back(std::move(p));
  }
  if (out.empty() && warning) *warning = "dataset is empty";
  return out;
}

std::vector<SensitivePrompt> load_dataset(const std::string& path, std::string* warning) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open dataset: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str(), warning);
}

std::vector<SensitivePrompt> builtin_dataset() { return parse_dataset(builtin_file("dataset.jsonl")); }

}  // namespace daca
