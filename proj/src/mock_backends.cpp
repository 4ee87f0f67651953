#include "daca/mock_backends.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "daca/builtin_data.hpp"
#include "daca/error.hpp"
#include "daca/text.hpp"

namespace daca {

using nlohmann::json;

namespace {

TokenUsage mock_usage(const ChatRequest& req, const std::string& response, const PricingScheme& scheme) {
  return {estimate_tokens(last_user_message(req), scheme), estimate_tokens(response, scheme)};
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class ScriptedBackend final : public LlmBackend {
 public:
  ScriptedBackend(std::string id, std::string_view jsonl, ScriptedFallback fb, PricingScheme scheme)
      : id_(std::move(id)), fallback_(fb), scheme_(std::move(scheme)) {
    std::size_t line_no = 0;
    for (const auto& raw : text::split(jsonl, "\n")) {
      ++line_no;
      const std::string line = text::trim(raw);
      if (line.empty()) continue;
      try {
        const json j = json::parse(line);
        responses_[j.at("digest").get<std::string>()] = j.at("response").get<std::string>();
      } catch (const json::exception& e) {
        throw ValidationError("fixture line " + std::to_string(line_no) + ": " + e.what());
      }
    }
  }

  ChatResponse chat(const ChatRequest& req) override {
    const std::string digest = request_digest(req);
    ChatResponse r;
    if (auto it = responses_.find(digest); it != responses_.end()) {
      r.text = it->second;
    } else if (fallback_ == ScriptedFallback::echo) {
      r.text = last_user_message(req);
    } else {
      throw BackendError("no fixture for request digest " + digest);
    }
    r.usage = mock_usage(req, r.text, scheme_);
    return r;
  }

  std::string id() const override { return id_; }
  bool deterministic() const override { return true; }

 private:
  std::string id_;
  ScriptedFallback fallback_;
  PricingScheme scheme_;
  std::unordered_map<std::string, std::string> responses_;
};

class EchoBackend final : public LlmBackend {
 public:
  EchoBackend(std::string id, PricingScheme scheme) : id_(std::move(id)), scheme_(std::move(scheme)) {}
  ChatResponse chat(const ChatRequest& req) override {
    ChatResponse r;
    r.text = last_user_message(req);
    r.usage = mock_usage(req, r.text, scheme_);
    return r;
  }
  std::string id() const override { return id_; }
  bool deterministic() const override { return true; }

 private:
  std::string id_;
  PricingScheme scheme_;
};

// ---- rule-based mock ----

struct CharacterRule {
  std::string phrase, descriptor, name, pronoun, attire;
};

struct ActionRule {
  std::vector<std::string> verbs, passive;
  std::string executor, recipient;
  std::vector<std::string> executor_props, recipient_props, details;
};

struct Rewrite {
  std::string find, replace, prefix;
};

struct KeyedText {
  std::vector<std::string> keys;
  std::string text;
};

struct Rules {
  std::vector<CharacterRule> characters;
  std::vector<ActionRule> actions;
  std::vector<std::pair<std::string, std::string>> riddles;
  std::vector<KeyedText> scenes;
  std::string default_scene;
  std::vector<Rewrite> rewrites;
  std::vector<KeyedText> subjects, artists;
  std::string default_description;
  std::vector<std::pair<std::string, std::string>> identity_scrub;
  std::vector<std::string> review_flags;
};

std::vector<std::string> strings(const json& j, const char* key) {
  std::vector<std::string> out;
  if (j.contains(key)) {
    for (const auto& v : j.at(key)) out.push_back(v.get<std::string>());
  }
  return out;
}

Rules parse_rules(std::string_view text) {
  Rules r;
  json j;
  try {
    j = json::parse(text);
    for (const auto& c : j.at("characters"))
      r.characters.push_back({c.at("phrase").get<std::string>(), c.value("descriptor", ""),
                              c.at("name").get<std::string>(), c.value("pronoun", "their"), c.value("attire", "")});
    for (const auto& a : j.at("actions"))
      r.actions.push_back({strings(a, "verbs"), strings(a, "passive"), a.at("executor").get<std::string>(),
                           a.at("recipient").get<std::string>(), strings(a, "executor_props"),
                           strings(a, "recipient_props"), strings(a, "details")});
    for (const auto& x : j.at("riddles"))
      r.riddles.emplace_back(x.at("property").get<std::string>(), x.at("riddle").get<std::string>());
    for (const auto& x : j.at("scenes")) r.scenes.push_back({strings(x, "keywords"), x.at("scene").get<std::string>()});
    r.default_scene = j.at("default_scene").get<std::string>();
    for (const auto& x : j.at("rewrites"))
      r.rewrites.push_back({x.at("find").get<std::string>(), x.at("replace").get<std::string>(), x.value("prefix", "")});
    for (const auto& x : j.at("subjects"))
      r.subjects.push_back({strings(x, "keys"), x.at("description").get<std::string>()});
    for (const auto& x : j.at("artists"))
      r.artists.push_back({strings(x, "keys"), x.at("description").get<std::string>()});
    r.default_description = j.at("default_description").get<std::string>();
    for (const auto& x : j.at("identity_scrub"))
      r.identity_scrub.emplace_back(x.at("find").get<std::string>(), x.at("replace").get<std::string>());
    r.review_flags = strings(j, "review_flags");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed mock rules: ") + e.what());
  }
  return r;
}

// Replaces word-bounded, case-insensitive occurrences of every phrase in one
// pass; longer phrases win where matches overlap.
std::string replace_phrases(std::string_view s, std::vector<std::pair<std::string, std::string>> pairs) {
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
  struct Hit {
    std::size_t pos, len;
    const std::string* repl;
  };
  std::vector<Hit> hits;
  for (const auto& [phrase, repl] : pairs) {
    if (phrase.empty()) continue;
    for (std::size_t pos = text::find_word_ci(s, phrase); pos != std::string_view::npos;
         pos = text::find_word_ci(s, phrase, pos + 1)) {
      const bool overlaps = std::any_of(hits.begin(), hits.end(), [&](const Hit& h) {
        return pos < h.pos + h.len && h.pos < pos + phrase.size();
      });
      if (!overlaps) hits.push_back({pos, phrase.size(), &repl});
    }
  }
  std::sort(hits.begin(), hits.end(), [](const Hit& a, const Hit& b) { return a.pos < b.pos; });
  std::string out;
  std::size_t cursor = 0;
  for (const auto& h : hits) {
    out.append(s.substr(cursor, h.pos - cursor));
    out.append(*h.repl);
    cursor = h.pos + h.len;
  }
  out.append(s.substr(cursor));
  return out;
}

std::string one_line(std::string_view s) {
  std::string out;
  bool space = false;
  for (char c : s) {
    if (c == '\n' || c == '\r' || c == '\t' || c == ' ') {
      space = true;
      continue;
    }
    if (space && !out.empty()) out.push_back(' ');
    space = false;
    out.push_back(c);
  }
  return out;
}

std::string sentence(std::string_view s) {
  std::string out = text::capitalize(text::trim(s));
  while (!out.empty() && (out.back() == ',' || out.back() == ';')) out.pop_back();
  if (!out.empty() && out.back() != '.' && out.back() != '!' && out.back() != '?' && out.back() != '\'')
    out.push_back('.');
  return out;
}

std::string strip_period(std::string s) {
  s = text::trim(s);
  while (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

std::string number_word(std::size_t n) {
  static const char* words[] = {"zero", "one", "two", "three", "four", "five",
                                "six",  "seven", "eight", "nine", "ten"};
  return n <= 10 ? words[n] : std::to_string(n);
}

// "A: x, B: y." -> {(A, x), (B, y)}. Pieces without ": " belong to the
// previous entry.
std::vector<std::pair<std::string, std::string>> parse_table(std::string_view s, std::string_view sep) {
  std::vector<std::pair<std::string, std::string>> out;
  for (auto& piece : text::split(strip_period(std::string(s)), sep)) {
    const auto colon = piece.find(": ");
    if (colon == std::string::npos) {
      if (!out.empty()) out.back().second += std::string(sep) + piece;
      continue;
    }
    out.emplace_back(text::trim(piece.substr(0, colon)), text::trim(piece.substr(colon + 2)));
  }
  return out;
}

struct FoundCharacter {
  const CharacterRule* rule;
  std::size_t pos;
};

class RuleBasedBackend final : public LlmBackend {
 public:
  RuleBasedBackend(std::string id, PricingScheme scheme, Rules rules, const Corpus& corpus)
      : id_(std::move(id)), scheme_(std::move(scheme)), rules_(std::move(rules)), corpus_(corpus) {}

  std::string id() const override { return id_; }
  bool deterministic() const override { return true; }

  ChatResponse chat(const ChatRequest& req) override {
    const std::string& prompt = last_user_message(req);
    const TemplateMatch m = match_template(corpus_, prompt);
    if (!m.tmpl) throw ValidationError("unknown stage kind: prompt matches no corpus template");
    ChatResponse r;
    r.text = respond(*m.tmpl, m.values, prompt);
    r.usage = mock_usage(req, r.text, scheme_);
    return r;
  }

 private:
  std::string label(const CharacterRule& c) const { return text::capitalize(c.phrase); }

  std::vector<FoundCharacter> find_characters(std::string_view s) const {
    std::vector<const CharacterRule*> by_len;
    for (const auto& c : rules_.characters) by_len.push_back(&c);
    std::stable_sort(by_len.begin(), by_len.end(),
                     [](auto* a, auto* b) { return a->phrase.size() > b->phrase.size(); });
    std::vector<FoundCharacter> found;
    std::vector<std::pair<std::size_t, std::size_t>> taken;
    for (const auto* c : by_len) {
      for (std::size_t pos = text::find_word_ci(s, c->phrase); pos != std::string_view::npos;
           pos = text::find_word_ci(s, c->phrase, pos + 1)) {
        const bool overlaps = std::any_of(taken.begin(), taken.end(), [&](auto& t) {
          return pos < t.first + t.second && t.first < pos + c->phrase.size();
        });
        if (overlaps) continue;
        taken.emplace_back(pos, c->phrase.size());
        const bool seen = std::any_of(found.begin(), found.end(), [&](auto& f) { return f.rule == c; });
        if (!seen) found.push_back({c, pos});
      }
    }
    std::sort(found.begin(), found.end(), [](auto& a, auto& b) { return a.pos < b.pos; });
    return found;
  }

  struct Roles {
    const ActionRule* action = nullptr;
    const CharacterRule* executor = nullptr;
    const CharacterRule* recipient = nullptr;
  };

  Roles analyse(std::string_view s) const {
    Roles roles;
    const auto chars = find_characters(s);
    for (const auto& a : rules_.actions) {
      std::size_t vpos = std::string_view::npos;
      std::size_t vlen = 0;
      bool passive = false;
      for (const auto& p : a.passive) {
        if (auto pos = text::find_word_ci(s, p); pos != std::string_view::npos) {
          vpos = pos;
          vlen = p.size();
          passive = true;
          break;
        }
      }
      if (vpos == std::string_view::npos) {
        for (const auto& v : a.verbs) {
          if (auto pos = text::find_word_ci(s, v); pos != std::string_view::npos) {
            vpos = pos;
            vlen = v.size();
            break;
          }
        }
      }
      if (vpos == std::string_view::npos) continue;
      roles.action = &a;
      const CharacterRule* before = nullptr;
      const CharacterRule* after = nullptr;
      for (const auto& f : chars) {
        if (f.pos < vpos) before = f.rule;
        if (f.pos >= vpos + vlen && !after) after = f.rule;
      }
      if (!before && !after && !chars.empty()) before = chars.front().rule;
      roles.executor = passive ? after : before;
      roles.recipient = passive ? before : after;
      if (!roles.executor) std::swap(roles.executor, roles.recipient);
      return roles;
    }
    return roles;
  }

  std::vector<std::pair<std::string, std::string>> char_table_pairs(std::string_view table) const {
    std::vector<std::pair<std::string, std::string>> pairs;
    for (auto& [lab, value] : parse_table(table, ", ")) {
      const auto words = text::split(value, " ");
      pairs.emplace_back(lab, words.back());
    }
    return pairs;
  }

  std::vector<std::pair<std::string, std::string>> property_pairs(std::string_view table) const {
    return parse_table(table, ", ");
  }

  std::string apply_riddles(std::string_view s) const { return replace_phrases(s, rules_.riddles); }

  std::string fill(const std::string& pattern, const Roles& r) const {
    std::string out = pattern;
    auto put = [&](const std::string& key, const CharacterRule* c) {
      const std::string value = c ? label(*c) : std::string("Someone");
      for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + value.size()))
        out.replace(pos, key.size(), value);
    };
    put("{executor}", r.executor);
    put("{recipient}", r.recipient);
    return out;
  }

  std::string respond(const PromptTemplate& t, const SlotBindings& v, std::string_view prompt) const {
    const std::string& id = t.id;
    auto in = [&](const char* slot) { return one_line(v.at(slot)); };

    if (id == "get.char_table") {
      std::vector<std::string> entries;
      for (const auto& f : find_characters(in("sensitive"))) {
        const auto& c = *f.rule;
        entries.push_back(label(c) + ": " + (c.descriptor.empty() ? c.name : c.descriptor + " " + c.name));
      }
      if (entries.empty()) return "Person: Alex.";
      return text::join(entries, ", ") + ".";
    }
    if (id == "get.characters") {
      std::vector<std::string> people;
      for (auto& [lab, value] : parse_table(in("char_table"), ", ")) people.push_back(value);
      if (people.size() == 1) return "This story has one main character, it is " + people[0] + ".";
      return "This story has " + number_word(people.size()) + " main characters, they are " +
             text::join(people, ", ") + ".";
    }
    if (id == "get.action") return sentence(in("sensitive"));
    if (id == "process.action") {
      const std::string actions = in("actions");
      const Roles r = analyse(actions);
      if (!r.action || !r.executor) return sentence(actions);
      std::string out = "'" + label(*r.executor) + "' used to be a highly skilled stunt performer, " +
                        r.executor->pronoun + " signature move is '" + r.action->executor + "'.";
      if (r.recipient) {
        out += " '" + label(*r.recipient) + "' is an actor who likes to perform quirky actions, " +
               r.recipient->pronoun + " action today is: '" + r.action->recipient + ".'";
      }
      return out;
    }
    if (id == "get.properties") {
      const std::string s = in("sensitive");
      const Roles r = analyse(s);
      std::vector<std::string> entries;
      if (r.action) {
        if (r.executor) entries.push_back(label(*r.executor) + ": " + text::join(r.action->executor_props, ", "));
        if (r.recipient) entries.push_back(label(*r.recipient) + ": " + text::join(r.action->recipient_props, ", "));
      } else {
        for (const auto& f : find_characters(s)) entries.push_back(label(*f.rule) + ": a cellphone");
      }
      if (entries.empty()) return "Nobody: nothing in particular.";
      return text::join(entries, "; ") + ".";
    }
    if (id == "process.property_table") {
      const std::string s = in("properties");
      auto sorted = rules_.riddles;
      std::stable_sort(sorted.begin(), sorted.end(),
                       [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
      std::vector<std::pair<std::size_t, std::size_t>> taken;
      std::vector<std::pair<std::size_t, std::string>> entries;
      for (const auto& [prop, riddle] : sorted) {
        for (std::size_t pos = text::find_word_ci(s, prop); pos != std::string_view::npos;
             pos = text::find_word_ci(s, prop, pos + 1)) {
          const bool overlaps = std::any_of(taken.begin(), taken.end(), [&](auto& tk) {
            return pos < tk.first + tk.second && tk.first < pos + prop.size();
          });
          if (overlaps) continue;
          taken.emplace_back(pos, prop.size());
          const std::string entry = text::capitalize(prop) + ": " + riddle;
          const bool dup = std::any_of(entries.begin(), entries.end(), [&](auto& e) { return e.second == entry; });
          if (!dup) entries.emplace_back(pos, entry);
        }
      }
      if (entries.empty()) return "No sensitive properties.";
      std::sort(entries.begin(), entries.end());
      std::vector<std::string> parts;
      for (auto& e : entries) parts.push_back(e.second);
      return text::join(parts, ", ") + ".";
    }
    if (id == "process.properties") {
      std::vector<std::string> entries;
      for (auto& [carrier, props] : parse_table(in("properties"), "; ")) {
        std::vector<std::string> quoted;
        for (auto& p : text::split(props, ", ")) quoted.push_back("'" + apply_riddles(text::trim(p)) + "'");
        entries.push_back("'" + carrier + "' carries " + text::join(quoted, ", "));
      }
      if (entries.empty()) return "Nobody carries anything in particular.";
      return text::join(entries, "; ") + ".";
    }
    if (id == "substitute.chars_actions" || id == "substitute.chars_properties" ||
        id == "substitute.chars_details") {
      const char* slot = id == "substitute.chars_actions" ? "actions"
                         : id == "substitute.chars_properties" ? "properties"
                                                                : "details";
      return replace_phrases(in(slot), char_table_pairs(in("char_table")));
    }
    if (id == "substitute.actions_properties")
      return replace_phrases(in("actions"), property_pairs(in("property_table")));
    if (id == "get.costumes") {
      std::vector<std::string> entries;
      for (const auto& f : find_characters(in("sensitive")))
        entries.push_back(label(*f.rule) + " dressed in " + f.rule->attire);
      if (entries.empty()) return "Everyone dressed in everyday clothes.";
      return text::join(entries, ", ") + ".";
    }
    if (id == "substitute.chars_costumes") {
      const std::string named = replace_phrases(in("costumes"), char_table_pairs(in("char_table")));
      std::vector<std::string> entries;
      for (auto& piece : text::split(strip_period(named), ", ")) {
        const auto d = piece.find(" dressed in ");
        if (d == std::string::npos) {
          if (!entries.empty()) entries.back() += ", " + piece;
          continue;
        }
        entries.push_back("'" + piece.substr(0, d) + "' is a cosplay enthusiast, and their outfit today is '" +
                          piece.substr(d + 12) + "'");
      }
      if (entries.empty()) return sentence(named);
      return text::join(entries, ", ") + ".";
    }
    if (id == "get.scenes") {
      const std::string s = in("sensitive");
      for (const auto& sc : rules_.scenes) {
        for (const auto& k : sc.keys) {
          if (text::find_word_ci(s, k) != std::string_view::npos) return sentence(sc.text);
        }
      }
      return sentence(rules_.default_scene);
    }
    if (id == "get.details") {
      const Roles r = analyse(in("sensitive"));
      if (!r.action) return "Nothing in the surroundings is damaged.";
      std::vector<std::string> parts;
      for (const auto& d : r.action->details) parts.push_back(fill(d, r));
      return sentence(text::join(parts, ", "));
    }
    if (id == "process.details") {
      const auto props = property_pairs(in("property_table"));
      std::vector<std::string> clauses;
      for (auto& clause : text::split(strip_period(in("details")), ", ")) {
        std::string c = text::trim(clause);
        for (const auto& rw : rules_.rewrites) {
          if (text::find_word_ci(c, rw.find) == std::string_view::npos) continue;
          c = rw.prefix + text::replace_word_ci(c, rw.find, rw.replace);
        }
        clauses.push_back(replace_phrases(c, props));
      }
      return sentence(text::join(clauses, ", "));
    }
    if (id == "conquer.story") {
      std::vector<std::string> parts;
      for (const char* slot : {"characters", "actions", "properties", "costumes", "scenes", "details"})
        parts.push_back(sentence(in(slot)));
      return text::join(parts, " ");
    }
    if (id == "divide.character") {
      const std::string subject = text::to_lower(in("subject"));
      for (const auto& s : rules_.subjects) {
        for (const auto& k : s.keys) {
          if (subject.find(k) != std::string::npos) return s.text;
        }
      }
      return rules_.default_description;
    }
    if (id == "divide.artist") {
      const std::string s = text::to_lower(in("sensitive"));
      for (const auto& a : rules_.artists) {
        for (const auto& k : a.keys) {
          if (s.find(k) != std::string::npos) return a.text;
        }
      }
      return rules_.default_description;
    }
    if (id == "conquer.character" || id == "conquer.artist") {
      std::string d = in("description");
      for (const auto& [from, to] : rules_.identity_scrub) {
        for (auto pos = d.find(from); pos != std::string::npos; pos = d.find(from, pos + to.size()))
          d.replace(pos, from.size(), to);
      }
      return d;
    }
    if (id == "review.image") {
      const std::string lower = text::to_lower(prompt);
      for (const auto& f : rules_.review_flags) {
        if (lower.find(text::to_lower(f)) != std::string::npos)
          return "[Inappropriate][The scene suggests harm: " + f + "]";
      }
      return "[Appropriate][Nothing harmful is depicted]";
    }
    throw ValidationError("unknown stage kind: " + id);
  }

  std::string id_;
  PricingScheme scheme_;
  Rules rules_;
  const Corpus& corpus_;
};

}  // namespace

TemplateMatch match_template(const Corpus& c, std::string_view prompt) {
  TemplateMatch best;
  std::size_t best_score = 0;
  for (const auto& t : c.templates) {
    const TemplateSegments seg = split_template(t);
    const auto& lits = seg.literals;
    const auto& names = seg.slots;

    SlotBindings values;
    bool ok = prompt.substr(0, lits[0].size()) == lits[0];
    std::size_t pos = lits[0].size();
    if (ok && names.empty()) {
      // Slot-free templates (review) may carry appended material.
      ok = t.kind == TemplateKind::REVIEW || prompt.size() == lits[0].size();
    }
    for (std::size_t k = 0; ok && k < names.size(); ++k) {
      const std::string& next = lits[k + 1];
      std::size_t end;
      if (k + 1 == names.size()) {
        if (prompt.size() < pos + next.size() || prompt.substr(prompt.size() - next.size()) != next) {
          ok = false;
          break;
        }
        end = prompt.size() - next.size();
      } else {
        if (next.empty()) {
          ok = false;
          break;
        }
        end = prompt.find(next, pos);
        if (end == std::string_view::npos) {
          ok = false;
          break;
        }
      }
      if (end <= pos) {
        ok = false;
        break;
      }
      values[names[k]] = std::string(prompt.substr(pos, end - pos));
      pos = end + next.size();
    }
    if (!ok) continue;
    std::size_t score = 0;
    for (auto& l : lits) score += l.size();
    if (!best.tmpl || score > best_score) {
      best.tmpl = &t;
      best.values = std::move(values);
      best_score = score;
    }
  }
  return best;
}

std::unique_ptr<LlmBackend> make_scripted_backend_from_text(const std::string& id, std::string_view jsonl,
                                                            ScriptedFallback fallback, const PricingScheme& scheme) {
  return std::make_unique<ScriptedBackend>(id, jsonl, fallback, scheme);
}

std::unique_ptr<LlmBackend> make_scripted_backend(const std::string& id, const std::string& fixtures,
                                                  ScriptedFallback fallback, const PricingScheme& scheme) {
  constexpr std::string_view builtin = "builtin:";
  if (fixtures.rfind(builtin, 0) == 0) {
    return make_scripted_backend_from_text(
        id, builtin_file("fixtures/" + fixtures.substr(builtin.size()) + ".jsonl"), fallback, scheme);
  }
  std::ifstream probe(fixtures);
  if (!probe) throw ConfigError("missing fixture file: " + fixtures);
  return make_scripted_backend_from_text(id, read_file(fixtures), fallback, scheme);
}

std::unique_ptr<LlmBackend> make_echo_backend(const std::string& id, const PricingScheme& scheme) {
  return std::make_unique<EchoBackend>(id, scheme);
}

std::unique_ptr<LlmBackend> make_rule_based_backend(const std::string& id, const PricingScheme& scheme,
                                                    std::string_view rules_json, const Corpus* corpus) {
  Rules rules = parse_rules(rules_json.empty() ? builtin_file("mock_rules.json") : rules_json);
  return std::make_unique<RuleBasedBackend>(id, scheme, std::move(rules), corpus ? *corpus : builtin_corpus());
}

RecordingBackend::RecordingBackend(LlmBackend& inner, std::string path) : inner_(inner), path_(std::move(path)) {}

ChatResponse RecordingBackend::chat(const ChatRequest& req) {
  ChatResponse r = inner_.chat(req);
  const std::string line = json{{"digest", request_digest(req)}, {"response", r.text}}.dump() + "\n";
  std::lock_guard lk(mu_);
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw StorageError("cannot append to " + path_);
  out << line;
  return r;
}

}  // namespace daca
