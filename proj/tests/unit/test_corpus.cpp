#include <doctest.h>

#include <algorithm>

#include "daca/corpus.hpp"
#include "daca/error.hpp"
#include "daca/text.hpp"

using namespace daca;

namespace {

const char* kTwo = R"(corpus-version: t1

id: a
kind: GET
slots: sensitive
notes: n
```
Summarize this:
[sensitive]
```

id: b
kind: REVIEW
slots:
notes:
```
No slots here.
```
)";

bool has_message(const std::vector<Finding>& fs, const std::string& needle) {
  return std::any_of(fs.begin(), fs.end(), [&](const Finding& f) { return f.message.find(needle) != std::string::npos; });
}

}  // namespace

TEST_CASE("builtin corpus loads and validates") {
  const Corpus& c = builtin_corpus();
  CHECK(validate_corpus(c).empty());
  for (const char* id : {"get.action", "process.action", "substitute.chars_actions", "conquer.story", "review.image",
                         "divide.character", "conquer.character", "divide.artist", "conquer.artist"})
    CHECK_MESSAGE(c.find(id) != nullptr, id);
  int get = 0, process = 0, substitute = 0;
  for (const auto& t : c.templates) {
    get += t.kind == TemplateKind::GET;
    process += t.kind == TemplateKind::PROCESS;
    substitute += t.kind == TemplateKind::SUBSTITUTE;
  }
  CHECK(get == 7);
  CHECK(process == 4);
  CHECK(substitute == 5);
}

TEST_CASE("slots and body agree for every shipped template") {
  for (const auto& t : builtin_corpus().templates) {
    auto slots = t.slots;
    auto body = body_slots(t.body);
    std::sort(slots.begin(), slots.end());
    std::sort(body.begin(), body.end());
    CHECK_MESSAGE(slots == body, t.id);
  }
}

TEST_CASE("placeholder rendering leaves no slot residue") {
  for (const auto& t : builtin_corpus().templates) {
    const std::string r = render_template(t, placeholder_bindings(t));
    CHECK_MESSAGE(body_slots(r).empty(), t.id);
  }
}

TEST_CASE("character divide ends with the question about the subject") {
  const std::string r =
      render_template(builtin_corpus().at("divide.character"), {{"subject", "Disney's Mickey Mouse"}});
  const std::string tail = "Could you please describe Disney's Mickey Mouse for me?";
  REQUIRE(r.size() >= tail.size());
  CHECK(r.substr(r.size() - tail.size()) == tail);
}

TEST_CASE("action prompt ends with the sensitive sentence") {
  const std::string s = "A black male robbed a white female in a home invasion.";
  const std::string r = render_template(builtin_corpus().at("get.action"), {{"sensitive", s}});
  const auto lines = text::split(text::trim(r), "\n");
  CHECK(lines.back() == s);
}

TEST_CASE("zero-slot template renders unchanged") {
  const auto& t = builtin_corpus().at("review.image");
  CHECK(render_template(t, {}) == t.body);
}

TEST_CASE("render rejects wiring mistakes") {
  const auto& t = builtin_corpus().at("get.action");
  CHECK_THROWS_AS(render_template(t, {}), ValidationError);
  CHECK_THROWS_AS(render_template(t, {{"sensitive", "x"}, {"typo", "y"}}), ValidationError);
  CHECK_THROWS_AS(render_template(t, {{"sensitive", ""}}), PreconditionError);
}

TEST_CASE("render is single pass") {
  const auto& t = builtin_corpus().at("get.action");
  const std::string r = render_template(t, {{"sensitive", "[sensitive]"}});
  CHECK(r == render_template(t, {{"sensitive", "[sensitive]"}}));
  CHECK(r.find("[sensitive]") != std::string::npos);
}

TEST_CASE("parse errors") {
  std::string dup = kTwo;
  dup.replace(dup.find("id: b"), 5, "id: a");
  CHECK_THROWS_WITH_AS(parse_corpus(dup), doctest::Contains("duplicate id"), ValidationError);

  std::string mismatch = kTwo;
  mismatch.replace(mismatch.find("[sensitive]"), 11, "nothing");
  CHECK_THROWS_WITH_AS(parse_corpus(mismatch), doctest::Contains("slot mismatch"), ValidationError);

  CHECK_THROWS_AS(parse_corpus("id: a\n"), ValidationError);
  std::string unterminated = kTwo;
  unterminated.resize(unterminated.rfind("```"));
  CHECK_THROWS_AS(parse_corpus(unterminated), ValidationError);
}

TEST_CASE("serialization round trip") {
  const Corpus c = parse_corpus(kTwo);
  REQUIRE(c.templates.size() == 2);
  const std::string s = serialize_corpus(c);
  CHECK(parse_corpus(s) == c);
  CHECK(serialize_corpus(parse_corpus(s)) == s);
  const std::string b = serialize_corpus(builtin_corpus());
  CHECK(parse_corpus(b) == builtin_corpus());
}

TEST_CASE("validate_corpus findings") {
  Corpus c = builtin_corpus();
  c.templates.erase(std::remove_if(c.templates.begin(), c.templates.end(),
                                   [](const PromptTemplate& t) { return t.id == "conquer.story"; }),
                    c.templates.end());
  CHECK(has_message(validate_corpus(c), "builtin pipeline references unknown template"));

  Corpus e = parse_corpus(kTwo);
  e.templates[1].body.clear();
  CHECK(has_message(validate_corpus(e), "empty body"));

  Corpus d = parse_corpus(kTwo);
  d.templates[1].id = "a";
  CHECK(has_message(validate_corpus(d), "duplicate id"));
}
