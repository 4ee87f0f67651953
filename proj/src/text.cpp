#include "daca/text.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>

namespace daca::text {

namespace {

struct CodePoint {
  char32_t value;
  std::size_t width;
};

CodePoint decode_at(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> char32_t {
    if (i + k >= s.size()) return 0;
    return static_cast<unsigned char>(s[i + k]) & 0x3F;
  };
  if (b0 < 0x80) return {b0, 1};
  if ((b0 & 0xE0) == 0xC0) return {static_cast<char32_t>(((b0 & 0x1F) << 6) | cont(1)), 2};
  if ((b0 & 0xF0) == 0xE0)
    return {static_cast<char32_t>(((b0 & 0x0F) << 12) | (cont(1) << 6) | cont(2)), 3};
  if ((b0 & 0xF8) == 0xF0)
    return {static_cast<char32_t>(((b0 & 0x07) << 18) | (cont(1) << 12) | (cont(2) << 6) | cont(3)),
            4};
  return {0xFFFD, 1};
}

bool is_word_cp(char32_t c) {
  if (c < 0x80) return std::isalnum(static_cast<int>(c)) != 0;
  if (c >= 0x2000 && c <= 0x206F) return false;  // general punctuation
  if (c == 0x00A0 || c == 0x3000 || c == 0xFEFF) return false;
  return true;
}

// Word-ness of the code point ending just before byte offset `pos`.
bool word_before(std::string_view s, std::size_t pos) {
  if (pos == 0) return false;
  std::size_t start = pos - 1;
  while (start > 0 && (static_cast<unsigned char>(s[start]) & 0xC0) == 0x80) --start;
  return is_word_cp(decode_at(s, start).value);
}

bool word_at(std::string_view s, std::size_t pos) {
  if (pos >= s.size()) return false;
  return is_word_cp(decode_at(s, pos).value);
}

}  // namespace

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return out;
}

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::size_t utf8_length(std::string_view s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> tokens;
  std::string current;
  for (std::size_t i = 0; i < s.size();) {
    const auto cp = decode_at(s, i);
    if (is_word_cp(cp.value)) {
      for (std::size_t k = 0; k < cp.width && i + k < s.size(); ++k) {
        current.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(s[i + k]))));
      }
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
    i += cp.width;
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

bool contains_phrase(const std::vector<std::string>& text_tokens,
                     const std::vector<std::string>& phrase_tokens) {
  if (phrase_tokens.empty()) return false;
  return std::search(text_tokens.begin(), text_tokens.end(), phrase_tokens.begin(),
                     phrase_tokens.end()) != text_tokens.end();
}

std::size_t find_word_ci(std::string_view text, std::string_view phrase, std::size_t from) {
  if (phrase.empty()) return std::string_view::npos;
  const std::string hay = to_lower(text);
  const std::string needle = to_lower(phrase);
  for (std::size_t pos = hay.find(needle, from); pos != std::string::npos;
       pos = hay.find(needle, pos + 1)) {
    const bool left_ok = !word_at(needle, 0) || !word_before(text, pos);
    const std::size_t end = pos + needle.size();
    const bool right_ok = !word_before(needle, needle.size()) || !word_at(text, end);
    if (left_ok && right_ok) return pos;
  }
  return std::string_view::npos;
}

std::string replace_word_ci(std::string_view text, std::string_view phrase,
                            std::string_view replacement) {
  std::string out;
  std::size_t cursor = 0;
  for (std::size_t pos = find_word_ci(text, phrase, 0); pos != std::string_view::npos;
       pos = find_word_ci(text, phrase, cursor)) {
    out.append(text.substr(cursor, pos - cursor));
    out.append(replacement);
    cursor = pos + phrase.size();
  }
  out.append(text.substr(cursor));
  return out;
}

std::vector<std::string> split(std::string_view s, std::string_view sep) {
  std::vector<std::string> parts;
  if (sep.empty()) {
    parts.emplace_back(s);
    return parts;
  }
  std::size_t start = 0;
  for (std::size_t pos = s.find(sep); pos != std::string_view::npos; pos = s.find(sep, start)) {
    parts.emplace_back(s.substr(start, pos - start));
    start = pos + sep.size();
  }
  parts.emplace_back(s.substr(start));
  return parts;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out.append(sep);
    out.append(parts[i]);
  }
  return out;
}

std::string capitalize(std::string_view s) {
  std::string out(s);
  if (!out.empty()) out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out;
}

std::uint64_t fnv1a64(std::string_view s, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace daca::text
