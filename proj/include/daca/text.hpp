#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Small text helpers shared by the corpus, filter, mocks and cost model.
namespace daca::text {

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);

// Number of Unicode scalar values in a UTF-8 string.
std::size_t utf8_length(std::string_view s);

// Lowercased word tokens. Separators are ASCII non-alphanumerics and the
// General Punctuation block (curly quotes, dashes); other non-ASCII code
// points are kept inside tokens.
std::vector<std::string> tokenize(std::string_view s);

// True if the token sequence of `phrase` occurs contiguously in the token
// sequence of `text`.
bool contains_phrase(const std::vector<std::string>& text_tokens,
                     const std::vector<std::string>& phrase_tokens);

// Case-insensitive search for `phrase` in `text` with word boundaries on both
// sides. Returns npos when absent.
std::size_t find_word_ci(std::string_view text, std::string_view phrase, std::size_t from = 0);

// Replaces every word-bounded, case-insensitive occurrence of `phrase`.
std::string replace_word_ci(std::string_view text, std::string_view phrase,
                            std::string_view replacement);

std::vector<std::string> split(std::string_view s, std::string_view sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

std::string capitalize(std::string_view s);

std::uint64_t fnv1a64(std::string_view s, std::uint64_t basis = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace daca::text
