#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace daca {

enum class Category { discriminatory, inappropriate, character_copyright, artistic_copyright };

inline constexpr Category kAllCategories[] = {Category::discriminatory, Category::inappropriate,
                                              Category::character_copyright, Category::artistic_copyright};

std::string_view to_string(Category c);
Category parse_category(std::string_view s);
bool is_copyright(Category c);

struct SensitivePrompt {
  std::string id;
  Category category = Category::discriminatory;
  std::string text;
  // Name of a copyrighted character; derived from the text when absent.
  std::optional<std::string> subject;
};

// "Please draw X for me." -> "X"; otherwise the trimmed text.
std::string derive_subject(std::string_view text);

// JSONL records {id, category, text[, subject]}. An empty file yields an
// empty list and sets `warning`.
std::vector<SensitivePrompt> parse_dataset(std::string_view jsonl, std::string* warning = nullptr);
std::vector<SensitivePrompt> load_dataset(const std::string& path, std::string* warning = nullptr);
std::vector<SensitivePrompt> builtin_dataset();

}  // namespace daca
