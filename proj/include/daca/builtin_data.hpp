#pragma once

#include <string_view>

namespace daca {

// Contents of a file shipped under data/, compiled into the library.
// Throws ConfigError for unknown names.
std::string_view builtin_file(std::string_view name);

}  // namespace daca
