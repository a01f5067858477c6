#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace wde {

/// Writes to a temp file next to `path`, then renames over it.
void write_text_atomic(const std::filesystem::path& path, std::string_view content);

/// %.17g
std::string format_double(double x);

}  // namespace wde
