#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "json.hpp"

namespace semileak {

std::string read_text(const std::filesystem::path& path);

// Writes to a sibling temp file, then renames over the target so readers
// never observe a partial file.
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

// Two-space indented dump with a trailing newline. Key order is the sorted
// order nlohmann::json uses, so equal documents give equal bytes.
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

}  // namespace semileak
