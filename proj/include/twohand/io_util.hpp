#pragma once

#include <string>

namespace twohand {

/// Writes to a temporary sibling file, then renames it over `path`.
/// Throws std::runtime_error on I/O failure.
void write_file_atomic(const std::string& path, const std::string& contents);

std::string read_file(const std::string& path);

}  // namespace twohand
