#pragma once

#include <filesystem>
#include <string>

namespace fregan {

// Whole-file read; throws NotFoundError when the path does not exist.
std::string read_file_bytes(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`, so readers
// never observe a partially written artifact.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

} // namespace fregan
