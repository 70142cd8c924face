#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace lungcam {

/// Writes `contents` to a sibling temp file and renames it over `path`, so a
/// reader never observes a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// Creates `dir` (and parents) if missing; throws IoError on failure.
void ensure_directory(const std::filesystem::path& dir);

}  // namespace lungcam
