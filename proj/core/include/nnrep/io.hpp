#pragma once

#include <string>

namespace nnrep {

std::string read_text_file(const std::string& path);

// Writes to a sibling temporary file and renames it over `path`, so readers
// never observe a partially written file.
void write_text_file_atomic(const std::string& path, const std::string& content);

// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

}  // namespace nnrep
