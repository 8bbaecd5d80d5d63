#pragma once

#include <filesystem>
#include <string>
#include <vector>

// Minimal comma-separated tables. Cells never contain commas or quotes here,
// so there is no quoting.
namespace ridgelab::csv {

// Shortest-stable text for a real: 12 significant digits; NaN becomes an empty cell.
std::string real(double v);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a header column; throws ParseError naming `source` if absent.
  std::size_t column(const std::string& name) const;
  double real_at(std::size_t row, const std::string& name) const;
  long long int_at(std::size_t row, const std::string& name) const;
  const std::string& at(std::size_t row, const std::string& name) const;

  std::string source;  // file name for error messages
};

// Writes header + rows, '\n' line endings. Throws on I/O failure.
void write(const std::filesystem::path& path, const Table& table);

// Throws std::runtime_error naming the file if it cannot be opened, and
// ParseError with "file:line" on ragged rows.
Table read(const std::filesystem::path& path);

}  // namespace ridgelab::csv
