#include "ridgelab/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ridgelab/errors.hpp"

namespace ridgelab::csv {

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::string real(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.12g", v == 0.0 ? 0.0 : v);  // no "-0"
  return buf;
}

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw ParseError(source + ": missing column '" + name + "'");
}

const std::string& Table::at(std::size_t row, const std::string& name) const {
  return rows.at(row).at(column(name));
}

double Table::real_at(std::size_t row, const std::string& name) const {
  const std::string& s = at(row, name);
  if (s.empty()) return std::nan("");
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ParseError(source + ":" + std::to_string(row + 2) + ": '" + s + "' is not a number");
}

long long Table::int_at(std::size_t row, const std::string& name) const {
  const std::string& s = at(row, name);
  long long v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ParseError(source + ":" + std::to_string(row + 2) + ": '" + s + "' is not an integer");
  }
  return v;
}

void write(const std::filesystem::path& path, const Table& table) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out << ',';
      out << cells[i];
    }
    out << '\n';
  };
  line(table.header);
  for (const auto& r : table.rows) {
    RIDGELAB_REQUIRE(r.size() == table.header.size(), "csv::write: row width differs from header");
    line(r);
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

Table read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing input file: " + path.string());
  Table t;
  t.source = path.string();
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1) {
      t.header = split(line);
      continue;
    }
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.header.size()) {
      throw ParseError(t.source + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(t.header.size()) + " cells, found " + std::to_string(cells.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  if (lineno == 0) throw ParseError(t.source + ":1: empty file, expected a header");
  return t;
}

}  // namespace ridgelab::csv
