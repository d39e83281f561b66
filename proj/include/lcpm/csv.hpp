#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace lcpm::csv {

// Minimal reader for comma-separated files with a mandatory header row.
// No quoting support: the trajectory formats handled here never quote.
// Lines starting with '#' before the header are collected as metadata
// (key=value), so a file can carry its recording-level scalars inline.
class Table {
 public:
  static Table read_file(const std::filesystem::path& path);
  static Table from_string(const std::string& text, const std::string& origin);

  const std::vector<std::string>& header() const { return header_; }
  std::size_t row_count() const { return rows_.size(); }

  // Index of a required column; throws SchemaError naming the column.
  std::size_t column(const std::string& name) const;
  bool has_column(const std::string& name) const;

  const std::string& cell(std::size_t row, std::size_t col) const {
    return rows_[row][col];
  }
  // Parses a cell as double/int; throws ParseError with the 1-based data
  // row number on malformed input.
  double cell_double(std::size_t row, std::size_t col) const;
  long long cell_int(std::size_t row, std::size_t col) const;

  const std::unordered_map<std::string, std::string>& metadata() const {
    return metadata_;
  }

 private:
  std::string origin_;
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::unordered_map<std::string, std::string> metadata_;
};

// Formats a double with enough digits to round-trip exactly.
std::string format_double(double value);

std::vector<std::string> split(const std::string& line, char sep);

// Writes `text` to `path` atomically: the data lands in `<path>.partial`
// first and is renamed on success, so interrupted writes never leave a
// well-named artifact behind.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& text);

}  // namespace lcpm::csv
