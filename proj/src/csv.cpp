#include "lcpm/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lcpm/errors.hpp"

namespace lcpm::csv {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

namespace {

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

Table Table::read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot open file: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_string(buf.str(), path.string());
}

Table Table::from_string(const std::string& text, const std::string& origin) {
  Table t;
  t.origin_ = origin;
  std::istringstream in(text);
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    line = strip_cr(line);
    if (!have_header) {
      if (line.empty()) continue;
      if (line[0] == '#') {
        std::string meta = line.substr(1);
        auto eq = meta.find('=');
        if (eq != std::string::npos) {
          auto key = meta.substr(0, eq);
          auto ltrim = key.find_first_not_of(' ');
          auto rtrim = key.find_last_not_of(' ');
          if (ltrim != std::string::npos) {
            t.metadata_[key.substr(ltrim, rtrim - ltrim + 1)] =
                meta.substr(eq + 1);
          }
        }
        continue;
      }
      t.header_ = split(line, ',');
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    auto cells = split(line, ',');
    cells.resize(t.header_.size());
    t.rows_.push_back(std::move(cells));
  }
  if (!have_header) {
    throw SchemaError("no header row in " + origin);
  }
  return t;
}

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  throw SchemaError("missing column '" + name + "' in " + origin_);
}

bool Table::has_column(const std::string& name) const {
  for (const auto& h : header_) {
    if (h == name) return true;
  }
  return false;
}

double Table::cell_double(std::size_t row, std::size_t col) const {
  const std::string& s = rows_[row][col];
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError("non-numeric cell '" + s + "' at data row " +
                     std::to_string(row + 1) + " of " + origin_);
  }
  return value;
}

long long Table::cell_int(std::size_t row, std::size_t col) const {
  const std::string& s = rows_[row][col];
  long long value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    // Tolerate integral values written as "12.0".
    double d = cell_double(row, col);
    auto rounded = static_cast<long long>(d);
    if (static_cast<double>(rounded) != d) {
      throw ParseError("non-integer cell '" + s + "' at data row " +
                       std::to_string(row + 1) + " of " + origin_);
    }
    return rounded;
  }
  return value;
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& text) {
  std::filesystem::path partial = path;
  partial += ".partial";
  {
    std::ofstream out(partial, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw IoError("cannot write file: " + partial.string());
    }
    out << text;
    if (!out) {
      throw IoError("write failed: " + partial.string());
    }
  }
  std::filesystem::rename(partial, path);
}

}  // namespace lcpm::csv
