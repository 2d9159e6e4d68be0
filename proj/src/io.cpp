#include "nelson_tfd/io.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ntfd::io {

std::string format_number(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", value);
  return buf;
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

std::string hex64(std::uint64_t value) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

CsvFile::CsvFile(const std::string& path) : out_(path, std::ios::binary), path_(path) {
  if (!out_) throw std::runtime_error("cannot open " + path + " for writing");
}

CsvFile::~CsvFile() {
  if (out_.is_open()) out_.close();
}

void CsvFile::comment(const std::string& text) { out_ << "# " << text << "\n"; }

void CsvFile::header(const std::vector<std::string>& columns) { row(columns); }

void CsvFile::row(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    out_ << cells[i];
    if (i + 1 < cells.size()) out_ << ",";
  }
  out_ << "\n";
}

void CsvFile::numeric_row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_number(v));
  row(cells);
}

void CsvFile::close() {
  out_.close();
  if (out_.fail()) throw std::runtime_error("write failed: " + path_);
}

}  // namespace ntfd::io
