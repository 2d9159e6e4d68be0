#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace ntfd {

inline constexpr const char* kVersion = "0.1.0";

namespace io {

/// %.12g rendering; infinities print as "inf"/"-inf".
std::string format_number(double value);

/// FNV-1a 64-bit hash (used for config fingerprints in CSV metadata).
std::uint64_t fnv1a(const std::string& text);
std::string hex64(std::uint64_t value);

/// UTF-8 CSV with LF endings and '#'-prefixed comment rows.
class CsvFile {
 public:
  explicit CsvFile(const std::string& path);
  ~CsvFile();

  void comment(const std::string& text);
  void header(const std::vector<std::string>& columns);
  void row(const std::vector<std::string>& cells);
  void numeric_row(const std::vector<double>& values);
  void close();

 private:
  std::ofstream out_;
  std::string path_;
};

}  // namespace io
}  // namespace ntfd
