#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace mftg {

// 17 significant digits: enough to round-trip any double exactly, and stable
// across reruns so output files can be compared byte for byte.
std::string fmt17(double x);

std::string fmt_int(long long x);

// Line-oriented CSV with '\n' endings regardless of platform.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& cells);
  void close();

 private:
  std::ofstream out_;
  std::size_t width_;
};

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace mftg
