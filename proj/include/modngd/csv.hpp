#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace modngd {

// 17 significant digits: enough for bitwise round-trip of any double.
std::string format_double(double v);

double parse_double(const std::string& s);
long long parse_int(const std::string& s);
bool parse_bool(const std::string& s);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a named column; throws ReportError when absent.
  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::filesystem::path& path);

// Streams rows with LF line endings; file is opened on construction.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header);
  void write_row(const std::vector<std::string>& cells);

 private:
  std::ofstream out_;
};

}  // namespace modngd
