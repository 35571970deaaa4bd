#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace metanas {

// Locale-independent shortest round-trip decimal form.
std::string format_double(double v);

// Append-only CSV sink: header written once at open, one flush per row.
// Single writer per sink by contract.
class CsvSink {
 public:
  CsvSink(const std::string& path, const std::vector<std::string>& columns);
  void append(const std::vector<std::string>& cells);
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  size_t columns_;
};

}  // namespace metanas
