#include "metanas/metrics.hpp"

#include <charconv>

#include "metanas/errors.hpp"

namespace metanas {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

CsvSink::CsvSink(const std::string& path, const std::vector<std::string>& columns)
    : path_(path), out_(path), columns_(columns.size()) {
  if (!out_) throw IoError("csv: cannot open " + path + " for writing");
  for (size_t i = 0; i < columns.size(); ++i) {
    if (i) out_ << ",";
    out_ << columns[i];
  }
  out_ << "\n";
  out_.flush();
  if (!out_) throw IoError("csv: write failed for " + path);
}

void CsvSink::append(const std::vector<std::string>& cells) {
  if (cells.size() != columns_) {
    throw Error("csv: row has " + std::to_string(cells.size()) + " cells, header has " +
                std::to_string(columns_));
  }
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out_ << ",";
    out_ << cells[i];
  }
  out_ << "\n";
  out_.flush();
  if (!out_) throw IoError("csv: write failed for " + path_);
}

}  // namespace metanas
