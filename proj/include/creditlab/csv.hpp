#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "creditlab/common.hpp"

namespace creditlab {

// Shortest round-trip fixed decimal form, '.' separator, deterministic.
inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::fixed);
  (void)ec;
  return std::string(buf, ptr);
}

inline std::string format_number(std::int64_t v) { return std::to_string(v); }

// Money totals are reported in whole currency units.
inline std::int64_t round_money(double v) { return static_cast<std::int64_t>(std::llround(v)); }

// Minimal CSV writer: comma separator, '\n' rows, missing numerics as empty
// cells. Values in this project never contain commas or quotes.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw DataError("cannot open for writing: " + path);
    columns_ = header.size();
    write_row_strings(header);
  }

  void field(std::string_view s) { row_.emplace_back(s); }
  void field(double v) { row_.push_back(is_missing(v) ? std::string() : format_number(v)); }
  void field(std::int64_t v) { row_.push_back(std::to_string(v)); }
  void field(int v) { row_.push_back(std::to_string(v)); }

  void end_row() {
    if (row_.size() != columns_)
      throw DomainError("csv row width " + std::to_string(row_.size()) + " != header width " +
                        std::to_string(columns_));
    write_row_strings(row_);
    row_.clear();
  }

  void close() { out_.close(); }

 private:
  void write_row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_.put(',');
      out_.write(cells[i].data(), static_cast<std::streamsize>(cells[i].size()));
    }
    out_.put('\n');
  }

  std::ofstream out_;
  std::size_t columns_ = 0;
  std::vector<std::string> row_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw DataError("csv column not found: " + std::string(name));
  }
};

CsvTable read_csv(const std::string& path);

inline double parse_cell_number(std::string_view cell, const std::string& where) {
  if (cell.empty()) return missing_value();
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    throw DataError("bad numeric cell '" + std::string(cell) + "' in " + where);
  return v;
}

inline std::int64_t parse_cell_int(std::string_view cell, const std::string& where) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (ec != std::errc() || ptr != cell.data() + cell.size())
    throw DataError("bad integer cell '" + std::string(cell) + "' in " + where);
  return v;
}

}  // namespace creditlab
