#include "creditlab/csv.hpp"

#include <sstream>

namespace creditlab {

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open for reading: " + path);
  CsvTable table;
  std::string line;
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = s.find(',', start);
      if (comma == std::string::npos) {
        cells.push_back(s.substr(start));
        break;
      }
      cells.push_back(s.substr(start, comma - start));
      start = comma + 1;
    }
    return cells;
  };
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && in.eof()) break;
    auto cells = split(line);
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != table.header.size())
        throw DataError("ragged csv row in " + path);
      table.rows.push_back(std::move(cells));
    }
  }
  if (first) throw DataError("empty csv: " + path);
  return table;
}

}  // namespace creditlab
