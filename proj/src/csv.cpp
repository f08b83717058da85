#include "ezrl/csv.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ezrl {

std::vector<std::string> split_csv_line(const std::string& line, char delim) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, delim)) cells.push_back(cell);
  if (!line.empty() && line.back() == delim) cells.emplace_back();
  if (!cells.empty() && !cells.back().empty() && cells.back().back() == '\r')
    cells.back().pop_back();
  return cells;
}

CsvTable read_csv(std::istream& in, char delim) {
  CsvTable table;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    if (table.header.empty()) {
      table.header = split_csv_line(line, delim);
      continue;
    }
    auto cells = split_csv_line(line, delim);
    if (cells.size() != table.header.size()) {
      throw std::runtime_error("read_csv: row with " + std::to_string(cells.size()) +
                               " cells, expected " + std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(cells));
  }
  if (table.header.empty()) throw std::runtime_error("read_csv: empty input");
  return table;
}

CsvTable read_csv_file(const std::string& path, char delim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_csv_file: cannot open " + path);
  return read_csv(in, delim);
}

}  // namespace ezrl
