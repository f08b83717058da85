#ifndef EZRL_CSV_HPP
#define EZRL_CSV_HPP

#include <istream>
#include <string>
#include <vector>

namespace ezrl {

/// A parsed delimited text file: one header row plus data rows of raw cells.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t n_cols() const { return header.size(); }
  std::size_t n_rows() const { return rows.size(); }
};

/// Splits one line on the delimiter. No quoting rules; a trailing '\r' is
/// stripped so CRLF files parse cleanly.
std::vector<std::string> split_csv_line(const std::string& line, char delim = ',');

/// Reads a delimited table from a stream. The first nonempty line is the
/// header; every data row must have the same cell count. Throws
/// std::runtime_error on ragged rows or an empty stream.
CsvTable read_csv(std::istream& in, char delim = ',');

/// Reads a delimited table from a file path. Throws std::runtime_error if
/// the file cannot be opened.
CsvTable read_csv_file(const std::string& path, char delim = ',');

}  // namespace ezrl

#endif  // EZRL_CSV_HPP
