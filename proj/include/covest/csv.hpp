#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "covest/hermitian.hpp"

namespace covest::csv {

/// Shortest round-trippable text for a double, at most 17 significant digits.
std::string format_double(double value);

/// Comma-joined row terminated by '\n'.
void write_row(std::ostream& out, const std::vector<std::string>& cells);

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws IoError if missing.
  std::size_t column(const std::string& name) const;
};

Table read(std::istream& in);

/// Whole-cell parses; throw IoError on malformed input.
double parse_double(const std::string& s);
long parse_index(const std::string& s);

/// Complex matrix as `row,col,re,im` with 1-based indices.
void write_complex_matrix(std::ostream& out, const CMatrix& m);
CMatrix read_complex_matrix(std::istream& in);

}  // namespace covest::csv
