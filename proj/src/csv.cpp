#include "covest/csv.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "covest/errors.hpp"

namespace covest::csv {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    out << cells[i];
  }
  out << '\n';
}

std::size_t Table::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error(ErrorCode::IoError, "CSV column '" + name + "' not found");
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    cells.push_back(cell);
  }
  return cells;
}

}  // namespace

double parse_double(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::IoError, "cannot parse number '" + s + "'");
  }
}

long parse_index(const std::string& s) {
  try {
    std::size_t used = 0;
    const long v = std::stol(s, &used);
    if (used != s.size() || v < 1) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::IoError, "cannot parse 1-based index '" + s + "'");
  }
}

Table read(std::istream& in) {
  Table t;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    auto cells = split(line);
    if (!have_header) {
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw Error(ErrorCode::IoError, "CSV row width does not match header: " + line);
    }
    t.rows.push_back(std::move(cells));
  }
  if (!have_header) throw Error(ErrorCode::IoError, "CSV input is empty");
  return t;
}

void write_complex_matrix(std::ostream& out, const CMatrix& m) {
  write_row(out, {"row", "col", "re", "im"});
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      write_row(out, {std::to_string(i + 1), std::to_string(j + 1), format_double(m(i, j).real()),
                      format_double(m(i, j).imag())});
    }
  }
}

CMatrix read_complex_matrix(std::istream& in) {
  const Table t = read(in);
  const std::size_t ri = t.column("row"), ci = t.column("col"), re = t.column("re"),
                    im = t.column("im");
  Eigen::Index rows = 0, cols = 0;
  for (const auto& r : t.rows) {
    rows = std::max<Eigen::Index>(rows, static_cast<Eigen::Index>(parse_index(r[ri])));
    cols = std::max<Eigen::Index>(cols, static_cast<Eigen::Index>(parse_index(r[ci])));
  }
  if (rows < 1 || cols < 1 || static_cast<std::size_t>(rows * cols) != t.rows.size()) {
    throw Error(ErrorCode::IoError, "complex matrix CSV is not a dense rows x cols listing");
  }
  CMatrix m(rows, cols);
  for (const auto& r : t.rows) {
    const auto i = static_cast<Eigen::Index>(parse_index(r[ri])) - 1;
    const auto j = static_cast<Eigen::Index>(parse_index(r[ci])) - 1;
    if (i < 0 || j < 0) throw Error(ErrorCode::IoError, "indices are 1-based");
    m(i, j) = Complex(parse_double(r[re]), parse_double(r[im]));
  }
  return m;
}

}  // namespace covest::csv
