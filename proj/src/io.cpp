#include "dbot/io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dbot {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

double parse_field(const std::string& field, const std::string& path, size_t line,
                   size_t column) {
  const std::string t = trim(field);
  if (t == "inf" || t == "Inf" || t == "INF" || t == "+inf") return kUnbounded;
  try {
    size_t consumed = 0;
    const double value = std::stod(t, &consumed);
    if (consumed != t.size()) throw std::invalid_argument(t);
    return value;
  } catch (const std::exception&) {
    throw ParseError(path + ":" + std::to_string(line) + ":" + std::to_string(column) +
                     ": cannot parse '" + t + "' as a number");
  }
}

std::vector<std::vector<double>> read_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");
  std::vector<std::vector<double>> rows;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string field;
    size_t column = 0;
    while (std::getline(ss, field, ',')) {
      ++column;
      row.push_back(parse_field(field, path, lineno, column));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError(path + ": file has no data rows");
  return rows;
}

}  // namespace

Matrix read_matrix_csv(const std::string& path) {
  const auto rows = read_rows(path);
  const size_t width = rows.front().size();
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(width));
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != width) {
      throw ParseError(path + ":" + std::to_string(i + 1) + ": row has " +
                       std::to_string(rows[i].size()) + " fields, expected " +
                       std::to_string(width));
    }
    for (size_t j = 0; j < width; ++j) m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  }
  return m;
}

Vector read_vector_csv(const std::string& path) {
  const Matrix m = read_matrix_csv(path);
  if (m.rows() == 1) return m.row(0).transpose();
  if (m.cols() == 1) return m.col(0);
  throw ParseError(path + ": expected a single row or a single column");
}

std::vector<int> read_labels_csv(const std::string& path) {
  const Vector v = read_vector_csv(path);
  std::vector<int> labels(static_cast<size_t>(v.size()));
  for (Index i = 0; i < v.size(); ++i) {
    const double x = v[i];
    if (!std::isfinite(x) || x != std::floor(x)) {
      throw ParseError(path + ": label at position " + std::to_string(i + 1) +
                       " is not an integer");
    }
    labels[static_cast<size_t>(i)] = static_cast<int>(x);
  }
  return labels;
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw DbotError(path + ": cannot open for writing");
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

void write_vector_csv(const std::string& path, const Vector& v) {
  write_matrix_csv(path, v.transpose());
}

void write_labels_csv(const std::string& path, const std::vector<int>& labels) {
  std::ofstream out(path);
  if (!out) throw DbotError(path + ": cannot open for writing");
  for (int y : labels) out << y << '\n';
}

}  // namespace dbot
