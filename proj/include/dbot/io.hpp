#pragma once

#include "dbot/types.hpp"

#include <string>
#include <vector>

namespace dbot {

/// Comma-separated decimal literals, one matrix row per line, no header.
/// Ragged rows or unparseable fields raise ParseError with file:line:column.
Matrix read_matrix_csv(const std::string& path);

/// Histogram file: a single CSV line or one value per line (auto-detected).
/// "inf" is accepted for unbounded upper bounds.
Vector read_vector_csv(const std::string& path);

/// Integer ids, one per line or a single CSV line.
std::vector<int> read_labels_csv(const std::string& path);

/// 17 significant digits for round-trip fidelity.
void write_matrix_csv(const std::string& path, const Matrix& m);
void write_vector_csv(const std::string& path, const Vector& v);
void write_labels_csv(const std::string& path, const std::vector<int>& labels);

std::string format_double(double x);  // %.17g

}  // namespace dbot
