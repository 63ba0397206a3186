#pragma once

#include "dbot/types.hpp"

#include <cmath>
#include <limits>

namespace dbot {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

inline double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

/// log sum_k exp(x_k) over one matrix row; all-(-inf) rows stay -inf.
inline double lse_row(const Matrix& x, Index i) {
  const double mx = x.row(i).maxCoeff();
  if (!(mx > kNegInf)) return kNegInf;
  double s = 0.0;
  for (Index j = 0; j < x.cols(); ++j) s += std::exp(x(i, j) - mx);
  return mx + std::log(s);
}

inline double lse_col(const Matrix& x, Index j) {
  const double mx = x.col(j).maxCoeff();
  if (!(mx > kNegInf)) return kNegInf;
  double s = 0.0;
  for (Index i = 0; i < x.rows(); ++i) s += std::exp(x(i, j) - mx);
  return mx + std::log(s);
}

inline Vector lse_rows(const Matrix& x) {
  Vector out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) out[i] = lse_row(x, i);
  return out;
}

inline Vector lse_cols(const Matrix& x) {
  Vector out(x.cols());
  for (Index j = 0; j < x.cols(); ++j) out[j] = lse_col(x, j);
  return out;
}

}  // namespace dbot
