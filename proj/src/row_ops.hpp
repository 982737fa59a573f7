// SPDX-License-Identifier: Apache-2.0
//
// Per-row bodies shared by the serial and parallel kernels. Keeping a single
// definition is what makes the two flavours bit-identical.
#pragma once

#include <cmath>
#include <span>

#include "vagg/matrix.hpp"

namespace vagg::kernels::detail {

// c.row(i) = a.row(i) * b, accumulated over p ascending.
inline void matmul_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  const std::size_t n = b.cols();
  double* out = c.data() + i * n;
  for (std::size_t p = 0; p < a.cols(); ++p) {
    const double aip = a(i, p);
    const double* brow = b.data() + p * n;
    for (std::size_t j = 0; j < n; ++j) out[j] += aip * brow[j];
  }
}

// c.row(i) = (a^T).row(i) * b, accumulated over p ascending.
inline void matmul_tn_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  const std::size_t n = b.cols();
  double* out = c.data() + i * n;
  for (std::size_t p = 0; p < a.rows(); ++p) {
    const double api = a(p, i);
    const double* brow = b.data() + p * n;
    for (std::size_t j = 0; j < n; ++j) out[j] += api * brow[j];
  }
}

// c.row(i) = a.row(i) * b^T.
inline void matmul_nt_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
  const double* arow = a.data() + i * a.cols();
  for (std::size_t j = 0; j < b.rows(); ++j) {
    const double* brow = b.data() + j * b.cols();
    double acc = 0.0;
    for (std::size_t p = 0; p < a.cols(); ++p) acc += arow[p] * brow[p];
    c(i, j) = acc;
  }
}

inline void softmax_row(std::span<const double> in, std::span<double> out) {
  double mx = in[0];
  for (double v : in) mx = v > mx ? v : mx;
  double sum = 0.0;
  for (std::size_t j = 0; j < in.size(); ++j) {
    out[j] = std::exp(in[j] - mx);
    sum += out[j];
  }
  const double inv = 1.0 / sum;
  for (double& v : out) v *= inv;
}

struct RowMoments {
  double mean;
  double rstd;
};

// Population variance, eps inside the square root.
inline RowMoments row_moments(std::span<const double> x, double eps) {
  const double d = static_cast<double>(x.size());
  double sum = 0.0;
  for (double v : x) sum += v;
  const double mean = sum / d;
  double sq = 0.0;
  for (double v : x) sq += (v - mean) * (v - mean);
  return {mean, 1.0 / std::sqrt(sq / d + eps)};
}

inline void layer_norm_row(std::span<const double> x, std::span<const double> gain,
                           std::span<const double> bias, double eps,
                           std::span<double> out) {
  const RowMoments mo = row_moments(x, eps);
  for (std::size_t j = 0; j < x.size(); ++j)
    out[j] = (x[j] - mo.mean) * mo.rstd * gain[j] + bias[j];
}

}  // namespace vagg::kernels::detail
