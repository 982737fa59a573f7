// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cmath>

#include "row_ops.hpp"
#include "vagg/kernels.hpp"

namespace vagg::kernels::serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) detail::matmul_row(a, b, c, i);
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  Matrix c(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i) detail::matmul_tn_row(a, b, c, i);
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) detail::matmul_nt_row(a, b, c, i);
  return c;
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    detail::softmax_row(m.row(r), out.row(r));
  return out;
}

Matrix layer_norm(const Matrix& m, std::span<const double> gain,
                  std::span<const double> bias, double eps) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    detail::layer_norm_row(m.row(r), gain, bias, eps, out.row(r));
  return out;
}

}  // namespace vagg::kernels::serial
