// SPDX-License-Identifier: Apache-2.0
#include <cstdint>

#include "row_ops.hpp"
#include "vagg/kernels.hpp"

namespace vagg::kernels::parallel {

namespace {

bool worth_threads(std::size_t work) { return work >= kParallelMinWork; }

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  const auto rows = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static) if (worth_threads(a.rows() * a.cols() * b.cols()))
  for (std::int64_t i = 0; i < rows; ++i)
    detail::matmul_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  Matrix c(a.cols(), b.cols());
  const auto rows = static_cast<std::int64_t>(a.cols());
#pragma omp parallel for schedule(static) if (worth_threads(a.rows() * a.cols() * b.cols()))
  for (std::int64_t i = 0; i < rows; ++i)
    detail::matmul_tn_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.rows());
  const auto rows = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static) if (worth_threads(a.rows() * a.cols() * b.rows()))
  for (std::int64_t i = 0; i < rows; ++i)
    detail::matmul_nt_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  const auto rows = static_cast<std::int64_t>(m.rows());
#pragma omp parallel for schedule(static) if (worth_threads(m.size() * 8))
  for (std::int64_t r = 0; r < rows; ++r) {
    const auto i = static_cast<std::size_t>(r);
    detail::softmax_row(m.row(i), out.row(i));
  }
  return out;
}

Matrix layer_norm(const Matrix& m, std::span<const double> gain,
                  std::span<const double> bias, double eps) {
  Matrix out(m.rows(), m.cols());
  const auto rows = static_cast<std::int64_t>(m.rows());
#pragma omp parallel for schedule(static) if (worth_threads(m.size() * 4))
  for (std::int64_t r = 0; r < rows; ++r) {
    const auto i = static_cast<std::size_t>(r);
    detail::layer_norm_row(m.row(i), gain, bias, eps, out.row(i));
  }
  return out;
}

}  // namespace vagg::kernels::parallel
