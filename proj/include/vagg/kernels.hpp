// SPDX-License-Identifier: Apache-2.0
//
// Row kernels in two flavours. `serial` is the reference; `parallel` splits
// rows across OpenMP threads. Every output element is produced by exactly one
// thread with the same accumulation order as the serial loop, so the two are
// bit-identical for any thread count. Kernels assume validated shapes; the
// checked entry points live in numkernel.hpp.
#pragma once

#include <span>

#include "vagg/matrix.hpp"

namespace vagg::kernels {

/// Below this many multiply-adds the parallel kernels stay on one thread.
inline constexpr std::size_t kParallelMinWork = 1u << 15;

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b);     // a * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a * b^T
Matrix softmax_rows(const Matrix& m);
Matrix layer_norm(const Matrix& m, std::span<const double> gain,
                  std::span<const double> bias, double eps);

}  // namespace serial

namespace parallel {

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix softmax_rows(const Matrix& m);
Matrix layer_norm(const Matrix& m, std::span<const double> gain,
                  std::span<const double> bias, double eps);

}  // namespace parallel

}  // namespace vagg::kernels
