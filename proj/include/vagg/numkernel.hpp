// SPDX-License-Identifier: Apache-2.0
//
// Checked dense primitives and their closed-form backward rules. All
// functions are pure; the forward ops dispatch to the OpenMP kernels.
#pragma once

#include <span>
#include <vector>

#include "vagg/matrix.hpp"

namespace vagg {

inline constexpr double kLayerNormEps = 1e-5;

Matrix matmul(const Matrix& a, const Matrix& b);
/// a^T * b without materialising the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a * b^T without materialising the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& m);

/// Per-row standardisation (population variance, eps under the root), then
/// `gain * x_hat + bias`.
Matrix layer_norm(const Matrix& m, std::span<const double> gain,
                  std::span<const double> bias, double eps = kLayerNormEps);

struct MatmulGrads {
  Matrix da;
  Matrix db;
};

/// Gradients of `a * b` given dL/d(a*b).
MatmulGrads matmul_grad(const Matrix& a, const Matrix& b, const Matrix& upstream);

/// Gradient w.r.t. the softmax input. Takes the forward *output* `probs`.
Matrix softmax_rows_grad(const Matrix& probs, const Matrix& upstream);

struct LayerNormGrads {
  Matrix dx;
  std::vector<double> dgain;
  std::vector<double> dbias;
};

/// Gradients of layer_norm(x, gain, ., eps). The bias value is not needed.
LayerNormGrads layer_norm_grad(const Matrix& x, std::span<const double> gain,
                               const Matrix& upstream, double eps = kLayerNormEps);

/// m.row(r) += v for every row.
void add_row_vector(Matrix& m, std::span<const double> v);

/// Column sums accumulated in row order.
std::vector<double> column_sums(const Matrix& m);

}  // namespace vagg
