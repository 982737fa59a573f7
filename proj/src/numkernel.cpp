// SPDX-License-Identifier: Apache-2.0
#include "vagg/numkernel.hpp"

#include <cmath>
#include <string>

#include "row_ops.hpp"
#include "vagg/errors.hpp"
#include "vagg/kernels.hpp"

namespace vagg {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void require(bool ok, const char* op, const std::string& detail) {
  if (!ok) throw ShapeError(std::string(op) + ": " + detail);
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), op,
          shape_str(a) + " vs " + shape_str(b));
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.rows(), "matmul", shape_str(a) + " * " + shape_str(b));
  return kernels::parallel::matmul(a, b);
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  require(a.rows() == b.rows(), "matmul_tn", shape_str(a) + "^T * " + shape_str(b));
  return kernels::parallel::matmul_tn(a, b);
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  require(a.cols() == b.cols(), "matmul_nt", shape_str(a) + " * " + shape_str(b) + "^T");
  return kernels::parallel::matmul_nt(a, b);
}

Matrix softmax_rows(const Matrix& m) {
  require(m.cols() > 0, "softmax_rows", "empty rows");
  return kernels::parallel::softmax_rows(m);
}

Matrix layer_norm(const Matrix& m, std::span<const double> gain,
                  std::span<const double> bias, double eps) {
  require(gain.size() == m.cols() && bias.size() == m.cols(), "layer_norm",
          "gain/bias length " + std::to_string(gain.size()) + "/" +
              std::to_string(bias.size()) + " for " + shape_str(m));
  if (!(eps > 0.0)) throw ValidationError("layer_norm: eps must be positive");
  return kernels::parallel::layer_norm(m, gain, bias, eps);
}

MatmulGrads matmul_grad(const Matrix& a, const Matrix& b, const Matrix& upstream) {
  require(a.cols() == b.rows(), "matmul_grad", shape_str(a) + " * " + shape_str(b));
  require(upstream.rows() == a.rows() && upstream.cols() == b.cols(), "matmul_grad",
          "upstream " + shape_str(upstream));
  return {matmul_nt(upstream, b), matmul_tn(a, upstream)};
}

Matrix softmax_rows_grad(const Matrix& probs, const Matrix& upstream) {
  require_same_shape(probs, upstream, "softmax_rows_grad");
  Matrix dx(probs.rows(), probs.cols());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    auto p = probs.row(r);
    auto g = upstream.row(r);
    double dot = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) dot += p[j] * g[j];
    for (std::size_t j = 0; j < p.size(); ++j) dx(r, j) = p[j] * (g[j] - dot);
  }
  return dx;
}

LayerNormGrads layer_norm_grad(const Matrix& x, std::span<const double> gain,
                               const Matrix& upstream, double eps) {
  require_same_shape(x, upstream, "layer_norm_grad");
  require(gain.size() == x.cols(), "layer_norm_grad", "gain length");
  const std::size_t d = x.cols();
  const double inv_d = 1.0 / static_cast<double>(d);
  LayerNormGrads g{Matrix(x.rows(), d), std::vector<double>(d, 0.0),
                   std::vector<double>(d, 0.0)};
  std::vector<double> xhat(d), dxhat(d);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto mo = kernels::detail::row_moments(x.row(r), eps);
    double sum_dxhat = 0.0;
    double sum_dxhat_xhat = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      xhat[j] = (x(r, j) - mo.mean) * mo.rstd;
      dxhat[j] = upstream(r, j) * gain[j];
      sum_dxhat += dxhat[j];
      sum_dxhat_xhat += dxhat[j] * xhat[j];
      g.dgain[j] += upstream(r, j) * xhat[j];
      g.dbias[j] += upstream(r, j);
    }
    for (std::size_t j = 0; j < d; ++j) {
      g.dx(r, j) = mo.rstd * (dxhat[j] - sum_dxhat * inv_d - xhat[j] * sum_dxhat_xhat * inv_d);
    }
  }
  return g;
}

void add_row_vector(Matrix& m, std::span<const double> v) {
  require(v.size() == m.cols(), "add_row_vector", "vector length");
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t j = 0; j < v.size(); ++j) row[j] += v[j];
  }
}

std::vector<double> column_sums(const Matrix& m) {
  std::vector<double> s(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t j = 0; j < m.cols(); ++j) s[j] += m(r, j);
  return s;
}

}  // namespace vagg
