// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "vagg/errors.hpp"
#include "vagg/gradcheck.hpp"
#include "vagg/kernels.hpp"
#include "vagg/numkernel.hpp"

using namespace vagg;

TEST_CASE("matmul hand cases") {
  const Matrix x{{1, 2}, {3, 4}};
  CHECK(matmul(Matrix::identity(2), x) == x);
  CHECK(matmul(Matrix{{1, 0}, {0, 0}}, Matrix{{5, 6}, {7, 8}}) == Matrix{{5, 6}, {0, 0}});
}

TEST_CASE("matmul matches the triple loop exactly") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix a = oracle::random_matrix(3, 4, rng), b = oracle::random_matrix(4, 2, rng);
    CHECK(matmul(a, b) == oracle::matmul(a, b));
    CHECK(matmul_tn(a.transposed(), b) == oracle::matmul(a, b));
    CHECK(matmul_nt(a, b.transposed()) == oracle::matmul(a, b));
  }
}

TEST_CASE("matmul shape errors") {
  CHECK_THROWS_AS(matmul(Matrix(2, 3), Matrix(2, 3)), ShapeError);
  CHECK_THROWS_AS(matmul_tn(Matrix(2, 3), Matrix(3, 3)), ShapeError);
  CHECK_THROWS_AS(matmul_nt(Matrix(2, 3), Matrix(2, 2)), ShapeError);
  CHECK_THROWS_AS(Matrix(2, 2, std::vector<double>(3)), ShapeError);
}

TEST_CASE("softmax hand cases") {
  const Matrix a = softmax_rows(Matrix{{1, 1, 1}});
  for (double v : a.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  const Matrix b = softmax_rows(Matrix{{0, std::log(3.0)}});
  CHECK(std::abs(b(0, 0) - 0.25) < 1e-15);
  CHECK(std::abs(b(0, 1) - 0.75) < 1e-15);
  const Matrix c = softmax_rows(Matrix{{1000, 1000}});
  CHECK(c(0, 0) == 0.5);
  CHECK(c(0, 1) == 0.5);
}

TEST_CASE("softmax rows are stochastic and shift invariant") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> shift(-50, 50);
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix x = oracle::random_matrix(3, 5, rng, 3.0);
    const Matrix p = softmax_rows(x);
    for (std::size_t r = 0; r < p.rows(); ++r) {
      double s = 0.0;
      for (double v : p.row(r)) {
        CHECK(v > 0.0);
        CHECK(v <= 1.0);
        s += v;
      }
      CHECK(std::abs(s - 1.0) < 1e-12);
    }
    Matrix y = x;
    const double c = shift(rng);
    for (double& v : y.values()) v += c;
    CHECK(max_abs_diff(softmax_rows(y), p) < 1e-12);
  }
}

TEST_CASE("layer norm hand cases") {
  const std::vector<double> ones4(4, 1.0), zeros4(4, 0.0);
  CHECK(layer_norm(Matrix{{5, 5, 5, 5}}, ones4, zeros4) == Matrix{{0, 0, 0, 0}});

  const std::vector<double> ones2(2, 1.0), zeros2(2, 0.0);
  const Matrix y = layer_norm(Matrix{{1, -1}}, ones2, zeros2, 1e-12);
  CHECK(std::abs(y(0, 0) - 1.0) < 1e-11);
  CHECK(std::abs(y(0, 1) + 1.0) < 1e-11);

  const std::vector<double> gain0(3, 0.0), bias{2.5, 2.5, 2.5};
  CHECK(layer_norm(Matrix{{1, 7, -3}}, gain0, bias) == Matrix{{2.5, 2.5, 2.5}});
  CHECK_THROWS_AS(layer_norm(Matrix{{1, 2}}, ones4, zeros2), ShapeError);
}

TEST_CASE("layer norm moments") {
  std::mt19937_64 rng(3);
  const std::vector<double> ones(16, 1.0), zeros(16, 0.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix x = oracle::random_matrix(4, 16, rng, 5.0);
    const Matrix y = layer_norm(x, ones, zeros);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double xm = 0.0, xv = 0.0;
      for (double v : x.row(r)) xm += v;
      xm /= 16.0;
      for (double v : x.row(r)) xv += (v - xm) * (v - xm);
      xv /= 16.0;
      double mean = 0.0, var = 0.0;
      for (double v : y.row(r)) mean += v;
      mean /= 16.0;
      for (double v : y.row(r)) var += (v - mean) * (v - mean);
      var /= 16.0;
      CHECK(std::abs(mean) <= 1e-10);
      // eps shrinks the output variance to var / (var + eps)
      CHECK(std::abs(var - xv / (xv + 1e-5)) < 1e-12);
    }
  }
}

TEST_CASE("backward hand cases") {
  const Matrix a{{1, 2}, {3, 4}, {5, 6}}, b{{1, -1, 2}, {0, 3, 1}};
  const MatmulGrads g = matmul_grad(a, b, Matrix(3, 3, 1.0));
  CHECK(g.da == matmul(Matrix(3, 3, 1.0), b.transposed()));
  CHECK(g.db == matmul(a.transposed(), Matrix(3, 3, 1.0)));

  const Matrix probs = softmax_rows(Matrix{{1, 1}});
  CHECK(softmax_rows_grad(probs, Matrix{{1, 1}}) == Matrix{{0, 0}});

  CHECK_THROWS_AS(matmul_grad(a, b, Matrix(2, 3)), ShapeError);
  CHECK_THROWS_AS(softmax_rows_grad(probs, Matrix(1, 3)), ShapeError);
  CHECK_THROWS_AS(layer_norm_grad(a, std::vector<double>(2, 1.0), Matrix(2, 2)), ShapeError);
}

TEST_CASE("primitive gradients vs central differences over 100 seeds") {
  GradCheckOptions opt;
  opt.seed = 17;
  opt.seeds = 100;
  opt.tolerance = 1e-5;
  const GradCheckReport rep = check_numkernel_grads(opt);
  REQUIRE(rep.entries.size() == 6);
  for (const auto& e : rep.entries) {
    INFO(e.group << " max rel error " << e.max_rel_error);
    CHECK(e.pass);
    CHECK(e.checked > 0);
  }
}

TEST_CASE("primitive gradients reach 1e-6 on one instance") {
  GradCheckOptions opt;
  opt.seed = 3;
  opt.tolerance = 1e-6;
  for (const auto& e : check_numkernel_grads(opt).entries) {
    INFO(e.group << " max rel error " << e.max_rel_error);
    CHECK(e.pass);
  }
}

TEST_CASE("serial and parallel kernels are bit-identical") {
  std::mt19937_64 rng(4);
  // Sizes straddle kParallelMinWork so both code paths of the if-clause run.
  for (std::size_t n : {3u, 17u, 64u, 130u}) {
    const Matrix a = oracle::random_matrix(n, n + 3, rng), b = oracle::random_matrix(n + 3, n, rng);
    const Matrix at = a.transposed(), bt = b.transposed();
    CHECK(kernels::parallel::matmul(a, b) == kernels::serial::matmul(a, b));
    CHECK(kernels::parallel::matmul_tn(at, b) == kernels::serial::matmul_tn(at, b));
    CHECK(kernels::parallel::matmul_nt(a, bt) == kernels::serial::matmul_nt(a, bt));
    CHECK(kernels::parallel::softmax_rows(a) == kernels::serial::softmax_rows(a));
    const std::vector<double> gain = oracle::random_vector(n + 3, rng), bias = oracle::random_vector(n + 3, rng);
    CHECK(kernels::parallel::layer_norm(a, gain, bias, 1e-5) ==
          kernels::serial::layer_norm(a, gain, bias, 1e-5));
  }
}

TEST_CASE("helpers") {
  Matrix m{{1, 2}, {3, 4}};
  add_row_vector(m, std::vector<double>{10, 20});
  CHECK(m == Matrix{{11, 22}, {13, 24}});
  CHECK(column_sums(m) == std::vector<double>{24, 46});
  CHECK(m.transposed() == Matrix{{11, 13}, {22, 24}});
  CHECK_FALSE(Matrix{{1, NAN}}.all_finite());
}
