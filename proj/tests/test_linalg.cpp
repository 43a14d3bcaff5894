#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "lipnet/linalg.hpp"
#include "support.hpp"

using namespace lipnet;
using namespace lipnet::testing;

namespace {

double oracle_spectral(const Matrix& m) {
  const SymEig e = sym_eig(matmul(m.transposed(), m));
  return std::sqrt(std::max(0.0, e.eigvals.front()));
}

}  // namespace

TEST_CASE("spectral norm of simple matrices") {
  CHECK(spectral_norm(Matrix::identity(2)) == doctest::Approx(1.0).epsilon(1e-12));
  Matrix d(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = 1.0;
  CHECK(spectral_norm(d) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(spectral_norm(Matrix(3, 2)) == 0.0);
}

TEST_CASE("spectral norm agrees with the eigensolver oracle") {
  Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const std::size_t r = uniform_int(rng, 1, 16), c = uniform_int(rng, 1, 16);
    const Matrix m = random_matrix(rng, r, c);
    const double est = spectral_norm(m);
    const double ref = oracle_spectral(m);
    CHECK(std::abs(est - ref) <= 1e-8 * ref);
  }
}

TEST_CASE("power iteration restarts when the all-ones start is in the null space") {
  Matrix m(1, 2);
  m(0, 0) = 1.0;
  m(0, 1) = -1.0;
  const SpectralEstimate e = spectral_norm_estimate(m);
  CHECK(e.converged);
  CHECK(e.value == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("power iteration reports non-convergence") {
  Rng rng(2);
  const Matrix m = random_matrix(rng, 8, 8);
  const SpectralEstimate e = spectral_norm_estimate(m, {1e-16, 2});
  CHECK_FALSE(e.converged);
  CHECK(e.value > 0.0);
  CHECK(e.value <= oracle_spectral(m) * (1 + 1e-12));
}

TEST_CASE("sym_eig on small examples") {
  Matrix d(2, 2);
  d(0, 0) = 0.5;
  d(1, 1) = 0.2;
  SymEig e = sym_eig(d);
  CHECK(e.eigvals[0] == doctest::Approx(0.5));
  CHECK(e.eigvals[1] == doctest::Approx(0.2));
  CHECK(std::abs(std::abs(e.r(0, 0)) - 1.0) < 1e-14);

  Matrix s(2, 2);
  s(0, 1) = s(1, 0) = 1.0;
  e = sym_eig(s);
  CHECK(e.eigvals[0] == doctest::Approx(1.0));
  CHECK(e.eigvals[1] == doctest::Approx(-1.0));
}

TEST_CASE("sym_eig reconstructs random symmetric matrices") {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const std::size_t h = uniform_int(rng, 1, 12);
    Matrix s = random_matrix(rng, h, h);
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < i; ++j) s(i, j) = s(j, i);
    const SymEig e = sym_eig(s);
    Matrix rec(h, h);
    for (std::size_t k = 0; k < h; ++k)
      for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < h; ++j) rec(i, j) += e.r(k, i) * e.eigvals[k] * e.r(k, j);
    CHECK(max_abs_diff(rec, s) <= 1e-10);
    const Matrix rtr = matmul(e.r.transposed(), e.r);
    CHECK(max_abs_diff(rtr, Matrix::identity(h)) <= 1e-10);
    for (std::size_t k = 1; k < h; ++k) CHECK(e.eigvals[k - 1] >= e.eigvals[k]);
  }
}

TEST_CASE("sym_eig of PSD input has nonnegative eigenvalues") {
  Rng rng(4);
  for (int t = 0; t < 20; ++t) {
    const Matrix s = random_symmetric(rng, 6, 0.0, 1.0);
    for (double v : sym_eig(s).eigvals) CHECK(v >= -1e-10);
  }
}

TEST_CASE("sym_eig rejects asymmetric or non-square input") {
  Matrix a(2, 2);
  a(0, 1) = 1.0;
  CHECK_THROWS_AS(sym_eig(a), std::invalid_argument);
  CHECK_THROWS_AS(sym_eig(Matrix(2, 3)), std::invalid_argument);
}

TEST_CASE("project_spectral_ball") {
  Matrix half = Matrix::identity(3).scaled(0.5);
  CHECK(project_spectral_ball(half) == half);
  Matrix d(2, 2);
  d(0, 0) = 2.0;
  d(1, 1) = 1.0;
  const Matrix p = project_spectral_ball(d);
  CHECK(p(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p(1, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(project_spectral_ball(Matrix(2, 2)) == Matrix(2, 2));

  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const Matrix m = random_matrix(rng, uniform_int(rng, 1, 10), uniform_int(rng, 1, 10), -3, 3);
    const Matrix once = project_spectral_ball(m);
    CHECK(oracle_spectral(once) <= 1.0 + 1e-9);
    CHECK(max_abs_diff(project_spectral_ball(once), once) <= 1e-12);
  }
}

TEST_CASE("project_l1_ball") {
  const Vector inside{0.3, -0.2};
  CHECK(project_l1_ball(inside) == inside);
  const Vector a = project_l1_ball(Vector{2.0, 0.0});
  CHECK(a[0] == doctest::Approx(1.0));
  CHECK(a[1] == 0.0);
  const Vector b = project_l1_ball(Vector{1.0, 1.0});
  CHECK(b[0] == doctest::Approx(0.5));
  CHECK(b[1] == doctest::Approx(0.5));
  const Vector c = project_l1_ball(Vector{-3.0, 1.0, 0.5});
  CHECK(c[0] == doctest::Approx(-1.0));
  CHECK(c[1] == 0.0);

  Rng rng(6);
  for (int t = 0; t < 200; ++t) {
    const Vector v = random_vector(rng, uniform_int(rng, 1, 8), -2, 2);
    const Vector p = project_l1_ball(v);
    CHECK(norm1(p) <= std::min(1.0, norm1(v)) + 1e-12);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(p[i]) <= std::abs(v[i]));
    // Euclidean optimality against random feasible competitors.
    double best = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) best += (p[i] - v[i]) * (p[i] - v[i]);
    for (int s = 0; s < 20; ++s) {
      Vector q = random_vector(rng, v.size());
      const double n = norm1(q);
      if (n > 1.0) for (auto& x : q) x /= n;
      double dist = 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) dist += (q[i] - v[i]) * (q[i] - v[i]);
      CHECK(best <= dist + 1e-12);
    }
  }
}

TEST_CASE("project_block_rows") {
  Matrix row(1, 2);
  row(0, 0) = 2.0;
  const Matrix p = project_block_rows(row, std::vector<std::size_t>{1});
  CHECK(p(0, 0) == doctest::Approx(1.0));

  Rng rng(7);
  const Matrix small = random_matrix(rng, 4, 3, -0.1, 0.1);
  CHECK(project_block_rows(small, std::vector<std::size_t>{1, 3}) == small);

  for (int t = 0; t < 30; ++t) {
    const Matrix m = random_matrix(rng, 5, 4, -2, 2);
    const std::vector<std::size_t> blocks{2, 3};
    const Matrix q = project_block_rows(m, blocks);
    CHECK(oracle_spectral(q.row_block(0, 2)) <= 1.0 + 1e-9);
    CHECK(oracle_spectral(q.row_block(2, 3)) <= 1.0 + 1e-9);
  }
  CHECK_THROWS_AS(project_block_rows(small, std::vector<std::size_t>{1, 1}), std::invalid_argument);
}
