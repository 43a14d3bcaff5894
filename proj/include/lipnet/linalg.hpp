#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace lipnet {

using Vector = std::vector<double>;

/// Dense row-major matrix. Small sizes only (tens of rows/cols).
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<Vector>& rows, std::size_t cols_if_empty = 0);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  Matrix transposed() const;
  Matrix scaled(double s) const;
  /// Rows [first, first + count) as a new matrix.
  Matrix row_block(std::size_t first, std::size_t count) const;
  /// Columns [first, first + count) of rows [r0, r0 + nr).
  Matrix sub(std::size_t r0, std::size_t nr, std::size_t c0, std::size_t nc) const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Basic kernels.
double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
double norm1(std::span<const double> v);
Vector matvec(const Matrix& m, std::span<const double> x);
/// mᵀ·y without forming the transpose.
Vector matvec_t(const Matrix& m, std::span<const double> y);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix block_diag(const std::vector<Matrix>& blocks);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool all_finite(std::span<const double> v);

struct SpectralEstimate {
  double value = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

struct PowerIterationOptions {
  double tol = 1e-10;
  std::size_t max_iters = 10000;
};

/// Largest singular value by power iteration on MᵀM.
///
/// Starts from the normalized all-ones vector; when the iterate collapses below
/// 1e-14 the iteration restarts from successive canonical basis vectors. The
/// stopping rule is the eigen-residual ‖MᵀMv − λv‖ ≤ tol·λ, which bounds the
/// relative error of λ = ‖Mv‖² by tol. The estimate never exceeds the true norm
/// by more than rounding.
SpectralEstimate spectral_norm_estimate(const Matrix& m, PowerIterationOptions opts = {});
double spectral_norm(const Matrix& m, double tol = 1e-10, std::size_t max_iters = 10000);

struct SymEig {
  Vector eigvals;
  /// Rows are eigenvectors: S = Rᵀ·diag(eigvals)·R.
  Matrix r;
};

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
/// Throws std::invalid_argument if S is not square or not symmetric within
/// 1e-10·max(1, max|S_ij|).
SymEig sym_eig(const Matrix& s);

/// Treats a matrix with estimated norm ≤ 1 + slack as already feasible.
inline constexpr double kProjectionSlack = 1e-9;

/// M / max(1, ‖M‖₂).
Matrix project_spectral_ball(const Matrix& m, double slack = kProjectionSlack);

/// Euclidean projection onto {‖v‖₁ ≤ 1} (sorted-threshold algorithm).
Vector project_l1_ball(std::span<const double> v);

/// Scales each row block B_i to spectral norm ≤ 1. Throws on inconsistent sizes.
Matrix project_block_rows(const Matrix& b, std::span<const std::size_t> block_sizes,
                          double slack = kProjectionSlack);

}  // namespace lipnet
