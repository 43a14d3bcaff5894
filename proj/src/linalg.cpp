#include "lipnet/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace lipnet {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows_ * cols_) {
    throw std::invalid_argument("Matrix: entry count " + std::to_string(data_.size()) +
                                " does not match " + std::to_string(rows_) + "x" +
                                std::to_string(cols_));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows, std::size_t cols_if_empty) {
  if (rows.empty()) return Matrix(0, cols_if_empty);
  const std::size_t cols = rows.front().size();
  Matrix m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != cols) throw std::invalid_argument("Matrix::from_rows: ragged rows");
    std::copy(rows[r].begin(), rows[r].end(), m.row(r).begin());
  }
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix Matrix::scaled(double s) const {
  Matrix out = *this;
  for (double& v : out.data_) v *= s;
  return out;
}

Matrix Matrix::row_block(std::size_t first, std::size_t count) const {
  return sub(first, count, 0, cols_);
}

Matrix Matrix::sub(std::size_t r0, std::size_t nr, std::size_t c0, std::size_t nc) const {
  if (r0 + nr > rows_ || c0 + nc > cols_) throw std::out_of_range("Matrix::sub out of range");
  Matrix out(nr, nc);
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t c = 0; c < nc; ++c) out(r, c) = (*this)(r0 + r, c0 + c);
  return out;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> v) {
  // Scaled accumulation keeps tiny and huge entries finite.
  double scale = 0.0;
  for (double x : v) scale = std::max(scale, std::abs(x));
  if (scale == 0.0) return 0.0;
  double s = 0.0;
  for (double x : v) {
    const double y = x / scale;
    s += y * y;
  }
  return scale * std::sqrt(s);
}

double norm1(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += std::abs(x);
  return s;
}

Vector matvec(const Matrix& m, std::span<const double> x) {
  if (x.size() != m.cols()) {
    throw std::invalid_argument("matvec: expected input of dimension " + std::to_string(m.cols()) +
                                ", got " + std::to_string(x.size()));
  }
  Vector y(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) y[r] = dot(m.row(r), x);
  return y;
}

Vector matvec_t(const Matrix& m, std::span<const double> y) {
  if (y.size() != m.rows()) {
    throw std::invalid_argument("matvec_t: expected input of dimension " +
                                std::to_string(m.rows()) + ", got " + std::to_string(y.size()));
  }
  Vector x(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double yr = y[r];
    if (yr == 0.0) continue;
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) x[c] += row[c] * yr;
  }
  return x;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

Matrix block_diag(const std::vector<Matrix>& blocks) {
  std::size_t rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out(rows, cols);
  std::size_t r0 = 0, c0 = 0;
  for (const auto& b : blocks) {
    for (std::size_t r = 0; r < b.rows(); ++r)
      for (std::size_t c = 0; c < b.cols(); ++c) out(r0 + r, c0 + c) = b(r, c);
    r0 += b.rows();
    c0 += b.cols();
  }
  return out;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i)
    m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

SpectralEstimate spectral_norm_estimate(const Matrix& m, PowerIterationOptions opts) {
  if (m.empty()) throw std::invalid_argument("spectral_norm: empty matrix");
  if (!(opts.tol > 0.0)) throw std::invalid_argument("spectral_norm: tol must be positive");

  const double fro = norm2(m.data());
  SpectralEstimate est;
  if (fro == 0.0) {
    est.converged = true;
    return est;
  }
  const std::size_t n = m.cols();
  const double collapse = 1e-14 * fro * fro;

  Vector v(n, 1.0 / std::sqrt(static_cast<double>(n)));
  std::size_t next_basis = 0;
  double best = 0.0;

  for (std::size_t it = 0; it < opts.max_iters; ++it) {
    est.iterations = it + 1;
    const Vector w = matvec(m, v);
    const double lambda = dot(w, w);
    Vector u = matvec_t(m, w);
    const double unorm = norm2(u);
    if (unorm < collapse) {
      // Start vector (numerically) in the null space of M.
      if (next_basis == n) {
        est.value = 0.0;
        est.converged = true;
        return est;
      }
      std::fill(v.begin(), v.end(), 0.0);
      v[next_basis++] = 1.0;
      continue;
    }
    best = std::max(best, lambda);
    double res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = u[i] - lambda * v[i];
      res += r * r;
    }
    if (std::sqrt(res) <= opts.tol * lambda) {
      est.value = std::sqrt(lambda);
      est.converged = true;
      return est;
    }
    for (std::size_t i = 0; i < n; ++i) v[i] = u[i] / unorm;
  }
  est.value = std::sqrt(best);
  est.converged = false;
  return est;
}

double spectral_norm(const Matrix& m, double tol, std::size_t max_iters) {
  return spectral_norm_estimate(m, {tol, max_iters}).value;
}

SymEig sym_eig(const Matrix& s) {
  if (s.rows() != s.cols()) throw std::invalid_argument("sym_eig: matrix is not square");
  const std::size_t n = s.rows();
  double maxabs = 0.0;
  for (double x : s.data()) maxabs = std::max(maxabs, std::abs(x));
  const double sym_tol = 1e-10 * std::max(1.0, maxabs);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (std::abs(s(i, j) - s(j, i)) > sym_tol) {
        throw std::invalid_argument("sym_eig: matrix is not symmetric (|S" + std::to_string(i) +
                                    std::to_string(j) + " - S" + std::to_string(j) +
                                    std::to_string(i) + "| = " +
                                    std::to_string(std::abs(s(i, j) - s(j, i))) + ")");
      }

  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = 0.5 * (s(i, j) + s(j, i));
  Matrix v = Matrix::identity(n);

  const double threshold = 1e-12 * std::max(norm2(a.data()), 1e-300);
  auto off_norm = [&] {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(off);
  };

  for (int sweep = 0; sweep < 100 && off_norm() > threshold; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::hypot(theta, 1.0));
        const double c = 1.0 / std::hypot(t, 1.0);
        const double sn = t * c;
        // A <- Jᵀ A J with J the (p, q) rotation.
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sn * vkq;
          v(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });

  SymEig out{Vector(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.eigvals[k] = a(order[k], order[k]);
    for (std::size_t i = 0; i < n; ++i) out.r(k, i) = v(i, order[k]);
  }
  return out;
}

Matrix project_spectral_ball(const Matrix& m, double slack) {
  if (m.empty()) return m;
  const double s = spectral_norm(m);
  if (s <= 1.0 + slack) return m;
  return m.scaled(1.0 / s);
}

Vector project_l1_ball(std::span<const double> v) {
  Vector out(v.begin(), v.end());
  if (norm1(v) <= 1.0) return out;

  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return std::abs(v[i]) > std::abs(v[j]); });

  double cumsum = 0.0, theta = 0.0;
  for (std::size_t j = 0; j < order.size(); ++j) {
    const double u = std::abs(v[order[j]]);
    cumsum += u;
    const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u - t > 0.0) theta = t;
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double mag = std::max(std::abs(v[i]) - theta, 0.0);
    out[i] = std::copysign(mag, v[i]);
  }
  return out;
}

Matrix project_block_rows(const Matrix& b, std::span<const std::size_t> block_sizes,
                          double slack) {
  const std::size_t total = std::accumulate(block_sizes.begin(), block_sizes.end(), std::size_t{0});
  if (total != b.rows()) {
    throw std::invalid_argument("project_block_rows: block sizes sum to " + std::to_string(total) +
                                " but matrix has " + std::to_string(b.rows()) + " rows");
  }
  Matrix out = b;
  std::size_t r0 = 0;
  for (std::size_t size : block_sizes) {
    if (size > 0 && b.cols() > 0) {
      const Matrix block = b.row_block(r0, size);
      const double s = spectral_norm(block);
      if (s > 1.0 + slack)
        for (std::size_t r = r0; r < r0 + size; ++r)
          for (double& x : out.row(r)) x /= s;
    }
    r0 += size;
  }
  return out;
}

}  // namespace lipnet
