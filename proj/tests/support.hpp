#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "lipnet/linalg.hpp"
#include "lipnet/pwa.hpp"

namespace lipnet::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t uniform_int(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline Vector random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  Vector v(n);
  for (auto& x : v) x = uniform(rng, lo, hi);
  return v;
}

inline Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (auto& x : m.data()) x = uniform(rng, lo, hi);
  return m;
}

/// Direction uniform on the sphere, norm uniform in [0, max_norm].
inline Vector random_plane_normal(Rng& rng, std::size_t d, double max_norm = 1.0) {
  std::normal_distribution<double> n01;
  Vector a(d);
  double n = 0.0;
  while (n == 0.0) {
    for (auto& x : a) x = n01(rng);
    n = norm2(a);
  }
  const double scale = uniform(rng, 0.0, max_norm) / n;
  for (auto& x : a) x *= scale;
  return a;
}

inline PwaMaxMin random_pwa(Rng& rng, std::size_t d, std::size_t k, std::size_t max_l) {
  PwaMaxMin f;
  f.d = d;
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<AffinePlane> blk;
    const std::size_t l = uniform_int(rng, 1, max_l);
    for (std::size_t j = 0; j < l; ++j) blk.push_back({random_plane_normal(rng, d), uniform(rng, -5.0, 5.0)});
    f.blocks.push_back(std::move(blk));
  }
  return f;
}

inline PwaMaxMin random_pwa(Rng& rng) {
  return random_pwa(rng, uniform_int(rng, 1, 5), uniform_int(rng, 1, 4), 4);
}

/// Straightforward max-min loop, written independently of pwa_eval.
inline double naive_maxmin(const PwaMaxMin& f, const Vector& x) {
  std::vector<double> mins;
  for (const auto& blk : f.blocks) {
    std::vector<double> vals;
    for (const auto& p : blk) {
      double s = p.b;
      for (std::size_t c = 0; c < x.size(); ++c) s += p.a[c] * x[c];
      vals.push_back(s);
    }
    mins.push_back(*std::min_element(vals.begin(), vals.end()));
  }
  return *std::max_element(mins.begin(), mins.end());
}

/// Symmetric matrix Rᵀ·diag(spectrum)·R with a random orthogonal R.
inline Matrix random_symmetric(Rng& rng, std::size_t h, double lo, double hi) {
  // Gram-Schmidt on a random matrix.
  Matrix q = random_matrix(rng, h, h);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      const double p = dot(q.row(i), q.row(j));
      for (std::size_t c = 0; c < h; ++c) q(i, c) -= p * q(j, c);
    }
    const double n = norm2(q.row(i));
    for (std::size_t c = 0; c < h; ++c) q(i, c) /= n;
  }
  Matrix s(h, h);
  for (std::size_t k = 0; k < h; ++k) {
    const double e = uniform(rng, lo, hi);
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < h; ++j) s(i, j) += e * q(k, i) * q(k, j);
  }
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < i; ++j) s(i, j) = s(j, i);
  return s;
}

inline double max_abs(const Vector& a, const Vector& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace lipnet::testing
