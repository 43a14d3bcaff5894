#include "lipnet/pwa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace lipnet {

std::size_t PwaMaxMin::max_block_size() const {
  std::size_t m = 0;
  for (const auto& blk : blocks) m = std::max(m, blk.size());
  return m;
}

std::size_t PwaMaxMin::plane_count() const {
  std::size_t n = 0;
  for (const auto& blk : blocks) n += blk.size();
  return n;
}

void PwaMaxMin::check() const {
  if (d == 0) throw std::invalid_argument("PwaMaxMin: input dimension d must be >= 1");
  if (blocks.empty()) throw std::invalid_argument("PwaMaxMin: at least one block is required");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].empty()) {
      throw std::invalid_argument("PwaMaxMin: block " + std::to_string(i) + " has no planes");
    }
    for (std::size_t j = 0; j < blocks[i].size(); ++j) {
      const auto& p = blocks[i][j];
      const std::string where = "block " + std::to_string(i) + ", plane " + std::to_string(j);
      if (p.a.size() != d) {
        throw std::invalid_argument("PwaMaxMin: " + where + " has " + std::to_string(p.a.size()) +
                                    " coefficients, expected " + std::to_string(d));
      }
      if (!all_finite(p.a) || !std::isfinite(p.b)) {
        throw std::invalid_argument("PwaMaxMin: " + where + " has non-finite entries");
      }
      const double n = norm2(p.a);
      if (n > 1.0 + kPlaneNormSlack) {
        throw std::invalid_argument("PwaMaxMin: " + where + " has |a|_2 = " + std::to_string(n) +
                                    " > 1, so the function is not 1-Lipschitz");
      }
    }
  }
}

double pwa_eval(const PwaMaxMin& f, std::span<const double> x) {
  if (x.size() != f.d) {
    throw std::invalid_argument("pwa_eval: expected input of dimension " + std::to_string(f.d) +
                                ", got " + std::to_string(x.size()));
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& blk : f.blocks) {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& p : blk) lo = std::min(lo, dot(p.a, x) + p.b);
    best = std::max(best, lo);
  }
  return best;
}

double Pwl1d::operator()(double x) const {
  const auto it = std::upper_bound(breakpoints.begin(), breakpoints.end(), x);
  return pieces.at(static_cast<std::size_t>(it - breakpoints.begin()))(x);
}

namespace {

bool at_least(double lhs, double rhs) {
  return lhs >= rhs - 1e-12 * std::max({1.0, std::abs(lhs), std::abs(rhs)});
}

}  // namespace

PwaMaxMin pwl_to_maxmin_1d(const Pwl1d& f) {
  const auto& t = f.breakpoints;
  const auto& p = f.pieces;
  if (p.size() != t.size() + 1) {
    throw std::invalid_argument("pwl_to_maxmin_1d: need exactly one more piece than breakpoints");
  }
  for (std::size_t i = 0; i + 1 < t.size(); ++i)
    if (!(t[i] < t[i + 1])) throw std::invalid_argument("pwl_to_maxmin_1d: breakpoints not increasing");
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!(std::abs(p[i].slope) <= 1.0 + kPlaneNormSlack)) {
      throw std::invalid_argument("pwl_to_maxmin_1d: piece " + std::to_string(i) + " has slope " +
                                  std::to_string(p[i].slope) + " outside [-1, 1]");
    }
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double l = p[i](t[i]), r = p[i + 1](t[i]);
    if (std::abs(l - r) > 1e-9 * std::max({1.0, std::abs(l), std::abs(r)})) {
      throw std::invalid_argument("pwl_to_maxmin_1d: discontinuity of size " +
                                  std::to_string(std::abs(l - r)) + " at breakpoint " +
                                  std::to_string(t[i]));
    }
  }

  PwaMaxMin out;
  out.d = 1;
  const std::size_t n = p.size();
  if (n == 1) {
    out.blocks.push_back({{{p[0].slope}, p[0].intercept}});
    return out;
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<AffinePlane> block;
    for (std::size_t j = 0; j < n; ++j) {
      bool dominates = true;
      if (i == 0) {
        // (-inf, t0]: endpoint test plus p_j decreasing no faster than p_i going left.
        dominates = at_least(p[j](t[0]), p[i](t[0])) && p[j].slope <= p[i].slope + 1e-12;
      } else if (i == n - 1) {
        dominates = at_least(p[j](t[n - 2]), p[i](t[n - 2])) && p[j].slope >= p[i].slope - 1e-12;
      } else {
        dominates = at_least(p[j](t[i - 1]), p[i](t[i - 1])) && at_least(p[j](t[i]), p[i](t[i]));
      }
      if (dominates) block.push_back({{p[j].slope}, p[j].intercept});
    }
    out.blocks.push_back(std::move(block));
  }
  return out;
}

Pwl1d interpolant_1d(std::vector<std::pair<double, double>> samples) {
  if (samples.empty()) throw std::invalid_argument("interpolate_1d: no samples");
  for (const auto& [x, y] : samples)
    if (!std::isfinite(x) || !std::isfinite(y)) throw std::invalid_argument("interpolate_1d: non-finite sample");
  std::sort(samples.begin(), samples.end());
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    const auto [x0, y0] = samples[i];
    const auto [x1, y1] = samples[i + 1];
    if (x0 == x1) {
      throw std::invalid_argument("interpolate_1d: duplicate x value " + std::to_string(x0));
    }
    // Consecutive consistency implies the pairwise condition by the triangle inequality.
    if (std::abs(y1 - y0) > (x1 - x0) * (1.0 + 1e-12)) {
      throw std::invalid_argument("interpolate_1d: samples at x = " + std::to_string(x0) +
                                  " and x = " + std::to_string(x1) +
                                  " are not 1-Lipschitz consistent");
    }
  }

  Pwl1d f;
  if (samples.size() == 1) {
    f.pieces.push_back({0.0, samples[0].second});
    return f;
  }
  for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
    const auto [x0, y0] = samples[i];
    const auto [x1, y1] = samples[i + 1];
    const double slope = std::clamp((y1 - y0) / (x1 - x0), -1.0, 1.0);
    f.pieces.push_back({slope, y0 - slope * x0});
    if (i > 0) f.breakpoints.push_back(x0);
  }
  return f;
}

PwaMaxMin interpolate_1d(std::vector<std::pair<double, double>> samples) {
  return pwl_to_maxmin_1d(interpolant_1d(std::move(samples)));
}

}  // namespace lipnet
