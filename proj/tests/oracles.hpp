#pragma once

// Independent reference implementations used only by the tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace oracle {

/// Solves the Toeplitz normal equations R a = r[1..p], R_ij = r|i-j|, by
/// Gaussian elimination with partial pivoting.
inline std::vector<double> toeplitz_solve(std::span<const double> frame, std::size_t order) {
  std::vector<double> r(order + 1, 0.0);
  for (std::size_t lag = 0; lag <= order; ++lag)
    for (std::size_t i = lag; i < frame.size(); ++i) r[lag] += frame[i] * frame[i - lag];
  const std::size_t p = order;
  std::vector<std::vector<double>> a(p, std::vector<double>(p + 1));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) a[i][j] = r[i > j ? i - j : j - i];
    a[i][p] = r[i + 1];
  }
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t piv = c;
    for (std::size_t i = c + 1; i < p; ++i)
      if (std::abs(a[i][c]) > std::abs(a[piv][c])) piv = i;
    std::swap(a[c], a[piv]);
    for (std::size_t i = c + 1; i < p; ++i) {
      const double f = a[i][c] / a[c][c];
      for (std::size_t j = c; j <= p; ++j) a[i][j] -= f * a[c][j];
    }
  }
  std::vector<double> x(p);
  for (std::size_t i = p; i-- > 0;) {
    double s = a[i][p];
    for (std::size_t j = i + 1; j < p; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return x;
}

/// k-th smallest value by counting ranks (O(n^2), no sorting).
inline double kth_smallest(std::span<const double> v, std::size_t k) {
  for (double x : v) {
    std::size_t less = 0, equal = 0;
    for (double y : v) {
      if (y < x) ++less;
      else if (y == x) ++equal;
    }
    if (less <= k && k < less + equal) return x;
  }
  return v[0];
}

/// Percentile at rank (p/100)(n-1) with linear interpolation.
inline double percentile(std::span<const double> v, double p) {
  const double rank = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(rank);
  const double frac = rank - static_cast<double>(lo);
  const double a = kth_smallest(v, lo);
  const double b = frac > 0.0 ? kth_smallest(v, lo + 1) : a;
  return a + frac * (b - a);
}

/// Brute-force Euclidean argmin; ties resolve to the first position.
inline std::size_t nearest(std::span<const double> q, const std::vector<std::vector<double>>& refs,
                           const std::vector<bool>& allowed) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (!allowed[i]) continue;
    double s = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) s += (q[j] - refs[i][j]) * (q[j] - refs[i][j]);
    d.emplace_back(std::sqrt(s), i);
  }
  return std::min_element(d.begin(), d.end())->second;
}

}  // namespace oracle
