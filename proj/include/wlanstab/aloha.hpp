#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace wlanstab::aloha {

// Per-user throughput of slotted Aloha at the given attempt rates:
// rate_i = tau_i * prod_{j != i} (1 - tau_j).
inline std::vector<double> throughput(const std::vector<double>& tau) {
  for (double t : tau)
    if (!(t >= 0.0) || t > 1.0) throw std::domain_error("attempt rates must lie in [0,1]");
  const std::size_t n = tau.size();
  std::vector<double> rates(n);
  for (std::size_t i = 0; i < n; ++i) {
    double r = tau[i];
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) r *= 1.0 - tau[j];
    rates[i] = r;
  }
  return rates;
}

using RatePoint = std::vector<double>;

namespace detail {

inline bool dominates(const RatePoint& a, const RatePoint& b) {
  bool strict = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return false;
    if (a[i] > b[i]) strict = true;
  }
  return strict;
}

}  // namespace detail

// Keep the non-dominated points of a rate-vector cloud.
inline std::vector<RatePoint> pareto_filter(std::vector<RatePoint> points) {
  if (points.empty()) return points;
  if (points.front().size() == 2) {
    // Sweep by descending x, keeping strictly increasing y.
    std::sort(points.begin(), points.end(), [](const RatePoint& a, const RatePoint& b) {
      if (a[0] != b[0]) return a[0] > b[0];
      return a[1] > b[1];
    });
    std::vector<RatePoint> frontier;
    double best_y = -1.0;
    for (const auto& p : points) {
      if (p[1] > best_y) {
        frontier.push_back(p);
        best_y = p[1];
      }
    }
    std::sort(frontier.begin(), frontier.end());
    return frontier;
  }
  std::vector<RatePoint> frontier;
  for (const auto& p : points) {
    bool dominated = false;
    for (const auto& q : frontier)
      if (detail::dominates(q, p) || q == p) {
        dominated = true;
        break;
      }
    if (dominated) continue;
    std::erase_if(frontier, [&](const RatePoint& q) { return detail::dominates(p, q); });
    frontier.push_back(p);
  }
  std::sort(frontier.begin(), frontier.end());
  return frontier;
}

// Pareto frontier of the capacity region restricted to attempt rates in
// [0, 1/wbar]^n, sampled on a uniform grid.
inline std::vector<RatePoint> region_boundary(int users, double wbar, int grid) {
  if (users < 1) throw std::invalid_argument("region_boundary: need at least one user");
  if (!(wbar >= 1.0)) throw std::invalid_argument("region_boundary: wbar must be >= 1");
  if (grid < 2) throw std::invalid_argument("region_boundary: grid must be >= 2");
  const double cap = 1.0 / wbar;
  std::vector<RatePoint> cloud;
  std::vector<int> idx(users, 0);
  std::vector<double> tau(users, 0.0);
  while (true) {
    for (int u = 0; u < users; ++u) tau[u] = cap * idx[u] / (grid - 1);
    cloud.push_back(throughput(tau));
    int u = 0;
    while (u < users && ++idx[u] == grid) idx[u++] = 0;
    if (u == users) break;
  }
  return pareto_filter(std::move(cloud));
}

enum class RegionShape { kConvex, kConcave, kMixed };

inline const char* to_string(RegionShape s) {
  switch (s) {
    case RegionShape::kConvex: return "convex";
    case RegionShape::kConcave: return "concave";
    default: return "mixed";
  }
}

// Classify the geometry of a two-user region from its frontier, using second
// divided differences of y(x). A concave frontier curve bounds a convex
// region and vice versa; curvature within the tolerance band counts as flat.
inline RegionShape frontier_shape(const std::vector<RatePoint>& boundary, double tol = 1e-3) {
  if (boundary.size() < 3) throw std::invalid_argument("frontier_shape: need at least 3 points");
  bool has_pos = false, has_neg = false;
  for (std::size_t i = 1; i + 1 < boundary.size(); ++i) {
    const double x0 = boundary[i - 1][0], y0 = boundary[i - 1][1];
    const double x1 = boundary[i][0], y1 = boundary[i][1];
    const double x2 = boundary[i + 1][0], y2 = boundary[i + 1][1];
    if (x1 - x0 < 1e-12 || x2 - x1 < 1e-12) continue;
    const double curv = 2.0 * ((y2 - y1) / (x2 - x1) - (y1 - y0) / (x1 - x0)) / (x2 - x0);
    if (curv > tol) has_pos = true;
    if (curv < -tol) has_neg = true;
  }
  if (has_pos && !has_neg) return RegionShape::kConcave;
  if (has_neg && !has_pos) return RegionShape::kConvex;
  return RegionShape::kMixed;
}

// True when every point of `inner` is dominated (within slack) by some point
// of `outer`; used to check the nesting of backoff-constrained regions.
inline bool frontier_contains(const std::vector<RatePoint>& outer,
                              const std::vector<RatePoint>& inner, double slack) {
  for (const auto& p : inner) {
    double best = -1.0;
    for (const auto& q : outer)
      if (q[0] >= p[0] - slack) best = std::max(best, q[1]);
    if (best < p[1] - slack) return false;
  }
  return true;
}

}  // namespace wlanstab::aloha
