#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>

#include "psyseg/kernels.hpp"

namespace psyseg::kernels::detail {

inline double slic_distance2(const float* px, int x, int y, const SlicCenter& c, double spatial_weight2) {
  const double dl = px[0] - c.l, da = px[1] - c.a, db = px[2] - c.b;
  const double dx = x - c.x, dy = y - c.y;
  return dl * dl + da * da + db * db + (dx * dx + dy * dy) * spatial_weight2;
}

inline bool in_window(int x, int y, const SlicCenter& c, double step) {
  return std::abs(x - c.x) <= step && std::abs(y - c.y) <= step;
}

inline double row_distance(const PointMatrix& p, Eigen::Index i, Eigen::Index j) {
  return (p.row(i) - p.row(j)).norm();
}

inline double row_distance2(const PointMatrix& a, Eigen::Index i, const PointMatrix& b, Eigen::Index j) {
  return (a.row(i) - b.row(j)).squaredNorm();
}

inline void assign_one(const PointMatrix& points, const PointMatrix& centroids, Eigen::Index i, int& out,
                       double& out_d2) {
  int best = 0;
  double best_d2 = row_distance2(points, i, centroids, 0);
  for (Eigen::Index c = 1; c < centroids.rows(); ++c) {
    const double d2 = row_distance2(points, i, centroids, c);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = static_cast<int>(c);
    }
  }
  out = best;
  out_d2 = best_d2;
}

inline std::vector<int> knn_row(const PointMatrix& points, Eigen::Index i, int k) {
  const Eigen::Index n = points.rows();
  std::vector<std::pair<double, int>> cand;
  cand.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < n; ++j)
    if (j != i) cand.emplace_back(row_distance2(points, i, points, j), static_cast<int>(j));
  const auto kk = std::min<std::size_t>(static_cast<std::size_t>(k), cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(kk), cand.end());
  std::vector<int> out(kk);
  for (std::size_t t = 0; t < kk; ++t) out[t] = cand[t].second;
  return out;
}

}  // namespace psyseg::kernels::detail
