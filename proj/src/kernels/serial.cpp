#include <limits>

#include "common.hpp"

namespace psyseg::kernels::serial {

void slic_assign(std::span<const float> lab, const SlicWindow& win, std::span<const SlicCenter> centers,
                 std::span<std::int32_t> labels, std::span<double> distance) {
  const double w2 = (win.compactness / win.step) * (win.compactness / win.step);
  std::fill(distance.begin(), distance.end(), std::numeric_limits<double>::infinity());
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const SlicCenter& c = centers[k];
    const int x0 = std::max(0, static_cast<int>(std::ceil(c.x - win.step)));
    const int x1 = std::min(win.width - 1, static_cast<int>(std::floor(c.x + win.step)));
    const int y0 = std::max(0, static_cast<int>(std::ceil(c.y - win.step)));
    const int y1 = std::min(win.height - 1, static_cast<int>(std::floor(c.y + win.step)));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        if (!detail::in_window(x, y, c, win.step)) continue;
        const std::size_t i = static_cast<std::size_t>(y) * win.width + x;
        const double d = detail::slic_distance2(&lab[i * 3], x, y, c, w2);
        if (d < distance[i]) {
          distance[i] = d;
          labels[i] = static_cast<std::int32_t>(k);
        }
      }
  }
}

Eigen::MatrixXd pairwise_distances(const PointMatrix& points) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) d(i, j) = detail::row_distance(points, std::min(i, j), std::max(i, j));
  return d;
}

void assign_nearest(const PointMatrix& points, const PointMatrix& centroids, std::span<int> assignment,
                    std::span<double> squared_distance) {
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    detail::assign_one(points, centroids, i, assignment[i], squared_distance[i]);
}

Eigen::MatrixXd cluster_distance_sums(const Eigen::MatrixXd& dist, std::span<const int> assignment, int clusters) {
  const Eigen::Index n = dist.rows();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n, clusters);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) sums(i, assignment[j]) += dist(i, j);
  return sums;
}

std::vector<std::vector<int>> knn(const PointMatrix& points, int k) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) out[i] = detail::knn_row(points, i, k);
  return out;
}

}  // namespace psyseg::kernels::serial
