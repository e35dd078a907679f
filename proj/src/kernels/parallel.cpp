#include <limits>

#include "common.hpp"

namespace psyseg::kernels::parallel {

void slic_assign(std::span<const float> lab, const SlicWindow& win, std::span<const SlicCenter> centers,
                 std::span<std::int32_t> labels, std::span<double> distance) {
  const double w2 = (win.compactness / win.step) * (win.compactness / win.step);
  // Bucket centers on a step-sized grid; any center within `step` of a pixel
  // lies in the pixel's bucket or one of its 8 neighbours.
  const int bw = static_cast<int>(std::floor((win.width - 1) / win.step)) + 1;
  const int bh = static_cast<int>(std::floor((win.height - 1) / win.step)) + 1;
  std::vector<std::vector<int>> buckets(static_cast<std::size_t>(bw) * bh);
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const int bx = std::clamp(static_cast<int>(std::floor(centers[k].x / win.step)), 0, bw - 1);
    const int by = std::clamp(static_cast<int>(std::floor(centers[k].y / win.step)), 0, bh - 1);
    buckets[static_cast<std::size_t>(by) * bw + bx].push_back(static_cast<int>(k));
  }

#pragma omp parallel for schedule(static)
  for (int y = 0; y < win.height; ++y) {
    const int by = static_cast<int>(std::floor(y / win.step));
    for (int x = 0; x < win.width; ++x) {
      const int bx = static_cast<int>(std::floor(x / win.step));
      const std::size_t i = static_cast<std::size_t>(y) * win.width + x;
      double best = std::numeric_limits<double>::infinity();
      int best_k = -1;
      for (int ny = std::max(0, by - 1); ny <= std::min(bh - 1, by + 1); ++ny)
        for (int nx = std::max(0, bx - 1); nx <= std::min(bw - 1, bx + 1); ++nx)
          for (int k : buckets[static_cast<std::size_t>(ny) * bw + nx]) {
            const SlicCenter& c = centers[k];
            if (!detail::in_window(x, y, c, win.step)) continue;
            const double d = detail::slic_distance2(&lab[i * 3], x, y, c, w2);
            if (d < best || (d == best && k < best_k)) {
              best = d;
              best_k = k;
            }
          }
      distance[i] = best;
      if (best_k >= 0) labels[i] = best_k;
    }
  }
}

Eigen::MatrixXd pairwise_distances(const PointMatrix& points) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (i != j) d(i, j) = detail::row_distance(points, std::min(i, j), std::max(i, j));
  return d;
}

void assign_nearest(const PointMatrix& points, const PointMatrix& centroids, std::span<int> assignment,
                    std::span<double> squared_distance) {
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    detail::assign_one(points, centroids, i, assignment[i], squared_distance[i]);
}

Eigen::MatrixXd cluster_distance_sums(const Eigen::MatrixXd& dist, std::span<const int> assignment, int clusters) {
  const Eigen::Index n = dist.rows();
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(n, clusters);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) sums(i, assignment[j]) += dist(i, j);
  return sums;
}

std::vector<std::vector<int>> knn(const PointMatrix& points, int k) {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(points.rows()));
#pragma omp parallel for schedule(dynamic, 8)
  for (Eigen::Index i = 0; i < points.rows(); ++i) out[i] = detail::knn_row(points, i, k);
  return out;
}

}  // namespace psyseg::kernels::parallel
