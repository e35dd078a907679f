#pragma once

// Data-parallel inner loops. Every kernel has a serial reference in
// `kernels::serial` and an OpenMP version in `kernels::parallel`; both produce
// bit-identical output (each output element is computed by exactly one
// thread in the same arithmetic order).

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace psyseg::kernels {

using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SlicCenter {
  double l = 0, a = 0, b = 0;
  double x = 0, y = 0;
};

/// Parameters shared by both SLIC assignment variants.
struct SlicWindow {
  int width = 0;
  int height = 0;
  double step = 1.0;         // search half-width and spatial normaliser
  double compactness = 10.0;
};

namespace serial {

/// One SLIC assignment sweep: each pixel takes the center with the smallest
/// combined distance among centers within `step` in x and y; ties go to the
/// lower center index. Pixels reached by no center keep their label.
void slic_assign(std::span<const float> lab, const SlicWindow& win, std::span<const SlicCenter> centers,
                 std::span<std::int32_t> labels, std::span<double> distance);

Eigen::MatrixXd pairwise_distances(const PointMatrix& points);

/// Nearest centroid (ties to lower index) and its squared distance.
void assign_nearest(const PointMatrix& points, const PointMatrix& centroids, std::span<int> assignment,
                    std::span<double> squared_distance);

/// sums(i, c) = sum of dist(i, j) over points j in cluster c.
Eigen::MatrixXd cluster_distance_sums(const Eigen::MatrixXd& dist, std::span<const int> assignment, int clusters);

/// k nearest neighbours of every row (self excluded), ordered by distance then index.
std::vector<std::vector<int>> knn(const PointMatrix& points, int k);

}  // namespace serial

namespace parallel {

void slic_assign(std::span<const float> lab, const SlicWindow& win, std::span<const SlicCenter> centers,
                 std::span<std::int32_t> labels, std::span<double> distance);
Eigen::MatrixXd pairwise_distances(const PointMatrix& points);
void assign_nearest(const PointMatrix& points, const PointMatrix& centroids, std::span<int> assignment,
                    std::span<double> squared_distance);
Eigen::MatrixXd cluster_distance_sums(const Eigen::MatrixXd& dist, std::span<const int> assignment, int clusters);
std::vector<std::vector<int>> knn(const PointMatrix& points, int k);

}  // namespace parallel

}  // namespace psyseg::kernels
