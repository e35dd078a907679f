#include <algorithm>
#include <limits>
#include <random>
#include <stdexcept>

#include "psyseg/hierarchy.hpp"
#include "psyseg/seed.hpp"

namespace psyseg::hierarchy {

namespace {

PointMatrix kmeanspp_init(const PointMatrix& points, int k, std::mt19937_64& rng) {
  const Eigen::Index n = points.rows();
  PointMatrix centroids(k, points.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  centroids.row(0) = points.row(pick(rng));
  std::vector<double> d2(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  for (int c = 1; c < k; ++c) {
    double total = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (points.row(i) - centroids.row(c - 1)).squaredNorm());
      total += d2[i];
    }
    Eigen::Index chosen;
    if (total > 0) {
      std::discrete_distribution<Eigen::Index> dd(d2.begin(), d2.end());
      chosen = dd(rng);
    } else {
      chosen = pick(rng);
    }
    centroids.row(c) = points.row(chosen);
  }
  return centroids;
}

void assign(const PointMatrix& points, const PointMatrix& centroids, std::vector<int>& assignment,
            std::vector<double>& d2, bool parallel) {
  if (parallel)
    kernels::parallel::assign_nearest(points, centroids, assignment, d2);
  else
    kernels::serial::assign_nearest(points, centroids, assignment, d2);
}

KMeansResult lloyd(const PointMatrix& points, int k, std::mt19937_64& rng, bool parallel) {
  const Eigen::Index n = points.rows();
  KMeansResult r;
  r.centroids = kmeanspp_init(points, k, rng);
  r.assignment.assign(static_cast<std::size_t>(n), 0);
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (int iter = 0; iter < kMaxLloydIterations; ++iter) {
    assign(points, r.centroids, r.assignment, d2, parallel);
    double inertia = 0;
    for (double v : d2) inertia += v;
    r.inertia_trace.push_back(inertia);

    PointMatrix next = PointMatrix::Zero(k, points.cols());
    std::vector<int> counts(k, 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      next.row(r.assignment[i]) += points.row(i);
      ++counts[r.assignment[i]];
    }
    bool reseeded = false;
    for (int c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        next.row(c) /= counts[c];
        continue;
      }
      // Empty cluster: re-seed from the point farthest from its centroid.
      Eigen::Index far = 0;
      for (Eigen::Index i = 1; i < n; ++i)
        if (d2[i] > d2[far]) far = i;
      next.row(c) = points.row(far);
      r.assignment[far] = c;
      d2[far] = 0;
      reseeded = true;
    }
    const double shift = (next - r.centroids).rowwise().norm().maxCoeff();
    r.centroids = std::move(next);
    if (!reseeded && shift < kCentroidShiftTolerance) break;
  }
  assign(points, r.centroids, r.assignment, d2, parallel);
  r.inertia = 0;
  for (double v : d2) r.inertia += v;
  return r;
}

}  // namespace

KMeansResult kmeans(const PointMatrix& points, int k, int restarts, std::uint64_t seed, bool parallel) {
  if (k < 2 || k > points.rows())
    throw std::invalid_argument("kmeans: K=" + std::to_string(k) + " outside [2, " + std::to_string(points.rows()) + "]");
  if (restarts < 1) throw std::invalid_argument("kmeans: restarts must be >= 1");
  KMeansResult best;
  for (int r = 0; r < restarts; ++r) {
    std::mt19937_64 rng(derive_seed(seed, {static_cast<std::uint64_t>(r)}));
    KMeansResult run = lloyd(points, k, rng, parallel);
    run.restart = r;
    if (r == 0 || run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

}  // namespace psyseg::hierarchy
