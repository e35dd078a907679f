#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "psyseg/kernels.hpp"

namespace psyseg::hierarchy {

using kernels::PointMatrix;

struct KMeansResult {
  std::vector<int> assignment;
  PointMatrix centroids;
  double inertia = 0;
  std::vector<double> inertia_trace;  // after every assignment step of the winning run
  int restart = 0;                    // index of the winning restart
};

inline constexpr int kMaxLloydIterations = 300;
inline constexpr double kCentroidShiftTolerance = 1e-9;

/// Best of `restarts` seeded k-means++ runs (lowest inertia, then lowest restart index).
KMeansResult kmeans(const PointMatrix& points, int k, int restarts, std::uint64_t seed, bool parallel = true);

/// Mean silhouette; singleton clusters contribute 0, as do points with a = b = 0.
double silhouette(const PointMatrix& points, std::span<const int> assignment, bool parallel = true);
double silhouette_from_distances(const Eigen::MatrixXd& dist, std::span<const int> assignment, bool parallel = true);

struct ClusteringConfig {
  int k_max = 8;
  double s_min = 0.35;
  int min_split_size = 12;
  int max_depth = 4;
  int restarts = 8;
  std::uint64_t seed = 0;
  bool parallel = true;

  void validate() const;
};

nlohmann::json to_json(const ClusteringConfig& c);
ClusteringConfig clustering_config_from_json(const nlohmann::json& j);

struct SplitDecision {
  bool split = false;
  int k = 1;
  std::vector<int> assignment;
  double silhouette = 0;
  std::vector<double> silhouette_by_k;  // index 0 <-> K = 2
};

/// Picks K in 2..min(k_max, n-1) maximising mean silhouette (ties to smaller K);
/// no split when the best score is below s_min.
SplitDecision choose_k(const PointMatrix& points, const ClusteringConfig& config, std::uint64_t seed);

struct HierarchyNode {
  int id = 0;
  int parent = -1;
  int level = 0;
  std::vector<int> members;  // sorted patch ids
  std::vector<int> children;
  Eigen::VectorXd centroid;
  std::optional<double> purity;

  bool is_leaf() const { return children.empty(); }
};

class HierarchyTree {
 public:
  HierarchyTree() = default;
  explicit HierarchyTree(std::vector<HierarchyNode> nodes);

  const std::vector<HierarchyNode>& nodes() const { return nodes_; }
  std::vector<HierarchyNode>& nodes() { return nodes_; }
  const HierarchyNode& node(int id) const { return nodes_.at(id); }
  const HierarchyNode& root() const { return nodes_.front(); }
  int size() const { return static_cast<int>(nodes_.size()); }
  int patch_count() const { return static_cast<int>(root().members.size()); }
  int depth() const;

  std::vector<int> nodes_at_level(int level) const;
  /// Segmentation at `level`: nodes on that level plus shallower leaves.
  std::vector<int> cut(int level) const;
  /// Node of the cut at `level` holding each patch.
  std::vector<int> cut_assignment(int level) const;
  std::vector<int> leaf_of_patch() const;
  int lca(int node_a, int node_b) const;

  /// Throws std::logic_error when a structural invariant is broken.
  void validate() const;

  nlohmann::json to_json() const;
  static HierarchyTree from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static HierarchyTree load(const std::filesystem::path& path);

 private:
  std::vector<HierarchyNode> nodes_;
};

/// Top-down recursive k-means splitting.
HierarchyTree build_hierarchy(const PointMatrix& embeddings, const ClusteringConfig& config);

/// Single-node tree over `patch_count` patches (centroids left empty).
HierarchyTree flat_tree(int patch_count);

}  // namespace psyseg::hierarchy
