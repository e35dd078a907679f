#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace psyseg::query {
struct TripletQuery;
}

namespace psyseg::oracle {

struct KnowledgeNode {
  std::string name;
  int parent = -1;
  int depth = 0;
  int class_id = -1;  // >= 0 for leaves
  std::vector<int> children;
};

/// Rooted knowledge tree whose leaves are the semantic classes.
class KnowledgeTree {
 public:
  KnowledgeTree();  // root only

  int root() const { return 0; }
  int add_node(int parent, std::string name);
  /// Adds a leaf standing for class `class_id`.
  int add_leaf(int parent, std::string class_name, int class_id);

  const std::vector<KnowledgeNode>& nodes() const { return nodes_; }
  const KnowledgeNode& node(int id) const { return nodes_.at(id); }
  int class_count() const { return static_cast<int>(class_leaves_.size()); }
  int leaf_of_class(int class_id) const { return class_leaves_.at(class_id); }
  const std::string& class_name(int class_id) const { return nodes_[leaf_of_class(class_id)].name; }
  int class_index(const std::string& name) const;  // -1 if absent
  std::vector<std::string> class_names() const;

  int lca(int a, int b) const;
  /// Depth of the lowest common ancestor of two classes (root depth 0).
  int lca_depth_of_classes(int class_a, int class_b) const;
  /// Class of `class_id`'s ancestor at `depth` (node id).
  int ancestor_at_depth(int class_id, int depth) const;
  int max_depth() const;

  nlohmann::json to_json() const;
  static KnowledgeTree from_json(const nlohmann::json& j);

 private:
  std::vector<KnowledgeNode> nodes_;
  std::vector<int> class_leaves_;
};

/// A knowledge tree plus the patch -> class assignment.
struct GroundTruthHierarchy {
  KnowledgeTree tree;
  std::vector<int> patch_labels;  // -1 = unlabeled

  int label_of(int patch) const;  // throws if unlabeled
};

struct OracleConfig {
  double error_rate = 0.0;  // probability of a uniformly random answer
};

int class_similarity(const GroundTruthHierarchy& h, int x, int y);

/// Chooses the option least similar to the other two; ties are broken by `rng`.
int answer(const GroundTruthHierarchy& h, const query::TripletQuery& q, std::mt19937_64& rng,
           const OracleConfig& config = {});
int answer(const GroundTruthHierarchy& h, const query::TripletQuery& q, std::uint64_t seed,
           const OracleConfig& config = {});

/// Majority class per patch from a class label raster and a superpixel label raster.
std::vector<int> majority_labels(const std::vector<std::int32_t>& class_raster,
                                 const std::vector<std::int32_t>& patch_raster, int patch_count,
                                 int class_count);

void save_oracle(const GroundTruthHierarchy& h, const std::filesystem::path& path);
GroundTruthHierarchy load_oracle(const std::filesystem::path& path);

}  // namespace psyseg::oracle
