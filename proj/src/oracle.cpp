#include "psyseg/oracle.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "psyseg/query.hpp"

namespace psyseg::oracle {

using nlohmann::json;

KnowledgeTree::KnowledgeTree() { nodes_.push_back(KnowledgeNode{"root", -1, 0, -1, {}}); }

int KnowledgeTree::add_node(int parent, std::string name) {
  if (parent < 0 || parent >= static_cast<int>(nodes_.size()))
    throw std::invalid_argument("knowledge tree: bad parent id");
  if (nodes_[parent].class_id >= 0) throw std::invalid_argument("knowledge tree: cannot extend a leaf");
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(KnowledgeNode{std::move(name), parent, nodes_[parent].depth + 1, -1, {}});
  nodes_[parent].children.push_back(id);
  return id;
}

int KnowledgeTree::add_leaf(int parent, std::string class_name, int class_id) {
  if (class_id < 0) throw std::invalid_argument("knowledge tree: negative class id");
  if (class_id < static_cast<int>(class_leaves_.size()) && class_leaves_[class_id] >= 0)
    throw std::invalid_argument("knowledge tree: duplicate class id");
  const int id = add_node(parent, std::move(class_name));
  nodes_[id].class_id = class_id;
  if (class_id >= static_cast<int>(class_leaves_.size())) class_leaves_.resize(class_id + 1, -1);
  class_leaves_[class_id] = id;
  return id;
}

int KnowledgeTree::class_index(const std::string& name) const {
  for (int c = 0; c < class_count(); ++c)
    if (class_leaves_[c] >= 0 && nodes_[class_leaves_[c]].name == name) return c;
  return -1;
}

std::vector<std::string> KnowledgeTree::class_names() const {
  std::vector<std::string> names;
  for (int c = 0; c < class_count(); ++c) names.push_back(class_name(c));
  return names;
}

int KnowledgeTree::lca(int a, int b) const {
  while (nodes_[a].depth > nodes_[b].depth) a = nodes_[a].parent;
  while (nodes_[b].depth > nodes_[a].depth) b = nodes_[b].parent;
  while (a != b) {
    a = nodes_[a].parent;
    b = nodes_[b].parent;
  }
  return a;
}

int KnowledgeTree::lca_depth_of_classes(int class_a, int class_b) const {
  return nodes_[lca(leaf_of_class(class_a), leaf_of_class(class_b))].depth;
}

int KnowledgeTree::ancestor_at_depth(int class_id, int depth) const {
  int n = leaf_of_class(class_id);
  while (nodes_[n].depth > depth) n = nodes_[n].parent;
  return n;
}

int KnowledgeTree::max_depth() const {
  int d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

json KnowledgeTree::to_json() const {
  auto rec = [&](auto&& self, int id) -> json {
    const auto& n = nodes_[id];
    json j{{"name", n.name}};
    if (n.class_id >= 0) {
      j["class"] = n.class_id;
    } else {
      j["children"] = json::array();
      for (int c : n.children) j["children"].push_back(self(self, c));
    }
    return j;
  };
  return rec(rec, root());
}

KnowledgeTree KnowledgeTree::from_json(const json& j) {
  KnowledgeTree tree;
  tree.nodes_[0].name = j.value("name", "root");
  auto rec = [&](auto&& self, const json& node, int parent) -> void {
    for (const auto& child : node.at("children")) {
      if (child.contains("class")) {
        tree.add_leaf(parent, child.at("name").get<std::string>(), child.at("class").get<int>());
      } else {
        const int id = tree.add_node(parent, child.at("name").get<std::string>());
        self(self, child, id);
      }
    }
  };
  if (!j.contains("children")) throw std::invalid_argument("knowledge tree: root has no children");
  rec(rec, j, tree.root());
  for (int leaf : tree.class_leaves_)
    if (leaf < 0) throw std::invalid_argument("knowledge tree: class ids are not contiguous");
  for (const auto& n : tree.nodes_)
    if (n.class_id < 0 && n.children.empty())
      throw std::invalid_argument("knowledge tree: internal node '" + n.name + "' has no children");
  return tree;
}

int GroundTruthHierarchy::label_of(int patch) const {
  if (patch < 0 || patch >= static_cast<int>(patch_labels.size()) || patch_labels[patch] < 0)
    throw std::invalid_argument("patch " + std::to_string(patch) + " has no ground-truth label");
  return patch_labels[patch];
}

int class_similarity(const GroundTruthHierarchy& h, int x, int y) {
  return h.tree.lca_depth_of_classes(h.label_of(x), h.label_of(y));
}

int answer(const GroundTruthHierarchy& h, const query::TripletQuery& q, std::mt19937_64& rng,
           const OracleConfig& config) {
  if (config.error_rate > 0.0) {
    std::bernoulli_distribution flip(config.error_rate);
    if (flip(rng)) return std::uniform_int_distribution<int>(0, 2)(rng);
  }
  std::array<int, 3> score{};
  for (int i = 0; i < 3; ++i)
    score[i] = class_similarity(h, q[i], q[(i + 1) % 3]) + class_similarity(h, q[i], q[(i + 2) % 3]);
  const int best = *std::min_element(score.begin(), score.end());
  std::array<int, 3> tied{};
  int n_tied = 0;
  for (int i = 0; i < 3; ++i)
    if (score[i] == best) tied[n_tied++] = i;
  if (n_tied == 1) return tied[0];
  return tied[std::uniform_int_distribution<int>(0, n_tied - 1)(rng)];
}

int answer(const GroundTruthHierarchy& h, const query::TripletQuery& q, std::uint64_t seed,
           const OracleConfig& config) {
  std::mt19937_64 rng(seed);
  return answer(h, q, rng, config);
}

std::vector<int> majority_labels(const std::vector<std::int32_t>& class_raster,
                                 const std::vector<std::int32_t>& patch_raster, int patch_count,
                                 int class_count) {
  if (class_raster.size() != patch_raster.size())
    throw std::invalid_argument("majority_labels: raster size mismatch");
  std::vector<int> counts(static_cast<std::size_t>(patch_count) * class_count, 0);
  for (std::size_t i = 0; i < class_raster.size(); ++i) {
    const int c = class_raster[i];
    const int p = patch_raster[i];
    if (c < 0 || c >= class_count || p < 0 || p >= patch_count) continue;
    ++counts[static_cast<std::size_t>(p) * class_count + c];
  }
  std::vector<int> labels(patch_count, -1);
  for (int p = 0; p < patch_count; ++p) {
    int best = 0;
    for (int c = 0; c < class_count; ++c) {
      const int n = counts[static_cast<std::size_t>(p) * class_count + c];
      if (n > best) {  // ties keep the lower class id
        best = n;
        labels[p] = c;
      }
    }
  }
  return labels;
}

void save_oracle(const GroundTruthHierarchy& h, const std::filesystem::path& path) {
  json j{{"format", "psyseg-oracle-1"},
         {"tree", h.tree.to_json()},
         {"classes", h.tree.class_names()},
         {"patch_labels", h.patch_labels}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(1) << '\n';
}

GroundTruthHierarchy load_oracle(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open oracle file " + path.string());
  const json j = json::parse(in);
  GroundTruthHierarchy h{KnowledgeTree::from_json(j.at("tree")), {}};
  if (j.contains("patch_labels")) h.patch_labels = j.at("patch_labels").get<std::vector<int>>();
  for (int label : h.patch_labels)
    if (label >= h.tree.class_count()) throw std::invalid_argument("oracle: patch label names an unknown class");
  return h;
}

}  // namespace psyseg::oracle
