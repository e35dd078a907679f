#include "psyseg/hierarchy.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "psyseg/seed.hpp"

namespace psyseg::hierarchy {

using nlohmann::json;

double silhouette_from_distances(const Eigen::MatrixXd& dist, std::span<const int> assignment, bool parallel) {
  const Eigen::Index n = dist.rows();
  if (static_cast<Eigen::Index>(assignment.size()) != n) throw std::invalid_argument("silhouette: size mismatch");
  int k = 0;
  for (int a : assignment) {
    if (a < 0) throw std::invalid_argument("silhouette: negative cluster label");
    k = std::max(k, a + 1);
  }
  std::vector<int> size(k, 0);
  for (int a : assignment) ++size[a];
  if (std::count_if(size.begin(), size.end(), [](int s) { return s > 0; }) < 2)
    throw std::invalid_argument("silhouette: needs at least two non-empty clusters");

  const Eigen::MatrixXd sums = parallel ? kernels::parallel::cluster_distance_sums(dist, assignment, k)
                                        : kernels::serial::cluster_distance_sums(dist, assignment, k);
  double total = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int own = assignment[i];
    if (size[own] == 1) continue;
    const double a = sums(i, own) / (size[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c)
      if (c != own && size[c] > 0) b = std::min(b, sums(i, c) / size[c]);
    const double denom = std::max(a, b);
    if (denom > 0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

double silhouette(const PointMatrix& points, std::span<const int> assignment, bool parallel) {
  const Eigen::MatrixXd dist =
      parallel ? kernels::parallel::pairwise_distances(points) : kernels::serial::pairwise_distances(points);
  return silhouette_from_distances(dist, assignment, parallel);
}

void ClusteringConfig::validate() const {
  if (k_max < 2) throw std::invalid_argument("clustering: k_max must be >= 2");
  if (!(s_min > -1 && s_min < 1)) throw std::invalid_argument("clustering: s_min must lie in (-1, 1)");
  if (min_split_size < 4) throw std::invalid_argument("clustering: min_split_size must be >= 4");
  if (max_depth < 1) throw std::invalid_argument("clustering: max_depth must be >= 1");
  if (restarts < 1) throw std::invalid_argument("clustering: restarts must be >= 1");
}

json to_json(const ClusteringConfig& c) {
  return {{"k_max", c.k_max},         {"s_min", c.s_min},       {"min_split_size", c.min_split_size},
          {"max_depth", c.max_depth}, {"restarts", c.restarts}, {"seed", c.seed}};
}

ClusteringConfig clustering_config_from_json(const json& j) {
  ClusteringConfig c;
  c.k_max = j.value("k_max", c.k_max);
  c.s_min = j.value("s_min", c.s_min);
  c.min_split_size = j.value("min_split_size", c.min_split_size);
  c.max_depth = j.value("max_depth", c.max_depth);
  c.restarts = j.value("restarts", c.restarts);
  c.seed = j.value("seed", c.seed);
  c.validate();
  return c;
}

SplitDecision choose_k(const PointMatrix& points, const ClusteringConfig& config, std::uint64_t seed) {
  SplitDecision out;
  const int n = static_cast<int>(points.rows());
  const int k_hi = std::min(config.k_max, n - 1);
  if (k_hi < 2) return out;
  const Eigen::MatrixXd dist = config.parallel ? kernels::parallel::pairwise_distances(points)
                                               : kernels::serial::pairwise_distances(points);
  double best = -std::numeric_limits<double>::infinity();
  for (int k = 2; k <= k_hi; ++k) {
    auto km = kmeans(points, k, config.restarts, derive_seed(seed, {static_cast<std::uint64_t>(k)}), config.parallel);
    const double s = silhouette_from_distances(dist, km.assignment, config.parallel);
    out.silhouette_by_k.push_back(s);
    if (s > best) {
      best = s;
      out.k = k;
      out.assignment = std::move(km.assignment);
    }
  }
  out.silhouette = best;
  out.split = best >= config.s_min;
  if (!out.split) {
    out.k = 1;
    out.assignment.assign(static_cast<std::size_t>(n), 0);
  }
  return out;
}

HierarchyTree::HierarchyTree(std::vector<HierarchyNode> nodes) : nodes_(std::move(nodes)) { validate(); }

int HierarchyTree::depth() const {
  int d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.level);
  return d;
}

std::vector<int> HierarchyTree::nodes_at_level(int level) const {
  std::vector<int> out;
  for (const auto& n : nodes_)
    if (n.level == level) out.push_back(n.id);
  return out;
}

std::vector<int> HierarchyTree::cut(int level) const {
  if (level < 0 || level > depth()) throw std::invalid_argument("hierarchy has no level " + std::to_string(level));
  std::vector<int> out;
  for (const auto& n : nodes_)
    if (n.level == level || (n.level < level && n.is_leaf())) out.push_back(n.id);
  return out;
}

std::vector<int> HierarchyTree::cut_assignment(int level) const {
  std::vector<int> out(static_cast<std::size_t>(patch_count()), -1);
  for (int id : cut(level))
    for (int m : nodes_[id].members) out[m] = id;
  return out;
}

std::vector<int> HierarchyTree::leaf_of_patch() const {
  std::vector<int> out(static_cast<std::size_t>(patch_count()), -1);
  for (const auto& n : nodes_)
    if (n.is_leaf())
      for (int m : n.members) out[m] = n.id;
  return out;
}

int HierarchyTree::lca(int a, int b) const {
  while (nodes_[a].level > nodes_[b].level) a = nodes_[a].parent;
  while (nodes_[b].level > nodes_[a].level) b = nodes_[b].parent;
  while (a != b) {
    a = nodes_[a].parent;
    b = nodes_[b].parent;
  }
  return a;
}

void HierarchyTree::validate() const {
  if (nodes_.empty()) throw std::logic_error("hierarchy: no nodes");
  const auto& root = nodes_.front();
  if (root.parent != -1 || root.level != 0) throw std::logic_error("hierarchy: node 0 must be the root");
  const int n = static_cast<int>(root.members.size());
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  for (int m : root.members) {
    if (m < 0 || m >= n) throw std::logic_error("hierarchy: root members must be 0..n-1");
    if (seen[m]++) throw std::logic_error("hierarchy: duplicate root member");
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& node = nodes_[i];
    if (node.id != static_cast<int>(i)) throw std::logic_error("hierarchy: node ids must equal their index");
    if (node.members.empty()) throw std::logic_error("hierarchy: empty node");
    if (node.children.size() == 1) throw std::logic_error("hierarchy: internal node with a single child");
    if (node.children.empty()) continue;
    std::vector<int> uni;
    for (int c : node.children) {
      if (c <= node.id || c >= static_cast<int>(nodes_.size())) throw std::logic_error("hierarchy: bad child id");
      const auto& child = nodes_[c];
      if (child.parent != node.id || child.level != node.level + 1)
        throw std::logic_error("hierarchy: child parent/level mismatch");
      uni.insert(uni.end(), child.members.begin(), child.members.end());
    }
    std::sort(uni.begin(), uni.end());
    if (std::adjacent_find(uni.begin(), uni.end()) != uni.end() || uni != node.members)
      throw std::logic_error("hierarchy: node members are not the disjoint union of its children");
  }
}

json HierarchyTree::to_json() const {
  auto rec = [&](auto&& self, int id) -> json {
    const auto& n = nodes_[id];
    json j{{"id", n.id}, {"level", n.level}, {"size", n.members.size()}, {"members", n.members}};
    j["centroid"] = std::vector<double>(n.centroid.data(), n.centroid.data() + n.centroid.size());
    if (n.purity) j["purity"] = *n.purity;
    j["children"] = json::array();
    for (int c : n.children) j["children"].push_back(self(self, c));
    return j;
  };
  return json{{"format", "psyseg-hierarchy-1"}, {"depth", depth()}, {"root", rec(rec, 0)}};
}

HierarchyTree HierarchyTree::from_json(const json& j) {
  std::vector<HierarchyNode> nodes;
  auto rec = [&](auto&& self, const json& nj, int parent) -> void {
    HierarchyNode n;
    n.id = nj.at("id");
    n.parent = parent;
    n.level = nj.at("level");
    n.members = nj.at("members").get<std::vector<int>>();
    const auto c = nj.at("centroid").get<std::vector<double>>();
    n.centroid = Eigen::Map<const Eigen::VectorXd>(c.data(), static_cast<Eigen::Index>(c.size()));
    if (nj.contains("purity")) n.purity = nj.at("purity").get<double>();
    if (n.id >= static_cast<int>(nodes.size())) nodes.resize(static_cast<std::size_t>(n.id) + 1);
    const int id = n.id;
    nodes[id] = std::move(n);
    for (const auto& cj : nj.at("children")) {
      nodes[id].children.push_back(cj.at("id").get<int>());
      self(self, cj, id);
    }
  };
  rec(rec, j.at("root"), -1);
  return HierarchyTree(std::move(nodes));
}

void HierarchyTree::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json().dump(1) << '\n';
}

HierarchyTree HierarchyTree::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return from_json(json::parse(in));
}

namespace {

Eigen::VectorXd mean_of(const PointMatrix& points, const std::vector<int>& members) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(points.cols());
  for (int m : members) c += points.row(m).transpose();
  return c / static_cast<double>(members.size());
}

}  // namespace

HierarchyTree build_hierarchy(const PointMatrix& embeddings, const ClusteringConfig& config) {
  config.validate();
  const int n = static_cast<int>(embeddings.rows());
  if (n < 1) throw std::invalid_argument("build_hierarchy: no points");
  std::vector<HierarchyNode> nodes;
  HierarchyNode root;
  root.members.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) root.members[i] = i;
  root.centroid = mean_of(embeddings, root.members);
  nodes.push_back(std::move(root));

  std::deque<int> queue{0};
  while (!queue.empty()) {
    const int id = queue.front();
    queue.pop_front();
    const auto members = nodes[id].members;
    if (static_cast<int>(members.size()) < config.min_split_size || nodes[id].level >= config.max_depth) continue;
    PointMatrix sub(static_cast<Eigen::Index>(members.size()), embeddings.cols());
    for (std::size_t i = 0; i < members.size(); ++i) sub.row(static_cast<Eigen::Index>(i)) = embeddings.row(members[i]);
    const auto decision = choose_k(sub, config, derive_seed(config.seed, {static_cast<std::uint64_t>(id)}));
    if (!decision.split) continue;

    std::vector<std::vector<int>> groups(static_cast<std::size_t>(decision.k));
    for (std::size_t i = 0; i < members.size(); ++i) groups[decision.assignment[i]].push_back(members[i]);
    std::erase_if(groups, [](const auto& g) { return g.empty(); });
    if (groups.size() < 2) continue;
    std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
    for (auto& g : groups) {
      HierarchyNode child;
      child.id = static_cast<int>(nodes.size());
      child.parent = id;
      child.level = nodes[id].level + 1;
      child.centroid = mean_of(embeddings, g);
      child.members = std::move(g);
      nodes[id].children.push_back(child.id);
      queue.push_back(child.id);
      nodes.push_back(std::move(child));
    }
  }
  return HierarchyTree(std::move(nodes));
}

HierarchyTree flat_tree(int patch_count) {
  HierarchyNode root;
  root.members.resize(static_cast<std::size_t>(patch_count));
  for (int i = 0; i < patch_count; ++i) root.members[i] = i;
  return HierarchyTree({std::move(root)});
}

}  // namespace psyseg::hierarchy
