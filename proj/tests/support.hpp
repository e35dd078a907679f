#pragma once

// Independent reference implementations and fixtures shared by the unit tests.
// Nothing here calls into the code under test except for data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "psyseg/hierarchy.hpp"
#include "psyseg/image.hpp"
#include "psyseg/slic.hpp"

namespace testing {

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("psyseg_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Piecewise-constant rectangles plus mild noise, so SLIC sees real edges.
inline psyseg::imaging::Image random_image(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  psyseg::imaging::Image img(w, h);
  std::uniform_int_distribution<int> byte(0, 255);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = 128;
  std::uniform_int_distribution<int> rx(0, w - 1), ry(0, h - 1);
  for (int r = 0; r < 12; ++r) {
    int x0 = rx(rng), x1 = rx(rng), y0 = ry(rng), y1 = ry(rng);
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    const int col[3] = {byte(rng), byte(rng), byte(rng)};
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<std::uint8_t>(col[c]);
  }
  std::uniform_int_distribution<int> noise(-6, 6);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(std::clamp(p + noise(rng), 0, 255));
  return img;
}

/// Number of 4-connected components of each label; every entry should be 1.
inline std::vector<int> components_per_label(const psyseg::imaging::LabelMap& m, int count) {
  std::vector<int> comps(count, 0);
  std::vector<char> seen(m.labels.size(), 0);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      const auto idx = static_cast<std::size_t>(y) * m.width + x;
      if (seen[idx]) continue;
      const int l = m.labels[idx];
      if (l < 0 || l >= count) return {};
      ++comps[l];
      std::queue<std::pair<int, int>> q;
      q.push({x, y});
      seen[idx] = 1;
      while (!q.empty()) {
        auto [cx, cy] = q.front();
        q.pop();
        const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
        for (int d = 0; d < 4; ++d) {
          const int nx = cx + dx[d], ny = cy + dy[d];
          if (nx < 0 || ny < 0 || nx >= m.width || ny >= m.height) continue;
          const auto n = static_cast<std::size_t>(ny) * m.width + nx;
          if (!seen[n] && m.labels[n] == l) {
            seen[n] = 1;
            q.push({nx, ny});
          }
        }
      }
    }
  return comps;
}

/// Silhouette straight from the definition, O(n^2).
inline double brute_silhouette(const Eigen::MatrixXd& pts, const std::vector<int>& assign) {
  const int n = static_cast<int>(pts.rows());
  const int k = *std::max_element(assign.begin(), assign.end()) + 1;
  std::vector<int> size(k, 0);
  for (int a : assign) ++size[a];
  double total = 0;
  for (int i = 0; i < n; ++i) {
    if (size[assign[i]] == 1) continue;
    std::vector<double> sum(k, 0.0);
    for (int j = 0; j < n; ++j)
      if (j != i) sum[assign[j]] += (pts.row(i) - pts.row(j)).norm();
    const double a = sum[assign[i]] / (size[assign[i]] - 1);
    double b = INFINITY;
    for (int c = 0; c < k; ++c)
      if (c != assign[i] && size[c] > 0) b = std::min(b, sum[c] / size[c]);
    const double m = std::max(a, b);
    total += m > 0 ? (b - a) / m : 0.0;
  }
  return total / n;
}

/// Dendrogram purity by enumerating every same-class pair and walking parents.
inline double brute_dendrogram_purity(const psyseg::hierarchy::HierarchyTree& tree, const std::vector<int>& labels) {
  const auto& nodes = tree.nodes();
  std::vector<int> leaf(labels.size(), -1);
  for (const auto& nd : nodes)
    if (nd.is_leaf())
      for (int m : nd.members) leaf[m] = nd.id;
  auto ancestors = [&](int v) {
    std::vector<int> out;
    for (; v >= 0; v = nodes[v].parent) out.push_back(v);
    return out;
  };
  double sum = 0;
  long pairs = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    for (std::size_t j = i + 1; j < labels.size(); ++j) {
      if (labels[i] != labels[j]) continue;
      const auto ai = ancestors(leaf[i]);
      const auto aj = ancestors(leaf[j]);
      const std::set<int> sj(aj.begin(), aj.end());
      int lca = -1;
      for (int v : ai)
        if (sj.count(v)) {
          lca = v;
          break;
        }
      const auto& mem = nodes[lca].members;
      const auto same = std::count_if(mem.begin(), mem.end(), [&](int m) { return labels[m] == labels[i]; });
      sum += static_cast<double>(same) / static_cast<double>(mem.size());
      ++pairs;
    }
  return sum / static_cast<double>(pairs);
}

/// Random tree over patches 0..n-1 built by recursive random splits.
inline psyseg::hierarchy::HierarchyTree random_tree(int n, std::mt19937_64& rng) {
  using psyseg::hierarchy::HierarchyNode;
  std::vector<HierarchyNode> nodes;
  HierarchyNode root;
  root.id = 0;
  for (int i = 0; i < n; ++i) root.members.push_back(i);
  nodes.push_back(root);
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    auto members = nodes[id].members;
    if (members.size() < 2 || nodes[id].level >= 4 || std::uniform_real_distribution<>(0, 1)(rng) < 0.2) continue;
    const int k = std::uniform_int_distribution<int>(2, std::min<int>(4, static_cast<int>(members.size())))(rng);
    std::shuffle(members.begin(), members.end(), rng);
    std::vector<std::vector<int>> parts(k);
    for (int c = 0; c < k; ++c) parts[c].push_back(members[c]);
    for (std::size_t i = k; i < members.size(); ++i)
      parts[std::uniform_int_distribution<int>(0, k - 1)(rng)].push_back(members[i]);
    for (auto& p : parts) {
      std::sort(p.begin(), p.end());
      HierarchyNode child;
      child.id = static_cast<int>(nodes.size());
      child.parent = id;
      child.level = nodes[id].level + 1;
      child.members = p;
      nodes[id].children.push_back(child.id);
      nodes.push_back(child);
      stack.push_back(child.id);
    }
  }
  return psyseg::hierarchy::HierarchyTree(std::move(nodes));
}

/// Gaussian blobs: `centers` rows, `per` points each, isotropic spread.
inline Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> blobs(const Eigen::MatrixXd& centers,
                                                                                    int per, double spread,
                                                                                    std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, spread);
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> p(centers.rows() * per, centers.cols());
  for (int c = 0; c < centers.rows(); ++c)
    for (int i = 0; i < per; ++i)
      for (int d = 0; d < centers.cols(); ++d) p(c * per + i, d) = centers(c, d) + g(rng);
  return p;
}

}  // namespace testing
