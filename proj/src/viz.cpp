#include "psyseg/viz.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace psyseg::viz {

Eigen::MatrixXd classical_mds(const Eigen::MatrixXd& d, int dims) {
  if (d.rows() != d.cols()) throw std::invalid_argument("classical_mds: distance matrix must be square");
  if (dims < 1) throw std::invalid_argument("classical_mds: dims must be positive");
  const Eigen::Index n = d.rows();
  const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (d(i, i) != 0.0) throw std::invalid_argument("classical_mds: diagonal must be zero");
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (std::abs(d(i, j) - d(j, i)) > 1e-12 * scale) throw std::invalid_argument("classical_mds: matrix is not symmetric");
      if (d(i, j) < 0) throw std::invalid_argument("classical_mds: negative distance");
    }
  }
  Eigen::MatrixXd coords = Eigen::MatrixXd::Zero(n, dims);
  if (n == 0) return coords;

  const Eigen::MatrixXd d2 = d.array().square().matrix();
  const Eigen::MatrixXd centering =
      Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
  Eigen::MatrixXd b = -0.5 * centering * d2 * centering;
  b = 0.5 * (b + b.transpose());
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(b);
  const Eigen::VectorXd& values = solver.eigenvalues();  // ascending
  const Eigen::MatrixXd& vectors = solver.eigenvectors();
  for (int axis = 0; axis < dims && axis < n; ++axis) {
    const Eigen::Index src = n - 1 - axis;
    const double lambda = values(src);
    if (!(lambda > 0)) continue;
    Eigen::VectorXd v = vectors.col(src);
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    coords.col(axis) = v * std::sqrt(lambda);
  }
  return coords;
}

std::vector<Color> coords_to_colors(const Eigen::MatrixXd& coords) {
  if (coords.cols() != 3) throw std::invalid_argument("coords_to_colors: expected 3-D coordinates");
  std::vector<Color> out(static_cast<std::size_t>(coords.rows()));
  for (int axis = 0; axis < 3; ++axis) {
    if (coords.rows() == 0) break;
    const double lo = coords.col(axis).minCoeff(), hi = coords.col(axis).maxCoeff();
    const double range = hi - lo;
    const double magnitude = std::max(std::abs(lo), std::abs(hi));
    const bool constant = range <= 1e-12 * magnitude;
    for (Eigen::Index i = 0; i < coords.rows(); ++i) {
      const double v = constant ? 128.0 : std::round(255.0 * (coords(i, axis) - lo) / range);
      out[i][axis] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  }
  return out;
}

PaletteAssignment make_palette(const hierarchy::HierarchyTree& tree, int level, const kernels::PointMatrix& embeddings,
                               PaletteMode mode) {
  const auto cut = tree.cut(level);
  PaletteAssignment pal;
  pal.level = level;
  pal.patch_colors.assign(static_cast<std::size_t>(tree.patch_count()), Color{128, 128, 128});

  if (mode == PaletteMode::NodeCentroids) {
    const Eigen::Index n = static_cast<Eigen::Index>(cut.size());
    Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const auto& a = tree.node(cut[i]).centroid;
        const auto& b = tree.node(cut[j]).centroid;
        dist(i, j) = dist(j, i) = (a.size() == b.size() && a.size() > 0) ? (a - b).norm() : 0.0;
      }
    const auto colors = coords_to_colors(classical_mds(dist, 3));
    for (Eigen::Index i = 0; i < n; ++i) {
      pal.node_colors[cut[i]] = colors[i];
      for (int m : tree.node(cut[i]).members) pal.patch_colors[m] = colors[i];
    }
    return pal;
  }

  if (embeddings.rows() != tree.patch_count()) throw std::invalid_argument("make_palette: need one embedding per patch");
  const Eigen::MatrixXd dist = kernels::parallel::pairwise_distances(embeddings);
  pal.patch_colors = coords_to_colors(classical_mds(dist, 3));
  for (int id : cut) {
    std::array<double, 3> sum{};
    const auto& members = tree.node(id).members;
    for (int m : members)
      for (int c = 0; c < 3; ++c) sum[c] += pal.patch_colors[m][c];
    Color col{};
    for (int c = 0; c < 3; ++c) col[c] = static_cast<std::uint8_t>(std::lround(sum[c] / members.size()));
    pal.node_colors[id] = col;
  }
  return pal;
}

imaging::Image render_overlay(const imaging::Image& image, const imaging::SuperpixelMap& map,
                              const hierarchy::HierarchyTree& tree, int level, const PaletteAssignment& palette,
                              double alpha) {
  if (!(alpha >= 0 && alpha <= 1)) throw std::invalid_argument("render_overlay: alpha must lie in [0, 1]");
  if (level < 0 || level > tree.depth()) throw std::invalid_argument("render_overlay: unknown level " + std::to_string(level));
  if (map.labels.width != image.width || map.labels.height != image.height)
    throw std::invalid_argument("render_overlay: superpixel map does not match image");
  if (tree.patch_count() != map.count()) throw std::invalid_argument("render_overlay: tree does not cover the superpixels");
  const auto owner = tree.cut_assignment(level);
  std::vector<Color> patch_color(static_cast<std::size_t>(map.count()));
  for (int p = 0; p < map.count(); ++p) {
    const auto it = palette.node_colors.find(owner[p]);
    if (it == palette.node_colors.end()) throw std::invalid_argument("render_overlay: palette lacks a node of this level");
    patch_color[p] = it->second;
  }
  imaging::Image out = image;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) {
      const Color& c = patch_color[map.labels.at(x, y)];
      for (int k = 0; k < 3; ++k) {
        const double v = alpha * c[k] + (1.0 - alpha) * image.at(x, y, k);
        out.at(x, y, k) = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
      }
    }
  return out;
}

nlohmann::json to_json(const std::vector<PaletteAssignment>& palettes) {
  nlohmann::json j{{"format", "psyseg-palette-1"}, {"levels", nlohmann::json::array()}};
  for (const auto& p : palettes) {
    nlohmann::json nodes = nlohmann::json::object();
    for (const auto& [id, c] : p.node_colors) nodes[std::to_string(id)] = {c[0], c[1], c[2]};
    nlohmann::json patches = nlohmann::json::array();
    for (const auto& c : p.patch_colors) patches.push_back({c[0], c[1], c[2]});
    j["levels"].push_back({{"level", p.level}, {"nodes", nodes}, {"patches", patches}});
  }
  return j;
}

}  // namespace psyseg::viz
