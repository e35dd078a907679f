#include <doctest.h>

#include <random>
#include <set>

#include "psyseg/viz.hpp"
#include "support.hpp"

using namespace psyseg;
using namespace psyseg::viz;
using hierarchy::HierarchyNode;
using hierarchy::HierarchyTree;

namespace {

Eigen::MatrixXd distances_of(const Eigen::MatrixXd& pts) {
  Eigen::MatrixXd d(pts.rows(), pts.rows());
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    for (Eigen::Index j = 0; j < pts.rows(); ++j) d(i, j) = (pts.row(i) - pts.row(j)).norm();
  return d;
}

double rgb_distance(const Color& a, const Color& b) {
  double s = 0;
  for (int c = 0; c < 3; ++c) s += (double(a[c]) - b[c]) * (double(a[c]) - b[c]);
  return std::sqrt(s);
}

// 9 patches as 10x10 blocks of a 30x30 image; root splits them into rows of 3.
struct Scene {
  imaging::Image image;
  imaging::SuperpixelMap map;
  HierarchyTree tree;
};

Scene scene(const std::vector<Eigen::VectorXd>& centroids) {
  Scene s;
  s.image = testing::random_image(30, 30, 5);
  imaging::LabelMap labels{30, 30, std::vector<std::int32_t>(900)};
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 30; ++x) labels.at(x, y) = (y / 10) * 3 + x / 10;
  s.map = imaging::superpixels_from_labels(labels);
  std::vector<HierarchyNode> nodes(1);
  nodes[0].members = {0, 1, 2, 3, 4, 5, 6, 7, 8};
  nodes[0].centroid = Eigen::VectorXd::Zero(centroids[0].size());
  for (int r = 0; r < 3; ++r) {
    HierarchyNode c;
    c.id = r + 1;
    c.parent = 0;
    c.level = 1;
    c.members = {3 * r, 3 * r + 1, 3 * r + 2};
    c.centroid = centroids[r];
    nodes[0].children.push_back(c.id);
    nodes.push_back(c);
  }
  s.tree = HierarchyTree(std::move(nodes));
  return s;
}

}  // namespace

TEST_CASE("classical MDS recovers Euclidean 3-D configurations") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int t = 0; t < 5; ++t) {
    Eigen::MatrixXd pts(50, 3);
    for (Eigen::Index i = 0; i < pts.size(); ++i) pts.data()[i] = u(rng);
    const auto d = distances_of(pts);
    const auto coords = classical_mds(d, 3);
    CHECK(coords.rows() == 50);
    CHECK(coords.cols() == 3);
    CHECK((distances_of(coords) - d).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("classical MDS degenerate inputs") {
  Eigen::MatrixXd line(3, 3);
  line << 0, 1, 2, 1, 0, 1, 2, 1, 0;
  const auto c = classical_mds(line, 3);
  CHECK(c.col(1).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(c.col(2).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(std::abs(std::abs(c(0, 0) - c(2, 0)) - 2.0) < 1e-9);
  CHECK(std::abs(std::abs(c(0, 0) - c(1, 0)) - 1.0) < 1e-9);

  CHECK(classical_mds(Eigen::MatrixXd::Zero(4, 4), 3).isZero());

  Eigen::MatrixXd asym = line;
  asym(0, 1) = 1.5;
  CHECK_THROWS_AS(classical_mds(asym, 3), std::invalid_argument);
  Eigen::MatrixXd diag = line;
  diag(1, 1) = 0.1;
  CHECK_THROWS_AS(classical_mds(diag, 3), std::invalid_argument);
  CHECK_THROWS_AS(classical_mds(Eigen::MatrixXd::Zero(3, 4), 3), std::invalid_argument);
}

TEST_CASE("coordinates map to colours by per-axis min-max") {
  Eigen::MatrixXd ends(2, 3);
  ends << 0, 0, 0, 1, 1, 1;
  const auto c = coords_to_colors(ends);
  CHECK(c[0] == Color{0, 0, 0});
  CHECK(c[1] == Color{255, 255, 255});

  const auto same = coords_to_colors(Eigen::MatrixXd::Constant(5, 3, 2.5));
  for (const auto& col : same) CHECK(col == Color{128, 128, 128});

  Eigen::MatrixXd mixed(3, 3);
  mixed << 0, 7, 1, 0.5, 7, 2, 1, 7, 3;
  const auto m = coords_to_colors(mixed);
  CHECK(m[1] == Color{128, 128, 128});  // 127.5 rounds up; the constant axis sits at 128
  CHECK_THROWS_AS(coords_to_colors(Eigen::MatrixXd::Zero(3, 2)), std::invalid_argument);
}

TEST_CASE("colours are invariant to a common positive rescaling") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  for (int t = 0; t < 20; ++t) {
    Eigen::MatrixXd coords(30, 3);
    for (Eigen::Index i = 0; i < coords.size(); ++i) coords.data()[i] = g(rng);
    const auto base = coords_to_colors(coords);
    CHECK(coords_to_colors(coords * 4.0) == base);
    const auto odd = coords_to_colors(coords * 3.7);
    for (std::size_t i = 0; i < base.size(); ++i)
      for (int c = 0; c < 3; ++c) CHECK(std::abs(int(odd[i][c]) - int(base[i][c])) <= 1);
  }
}

TEST_CASE("nearby clusters get nearby colours") {
  std::mt19937_64 rng(6);
  Eigen::MatrixXd centers = Eigen::MatrixXd::Zero(3, 16);
  centers(1, 0) = 1.0;   // close to cluster 0
  centers(2, 1) = 10.0;  // far from both
  const auto pts = testing::blobs(centers, 20, 0.1, rng);
  std::vector<HierarchyNode> nodes(1);
  for (int i = 0; i < 60; ++i) nodes[0].members.push_back(i);
  for (int c = 0; c < 3; ++c) {
    HierarchyNode n;
    n.id = c + 1;
    n.parent = 0;
    n.level = 1;
    for (int i = 0; i < 20; ++i) n.members.push_back(c * 20 + i);
    n.centroid = centers.row(c).transpose();
    nodes[0].children.push_back(n.id);
    nodes.push_back(n);
  }
  const HierarchyTree tree(std::move(nodes));
  for (auto mode : {PaletteMode::NodeCentroids, PaletteMode::Patches}) {
    const auto pal = make_palette(tree, 1, pts, mode);
    const double near = rgb_distance(pal.node_colors.at(1), pal.node_colors.at(2));
    CHECK(near < rgb_distance(pal.node_colors.at(1), pal.node_colors.at(3)));
    CHECK(near < rgb_distance(pal.node_colors.at(2), pal.node_colors.at(3)));
    CHECK(pal.patch_colors.size() == 60);
  }
}

TEST_CASE("overlay blending") {
  Eigen::VectorXd a(2), b(2), c(2);
  a << 0, 0;
  b << 1, 0;
  c << 0, 3;
  const auto s = scene({a, b, c});
  const auto pal = make_palette(s.tree, 1);
  CHECK(pal.node_colors.size() == 3);

  CHECK(render_overlay(s.image, s.map, s.tree, 1, pal, 0.0) == s.image);

  const auto full = render_overlay(s.image, s.map, s.tree, 1, pal, 1.0);
  std::set<Color> seen;
  for (int y = 0; y < 30; ++y)
    for (int x = 0; x < 30; ++x) seen.insert(Color{full.at(x, y, 0), full.at(x, y, 1), full.at(x, y, 2)});
  CHECK(seen.size() == 3);

  const auto half = render_overlay(s.image, s.map, s.tree, 1, pal);
  CHECK(half.width == 30);
  CHECK(half.height == 30);
  const auto& col = pal.node_colors.at(s.tree.cut_assignment(1)[0]);
  for (int k = 0; k < 3; ++k)
    CHECK(half.at(2, 3, k) == std::lround(kDefaultOverlayAlpha * col[k] + (1 - kDefaultOverlayAlpha) * s.image.at(2, 3, k)));

  CHECK_THROWS_AS(render_overlay(s.image, s.map, s.tree, 5, pal), std::invalid_argument);
  CHECK_THROWS_AS(render_overlay(s.image, s.map, s.tree, -1, pal), std::invalid_argument);
  CHECK_THROWS_AS(render_overlay(s.image, s.map, s.tree, 1, pal, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(render_overlay(s.image, s.map, s.tree, 0, pal), std::invalid_argument);  // palette is for level 1
}

TEST_CASE("palette json lists every level") {
  Eigen::VectorXd a(2), b(2), c(2);
  a << 0, 0;
  b << 1, 0;
  c << 0, 3;
  const auto s = scene({a, b, c});
  const std::vector<PaletteAssignment> pals{make_palette(s.tree, 0), make_palette(s.tree, 1)};
  const auto j = to_json(pals);
  REQUIRE(j["levels"].size() == 2);
  CHECK(j["levels"][0]["nodes"].size() == 1);
  CHECK(j["levels"][1]["nodes"].size() == 3);
  CHECK(j["levels"][1]["patches"].size() == 9);
  CHECK(j["levels"][0]["nodes"]["0"] == nlohmann::json::array({128, 128, 128}));
}
