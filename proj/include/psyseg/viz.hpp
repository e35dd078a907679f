#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "psyseg/hierarchy.hpp"
#include "psyseg/image.hpp"
#include "psyseg/slic.hpp"

namespace psyseg::viz {

using Color = std::array<std::uint8_t, 3>;

/// Classical (Torgerson) MDS: B = -1/2 J D^2 J, coordinates from the top
/// `dims` eigenpairs scaled by sqrt(eigenvalue); non-positive eigenvalues give
/// zero axes. Rows of the result are points. Eigenvector signs are fixed so the
/// largest-magnitude entry of each axis is positive.
Eigen::MatrixXd classical_mds(const Eigen::MatrixXd& distances, int dims = 3);

/// Per-axis min-max scaling to [0,255]; constant axes map to 128.
std::vector<Color> coords_to_colors(const Eigen::MatrixXd& coords);

struct PaletteAssignment {
  int level = 0;
  std::vector<Color> patch_colors;
  std::map<int, Color> node_colors;
};

enum class PaletteMode { NodeCentroids, Patches };

/// Colours for the segmentation at `level`. NodeCentroids runs MDS on the cut's
/// node centroids; Patches runs it on patch embeddings and averages per node.
PaletteAssignment make_palette(const hierarchy::HierarchyTree& tree, int level,
                               const kernels::PointMatrix& embeddings = {},
                               PaletteMode mode = PaletteMode::NodeCentroids);

inline constexpr double kDefaultOverlayAlpha = 0.6;

/// Blends each pixel with its node colour: alpha * node + (1 - alpha) * original.
imaging::Image render_overlay(const imaging::Image& image, const imaging::SuperpixelMap& map,
                              const hierarchy::HierarchyTree& tree, int level, const PaletteAssignment& palette,
                              double alpha = kDefaultOverlayAlpha);

nlohmann::json to_json(const std::vector<PaletteAssignment>& palettes);

}  // namespace psyseg::viz
