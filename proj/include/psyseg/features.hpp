#pragma once

#include <vector>

#include <Eigen/Dense>

#include "psyseg/patch.hpp"

namespace psyseg::embedding {

using FeatureVector = Eigen::VectorXd;

/// Per region: channel mean (3) and std (3) scaled to [0,1], 8-bin histograms per
/// channel (24), Sobel magnitude histogram (8), magnitude-weighted orientation
/// histogram (8). Crop statistics use patch pixels only; context uses the whole window.
inline constexpr int kRegionFeatures = 46;
inline constexpr int kFeatureDim = 2 * kRegionFeatures;
inline constexpr double kMagnitudeBinWidth = 48.0;

/// Region descriptor; `mask` may be empty (all pixels).
Eigen::VectorXd describe_region(const imaging::Image& image, const std::vector<std::uint8_t>& mask);

FeatureVector describe_patch(const imaging::PatchView& view);

/// Descriptors for every patch (rows), computed in parallel.
Eigen::MatrixXd describe_all(const imaging::Image& image, const imaging::SuperpixelMap& map, double context_scale);

}  // namespace psyseg::embedding
