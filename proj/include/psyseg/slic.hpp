#pragma once

#include <filesystem>
#include <vector>

#include "psyseg/image.hpp"

namespace psyseg::imaging {

struct PatchRecord {
  int id = 0;
  int pixel_count = 0;
  double cx = 0.0, cy = 0.0;  // centroid in pixel coordinates
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // bounding box, half-open

  int box_width() const { return x1 - x0; }
  int box_height() const { return y1 - y0; }
  bool operator==(const PatchRecord&) const = default;
};

/// Pixel -> patch partition; ids are contiguous 0..B-1.
struct SuperpixelMap {
  LabelMap labels;
  std::vector<PatchRecord> patches;

  int count() const { return static_cast<int>(patches.size()); }
  bool operator==(const SuperpixelMap&) const = default;
};

struct SlicParams {
  int target_count = 300;
  double compactness = 10.0;
  int iterations = 10;
  double smoothing = 3.0;  // Gaussian sigma (pixels) applied to the CIELAB image before clustering; 0 disables
  bool parallel = true;  // OpenMP assignment kernel; output is identical either way
};

/// CIELAB (D65) of an 8-bit sRGB image, 3 floats per pixel.
std::vector<float> rgb_to_lab(const Image& image);

SuperpixelMap slic(const Image& image, const SlicParams& params);

/// Rebuilds patch records from a contiguous label raster.
SuperpixelMap superpixels_from_labels(LabelMap labels);

/// Writes superpixels.json and labels.png into `dir`.
void save_superpixels(const SuperpixelMap& map, const std::filesystem::path& dir);
SuperpixelMap load_superpixels(const std::filesystem::path& dir);

}  // namespace psyseg::imaging
