#pragma once

#include <cstdint>
#include <vector>

#include "psyseg/image.hpp"
#include "psyseg/slic.hpp"

namespace psyseg::imaging {

struct Box {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;  // half-open
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool contains(const Box& o) const { return o.x0 >= x0 && o.y0 >= y0 && o.x1 <= x1 && o.y1 <= y1; }
  bool operator==(const Box&) const = default;
};

/// What an annotator is shown for one patch: its bounding-box crop and a
/// larger surrounding window.
struct PatchView {
  int patch_id = 0;
  Box crop_box;
  Box context_box;
  Image crop;
  Image context;
  std::vector<std::uint8_t> mask;  // crop-sized, 1 where the pixel belongs to the patch

  bool in_patch(int x, int y) const { return mask[static_cast<std::size_t>(y) * crop.width + x] != 0; }
};

inline constexpr double kDefaultContextScale = 3.0;

/// Context window: the bounding box scaled by `context_scale` about its centre, clamped to the image.
Box context_box(const Box& box, double context_scale, int image_width, int image_height);

PatchView extract_patch(const Image& image, const SuperpixelMap& map, int patch_id,
                        double context_scale = kDefaultContextScale);

/// Context image with the patch boundary drawn in `outline` colour, for display.
Image outlined_context(const PatchView& view, const SuperpixelMap& map, std::uint8_t r = 255,
                       std::uint8_t g = 255, std::uint8_t b = 0);

}  // namespace psyseg::imaging
