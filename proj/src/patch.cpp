#include "psyseg/patch.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace psyseg::imaging {

Box context_box(const Box& box, double context_scale, int image_width, int image_height) {
  if (!(context_scale >= 1.0)) throw std::invalid_argument("context_scale must be >= 1");
  const double cx = 0.5 * (box.x0 + box.x1), cy = 0.5 * (box.y0 + box.y1);
  const double hw = 0.5 * box.width() * context_scale, hh = 0.5 * box.height() * context_scale;
  Box out{static_cast<int>(std::lround(cx - hw)), static_cast<int>(std::lround(cy - hh)),
          static_cast<int>(std::lround(cx + hw)), static_cast<int>(std::lround(cy + hh))};
  out.x0 = std::clamp(std::min(out.x0, box.x0), 0, image_width);
  out.y0 = std::clamp(std::min(out.y0, box.y0), 0, image_height);
  out.x1 = std::clamp(std::max(out.x1, box.x1), 0, image_width);
  out.y1 = std::clamp(std::max(out.y1, box.y1), 0, image_height);
  return out;
}

PatchView extract_patch(const Image& image, const SuperpixelMap& map, int patch_id, double context_scale) {
  if (patch_id < 0 || patch_id >= map.count())
    throw std::invalid_argument("unknown patch id " + std::to_string(patch_id));
  const auto& rec = map.patches[patch_id];
  PatchView view;
  view.patch_id = patch_id;
  view.crop_box = {rec.x0, rec.y0, rec.x1, rec.y1};
  view.context_box = context_box(view.crop_box, context_scale, image.width, image.height);
  view.crop = image.crop(rec.x0, rec.y0, rec.x1, rec.y1);
  view.context = image.crop(view.context_box.x0, view.context_box.y0, view.context_box.x1, view.context_box.y1);
  view.mask.assign(static_cast<std::size_t>(view.crop.width) * view.crop.height, 0);
  for (int y = rec.y0; y < rec.y1; ++y)
    for (int x = rec.x0; x < rec.x1; ++x)
      if (map.labels.at(x, y) == patch_id)
        view.mask[static_cast<std::size_t>(y - rec.y0) * view.crop.width + (x - rec.x0)] = 1;
  return view;
}

Image outlined_context(const PatchView& view, const SuperpixelMap& map, std::uint8_t r, std::uint8_t g,
                       std::uint8_t b) {
  Image out = view.context;
  const auto& cb = view.context_box;
  auto inside = [&](int x, int y) {
    return x >= 0 && y >= 0 && x < map.labels.width && y < map.labels.height && map.labels.at(x, y) == view.patch_id;
  };
  for (int y = cb.y0; y < cb.y1; ++y)
    for (int x = cb.x0; x < cb.x1; ++x) {
      if (!inside(x, y)) continue;
      if (inside(x - 1, y) && inside(x + 1, y) && inside(x, y - 1) && inside(x, y + 1)) continue;
      out.at(x - cb.x0, y - cb.y0, 0) = r;
      out.at(x - cb.x0, y - cb.y0, 1) = g;
      out.at(x - cb.x0, y - cb.y0, 2) = b;
    }
  return out;
}

}  // namespace psyseg::imaging
