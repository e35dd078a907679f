#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace psyseg::imaging {

/// 8-bit interleaved RGB raster.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 3 bytes per pixel

  Image() = default;
  Image(int w, int h, std::uint8_t fill = 0);

  std::size_t index(int x, int y) const { return (static_cast<std::size_t>(y) * width + x) * 3; }
  std::uint8_t& at(int x, int y, int c) { return pixels[index(x, y) + c]; }
  std::uint8_t at(int x, int y, int c) const { return pixels[index(x, y) + c]; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  Image crop(int x0, int y0, int x1, int y1) const;

  bool operator==(const Image&) const = default;
};

/// Per-pixel 16-bit label raster (superpixel ids, class ids).
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> labels;

  std::int32_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::int32_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }

  bool operator==(const LabelMap&) const = default;
};

class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Image load_image(const std::filesystem::path& path);
void save_image(const Image& image, const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const Image& image);
Image decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name = "<memory>");

/// Labels are stored as 16-bit grayscale; values must lie in [0, 65535].
void save_label_png(const LabelMap& map, const std::filesystem::path& path);
LabelMap load_label_png(const std::filesystem::path& path);

}  // namespace psyseg::imaging
