#pragma once

#include <array>
#include <cstdint>

#include "psyseg/image.hpp"
#include "psyseg/oracle.hpp"

namespace psyseg::imaging {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

enum class Texture { Lines = 0, Dots = 1, Triangles = 2 };

/// Color x texture test image. Class id = color_index * 3 + texture_index.
struct SyntheticSpec {
  int width = 1200;
  int height = 600;
  int grid_rows = 3;
  int grid_cols = 3;
  std::array<Rgb, 3> colors{Rgb{144, 238, 144}, Rgb{34, 139, 34}, Rgb{0, 100, 0}};
  std::array<const char*, 3> color_names{"light", "normal", "dark"};
  double foreground_scale = 0.55;  // texture strokes are the base color scaled by this
  int stripe_period = 8;
  int stripe_width = 3;
  int dot_radius = 2;
  double dot_coverage = 0.3;
  int triangle_side = 14;
  bool rotate_triangles = false;  // false: upright triangles; true: uniformly random orientation
  double triangle_coverage = 0.3;
  std::uint64_t seed = 1;

  static SyntheticSpec paper_scale();
  static SyntheticSpec desk_scale();
};

struct SyntheticImage {
  Image image;
  LabelMap truth;                         // class id per pixel
  std::vector<int> cell_classes;          // grid cell (row-major) -> class id
  oracle::KnowledgeTree color_first;      // root -> colors -> classes
  oracle::KnowledgeTree texture_first;    // root -> textures -> classes
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kSyntheticClasses = 9;
const char* texture_name(Texture t);
std::string synthetic_class_name(const SyntheticSpec& spec, int class_id);

SyntheticImage generate_synthetic(const SyntheticSpec& spec);

}  // namespace psyseg::imaging
