#include "psyseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "psyseg/seed.hpp"

namespace psyseg::imaging {

namespace {

struct Cell {
  int x0, y0, x1, y1;
};

Rgb scaled(Rgb c, double s) {
  auto f = [s](std::uint8_t v) { return static_cast<std::uint8_t>(std::lround(v * s)); };
  return {f(c.r), f(c.g), f(c.b)};
}

void put(Image& img, int x, int y, Rgb c) {
  img.at(x, y, 0) = c.r;
  img.at(x, y, 1) = c.g;
  img.at(x, y, 2) = c.b;
}

void draw_lines(Image& img, const Cell& cell, const SyntheticSpec& spec, Rgb fg) {
  for (int y = cell.y0; y < cell.y1; ++y)
    for (int x = cell.x0; x < cell.x1; ++x)
      if ((x - cell.x0) % spec.stripe_period < spec.stripe_width) put(img, x, y, fg);
}

void draw_dots(Image& img, const Cell& cell, const SyntheticSpec& spec, Rgb fg, std::mt19937_64& rng) {
  const double area = static_cast<double>(cell.x1 - cell.x0) * (cell.y1 - cell.y0);
  const double r = spec.dot_radius;
  const int count = static_cast<int>(std::lround(spec.dot_coverage * area / (std::numbers::pi * r * r)));
  std::uniform_real_distribution<double> ux(cell.x0, cell.x1), uy(cell.y0, cell.y1);
  for (int i = 0; i < count; ++i) {
    const double cx = ux(rng), cy = uy(rng);
    const int xa = std::max(cell.x0, static_cast<int>(std::floor(cx - r)));
    const int xb = std::min(cell.x1 - 1, static_cast<int>(std::ceil(cx + r)));
    const int ya = std::max(cell.y0, static_cast<int>(std::floor(cy - r)));
    const int yb = std::min(cell.y1 - 1, static_cast<int>(std::ceil(cy + r)));
    for (int y = ya; y <= yb; ++y)
      for (int x = xa; x <= xb; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        if (dx * dx + dy * dy <= r * r) put(img, x, y, fg);
      }
  }
}

void draw_triangles(Image& img, const Cell& cell, const SyntheticSpec& spec, Rgb fg, std::mt19937_64& rng) {
  const double area = static_cast<double>(cell.x1 - cell.x0) * (cell.y1 - cell.y0);
  const double side = spec.triangle_side;
  const double tri_area = side * side * std::sqrt(3.0) / 4.0;
  const int count = static_cast<int>(std::lround(spec.triangle_coverage * area / tri_area));
  const double circum = side / std::sqrt(3.0);
  std::uniform_real_distribution<double> ux(cell.x0, cell.x1), uy(cell.y0, cell.y1),
      rot(0.0, 2.0 * std::numbers::pi);
  for (int i = 0; i < count; ++i) {
    const double cx = ux(rng), cy = uy(rng);
    const double phi = spec.rotate_triangles ? rot(rng) : -std::numbers::pi / 2.0;
    double vx[3], vy[3];
    for (int k = 0; k < 3; ++k) {
      const double a = phi + k * 2.0 * std::numbers::pi / 3.0;
      vx[k] = cx + circum * std::cos(a);
      vy[k] = cy + circum * std::sin(a);
    }
    const int xa = std::max(cell.x0, static_cast<int>(std::floor(cx - circum)));
    const int xb = std::min(cell.x1 - 1, static_cast<int>(std::ceil(cx + circum)));
    const int ya = std::max(cell.y0, static_cast<int>(std::floor(cy - circum)));
    const int yb = std::min(cell.y1 - 1, static_cast<int>(std::ceil(cy + circum)));
    for (int y = ya; y <= yb; ++y)
      for (int x = xa; x <= xb; ++x) {
        const double px = x + 0.5, py = y + 0.5;
        bool pos = false, neg = false;
        for (int k = 0; k < 3; ++k) {
          const int n = (k + 1) % 3;
          const double cross = (vx[n] - vx[k]) * (py - vy[k]) - (vy[n] - vy[k]) * (px - vx[k]);
          pos |= cross > 0;
          neg |= cross < 0;
        }
        if (!(pos && neg)) put(img, x, y, fg);
      }
  }
}

}  // namespace

SyntheticSpec SyntheticSpec::paper_scale() {
  SyntheticSpec s;
  s.width = 3600;
  s.height = 1800;
  return s;
}

SyntheticSpec SyntheticSpec::desk_scale() { return SyntheticSpec{}; }

const char* texture_name(Texture t) {
  switch (t) {
    case Texture::Lines: return "lines";
    case Texture::Dots: return "dots";
    case Texture::Triangles: return "triangles";
  }
  return "?";
}

std::string synthetic_class_name(const SyntheticSpec& spec, int class_id) {
  return std::string(spec.color_names[class_id / 3]) + "+" + texture_name(static_cast<Texture>(class_id % 3));
}

SyntheticImage generate_synthetic(const SyntheticSpec& spec) {
  if (spec.grid_rows < 1 || spec.grid_cols < 1 || spec.grid_rows * spec.grid_cols < kSyntheticClasses)
    throw ConfigError("synthetic layout needs at least 9 grid cells");
  if (spec.stripe_period < 2 || spec.stripe_width < 1 || spec.stripe_width >= spec.stripe_period ||
      spec.dot_radius < 1 || spec.triangle_side < 3)
    throw ConfigError("invalid texture parameters");
  const int cell_w = spec.width / spec.grid_cols;
  const int cell_h = spec.height / spec.grid_rows;
  const int texture_extent = std::max({spec.stripe_period, 2 * spec.dot_radius + 1, spec.triangle_side});
  if (cell_w < 4 * texture_extent || cell_h < 4 * texture_extent)
    throw ConfigError("grid cell " + std::to_string(cell_w) + "x" + std::to_string(cell_h) +
                      " is too small to render textures of extent " + std::to_string(texture_extent));
  for (std::size_t i = 0; i < spec.colors.size(); ++i)
    for (std::size_t j = i + 1; j < spec.colors.size(); ++j)
      if (spec.colors[i] == spec.colors[j]) throw ConfigError("synthetic colors must be distinct");

  SyntheticImage out;
  out.image = Image(spec.width, spec.height);
  out.truth = LabelMap{spec.width, spec.height, std::vector<std::int32_t>(out.image.pixel_count(), 0)};

  // Every consecutive block of 9 cells holds each class once.
  std::mt19937_64 layout_rng(derive_seed(spec.seed, {0}));
  const int cells = spec.grid_rows * spec.grid_cols;
  std::array<int, kSyntheticClasses> perm{};
  for (int c = 0; c < cells; ++c) {
    if (c % kSyntheticClasses == 0) {
      for (int k = 0; k < kSyntheticClasses; ++k) perm[k] = k;
      std::shuffle(perm.begin(), perm.end(), layout_rng);
    }
    out.cell_classes.push_back(perm[c % kSyntheticClasses]);
  }

  for (int r = 0; r < spec.grid_rows; ++r) {
    for (int c = 0; c < spec.grid_cols; ++c) {
      const int idx = r * spec.grid_cols + c;
      // The last row/column absorbs the remainder.
      const Cell cell{c * cell_w, r * cell_h, c + 1 == spec.grid_cols ? spec.width : (c + 1) * cell_w,
                      r + 1 == spec.grid_rows ? spec.height : (r + 1) * cell_h};
      const int cls = out.cell_classes[idx];
      const Rgb base = spec.colors[cls / 3];
      const Rgb fg = scaled(base, spec.foreground_scale);
      for (int y = cell.y0; y < cell.y1; ++y)
        for (int x = cell.x0; x < cell.x1; ++x) {
          put(out.image, x, y, base);
          out.truth.at(x, y) = cls;
        }
      std::mt19937_64 rng(derive_seed(spec.seed, {1, static_cast<std::uint64_t>(idx)}));
      switch (static_cast<Texture>(cls % 3)) {
        case Texture::Lines: draw_lines(out.image, cell, spec, fg); break;
        case Texture::Dots: draw_dots(out.image, cell, spec, fg, rng); break;
        case Texture::Triangles: draw_triangles(out.image, cell, spec, fg, rng); break;
      }
    }
  }

  for (int color = 0; color < 3; ++color) {
    const int node = out.color_first.add_node(out.color_first.root(), spec.color_names[color]);
    for (int tex = 0; tex < 3; ++tex)
      out.color_first.add_leaf(node, synthetic_class_name(spec, color * 3 + tex), color * 3 + tex);
  }
  for (int tex = 0; tex < 3; ++tex) {
    const int node = out.texture_first.add_node(out.texture_first.root(), texture_name(static_cast<Texture>(tex)));
    for (int color = 0; color < 3; ++color)
      out.texture_first.add_leaf(node, synthetic_class_name(spec, color * 3 + tex), color * 3 + tex);
  }
  return out;
}

}  // namespace psyseg::imaging
