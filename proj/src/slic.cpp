#include "psyseg/slic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "psyseg/kernels.hpp"

namespace psyseg::imaging {

namespace {

double srgb_to_linear(double c) {
  c /= 255.0;
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double lab_f(double t) {
  constexpr double eps = 216.0 / 24389.0, kappa = 24389.0 / 27.0;
  return t > eps ? std::cbrt(t) : (kappa * t + 16.0) / 116.0;
}

using kernels::SlicCenter;

// Separable Gaussian on interleaved 3-channel data, borders clamped.
std::vector<float> gaussian_blur(const std::vector<float>& src, int w, int h, double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * r + 1);
  double total = 0;
  for (int i = -r; i <= r; ++i) total += kernel[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (auto& k : kernel) k /= total;

  std::vector<float> tmp(src.size()), out(src.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int i = -r; i <= r; ++i) {
          const int xx = std::clamp(x + i, 0, w - 1);
          acc += kernel[i + r] * src[(static_cast<std::size_t>(y) * w + xx) * 3 + c];
        }
        tmp[(static_cast<std::size_t>(y) * w + x) * 3 + c] = static_cast<float>(acc);
      }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        double acc = 0;
        for (int i = -r; i <= r; ++i) {
          const int yy = std::clamp(y + i, 0, h - 1);
          acc += kernel[i + r] * tmp[(static_cast<std::size_t>(yy) * w + x) * 3 + c];
        }
        out[(static_cast<std::size_t>(y) * w + x) * 3 + c] = static_cast<float>(acc);
      }
  return out;
}

std::vector<SlicCenter> seed_centers(const std::vector<float>& lab, int w, int h, int target, double& step) {
  const double s = std::sqrt(static_cast<double>(w) * h / target);
  const int nx = std::max(1, static_cast<int>(std::lround(w / s)));
  const int ny = std::max(1, static_cast<int>(std::lround(h / s)));
  const double sx = static_cast<double>(w) / nx, sy = static_cast<double>(h) / ny;
  step = std::max(sx, sy);

  auto gradient = [&](int x, int y) {
    auto px = [&](int xx, int yy) { return &lab[(static_cast<std::size_t>(yy) * w + xx) * 3]; };
    const int xl = std::max(0, x - 1), xr = std::min(w - 1, x + 1);
    const int yu = std::max(0, y - 1), yd = std::min(h - 1, y + 1);
    double g = 0;
    for (int c = 0; c < 3; ++c) {
      const double dx = px(xr, y)[c] - px(xl, y)[c];
      const double dy = px(x, yd)[c] - px(x, yu)[c];
      g += dx * dx + dy * dy;
    }
    return g;
  };

  std::vector<SlicCenter> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      int cx = std::min(w - 1, static_cast<int>((i + 0.5) * sx));
      int cy = std::min(h - 1, static_cast<int>((j + 0.5) * sy));
      // Move to the lowest-gradient position in the 3x3 neighbourhood.
      int bx = cx, by = cy;
      double best = gradient(cx, cy);
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int x = cx + dx, y = cy + dy;
          if (x < 0 || y < 0 || x >= w || y >= h) continue;
          const double g = gradient(x, y);
          if (g < best) {
            best = g;
            bx = x;
            by = y;
          }
        }
      const float* p = &lab[(static_cast<std::size_t>(by) * w + bx) * 3];
      centers.push_back({p[0], p[1], p[2], static_cast<double>(bx), static_cast<double>(by)});
    }
  return centers;
}

// Relabels so every patch is a single 4-connected component. Components that
// are not the largest piece of their label, or are smaller than `min_size`,
// merge into the colour-nearest adjacent component that starts earlier in
// raster order (so the union stays connected).
std::vector<std::int32_t> enforce_connectivity(const std::vector<std::int32_t>& labels,
                                               const std::vector<float>& lab, int w, int h, int min_size) {
  const std::size_t n = labels.size();
  std::vector<std::int32_t> comp(n, -1);
  std::vector<int> comp_size, comp_label;
  std::vector<std::size_t> comp_first;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < n; ++start) {
    if (comp[start] >= 0) continue;
    const int id = static_cast<int>(comp_size.size());
    comp_size.push_back(0);
    comp_label.push_back(labels[start]);
    comp_first.push_back(start);
    comp[start] = id;
    stack.assign(1, start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++comp_size[id];
      const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
      const std::size_t nb[4] = {p - 1, p + 1, p - w, p + w};
      const bool ok[4] = {x > 0, x + 1 < w, y > 0, y + 1 < h};
      for (int k = 0; k < 4; ++k)
        if (ok[k] && comp[nb[k]] < 0 && labels[nb[k]] == labels[start]) {
          comp[nb[k]] = id;
          stack.push_back(nb[k]);
        }
    }
  }
  const int ncomp = static_cast<int>(comp_size.size());

  // Largest component per original label (first in raster order on ties).
  std::int32_t max_label = 0;
  for (auto l : comp_label) max_label = std::max(max_label, l);
  std::vector<int> main_comp(static_cast<std::size_t>(max_label) + 2, -1);
  for (int c = 0; c < ncomp; ++c) {
    const std::size_t l = static_cast<std::size_t>(comp_label[c] + 1);  // label -1 (unreached) -> slot 0
    if (main_comp[l] < 0 || comp_size[c] > comp_size[main_comp[l]]) main_comp[l] = c;
  }

  std::vector<double> mean(static_cast<std::size_t>(ncomp) * 3, 0.0);
  for (std::size_t p = 0; p < n; ++p)
    for (int k = 0; k < 3; ++k) mean[comp[p] * 3 + k] += lab[p * 3 + k];
  for (int c = 0; c < ncomp; ++c)
    for (int k = 0; k < 3; ++k) mean[c * 3 + k] /= comp_size[c];

  // Neighbouring components with a smaller id (earlier raster start).
  std::vector<std::vector<int>> earlier(ncomp);
  for (std::size_t p = 0; p < n; ++p) {
    const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
    const int c = comp[p];
    if (x + 1 < w && comp[p + 1] != c) {
      const int o = comp[p + 1];
      earlier[std::max(c, o)].push_back(std::min(c, o));
    }
    if (y + 1 < h && comp[p + w] != c) {
      const int o = comp[p + w];
      earlier[std::max(c, o)].push_back(std::min(c, o));
    }
  }

  std::vector<int> final_label(ncomp, -1);
  std::vector<double> seg_sum;  // colour sums per final segment
  std::vector<int> seg_size;
  int next = 0;
  for (int c = 0; c < ncomp; ++c) {
    const bool unreached = comp_label[c] < 0;
    const bool keep = !unreached && main_comp[comp_label[c] + 1] == c && comp_size[c] >= min_size;
    int target = -1;
    if (!keep && !earlier[c].empty()) {
      double best = std::numeric_limits<double>::infinity();
      auto& cand = earlier[c];
      std::sort(cand.begin(), cand.end());
      cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
      for (int o : cand) {
        const int seg = final_label[o];
        double d = 0;
        for (int k = 0; k < 3; ++k) {
          const double diff = mean[c * 3 + k] - seg_sum[seg * 3 + k] / seg_size[seg];
          d += diff * diff;
        }
        if (d < best) {
          best = d;
          target = seg;
        }
      }
    }
    if (target < 0) {
      target = next++;
      seg_sum.resize(static_cast<std::size_t>(next) * 3, 0.0);
      seg_size.push_back(0);
    }
    final_label[c] = target;
    for (int k = 0; k < 3; ++k) seg_sum[target * 3 + k] += mean[c * 3 + k] * comp_size[c];
    seg_size[target] += comp_size[c];
  }

  std::vector<std::int32_t> out(n);
  for (std::size_t p = 0; p < n; ++p) out[p] = final_label[comp[p]];
  return out;
}

}  // namespace

std::vector<float> rgb_to_lab(const Image& image) {
  // Lookup table for the sRGB transfer curve.
  std::array<double, 256> lin{};
  for (int v = 0; v < 256; ++v) lin[v] = srgb_to_linear(v);
  std::vector<float> lab(image.pixel_count() * 3);
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    const double r = lin[image.pixels[i * 3]], g = lin[image.pixels[i * 3 + 1]], b = lin[image.pixels[i * 3 + 2]];
    const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.95047;
    const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.08883;
    const double fx = lab_f(x), fy = lab_f(y), fz = lab_f(z);
    lab[i * 3] = static_cast<float>(116.0 * fy - 16.0);
    lab[i * 3 + 1] = static_cast<float>(500.0 * (fx - fy));
    lab[i * 3 + 2] = static_cast<float>(200.0 * (fy - fz));
  }
  return lab;
}

SuperpixelMap slic(const Image& image, const SlicParams& params) {
  const auto n = static_cast<long long>(image.pixel_count());
  if (params.target_count < 2 || params.target_count > n)
    throw std::invalid_argument("slic: target_count must lie in [2, pixel count], got " +
                                std::to_string(params.target_count));
  if (!(params.compactness > 0)) throw std::invalid_argument("slic: compactness must be positive");
  if (params.iterations < 1) throw std::invalid_argument("slic: iterations must be >= 1");
  if (!(params.smoothing >= 0)) throw std::invalid_argument("slic: smoothing must be non-negative");

  const int w = image.width, h = image.height;
  const auto lab = params.smoothing > 0 ? gaussian_blur(rgb_to_lab(image), w, h, params.smoothing) : rgb_to_lab(image);
  double step = 1.0;
  auto centers = seed_centers(lab, w, h, params.target_count, step);
  const kernels::SlicWindow win{w, h, step, params.compactness};

  std::vector<std::int32_t> labels(static_cast<std::size_t>(n), -1);
  std::vector<double> distance(static_cast<std::size_t>(n));
  for (int it = 0; it < params.iterations; ++it) {
    if (params.parallel)
      kernels::parallel::slic_assign(lab, win, centers, labels, distance);
    else
      kernels::serial::slic_assign(lab, win, centers, labels, distance);

    std::vector<double> sum(centers.size() * 5, 0.0);
    std::vector<long long> count(centers.size(), 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * w + x;
        const int k = labels[i];
        if (k < 0) continue;
        double* s = &sum[static_cast<std::size_t>(k) * 5];
        s[0] += lab[i * 3];
        s[1] += lab[i * 3 + 1];
        s[2] += lab[i * 3 + 2];
        s[3] += x;
        s[4] += y;
        ++count[k];
      }
    for (std::size_t k = 0; k < centers.size(); ++k) {
      if (count[k] == 0) continue;
      const double* s = &sum[k * 5];
      const double c = static_cast<double>(count[k]);
      centers[k] = {s[0] / c, s[1] / c, s[2] / c, s[3] / c, s[4] / c};
    }
  }

  const int min_size = std::max(1, static_cast<int>(n / params.target_count / 4));
  LabelMap map{w, h, enforce_connectivity(labels, lab, w, h, min_size)};
  return superpixels_from_labels(std::move(map));
}

SuperpixelMap superpixels_from_labels(LabelMap labels) {
  int count = 0;
  for (auto l : labels.labels) {
    if (l < 0) throw std::invalid_argument("superpixel labels must be non-negative");
    count = std::max(count, l + 1);
  }
  std::vector<PatchRecord> patches(static_cast<std::size_t>(count));
  std::vector<double> sx(count, 0.0), sy(count, 0.0);
  for (int i = 0; i < count; ++i) {
    patches[i].id = i;
    patches[i].x0 = labels.width;
    patches[i].y0 = labels.height;
  }
  for (int y = 0; y < labels.height; ++y)
    for (int x = 0; x < labels.width; ++x) {
      auto& p = patches[labels.at(x, y)];
      ++p.pixel_count;
      sx[p.id] += x;
      sy[p.id] += y;
      p.x0 = std::min(p.x0, x);
      p.y0 = std::min(p.y0, y);
      p.x1 = std::max(p.x1, x + 1);
      p.y1 = std::max(p.y1, y + 1);
    }
  for (auto& p : patches) {
    if (p.pixel_count == 0) throw std::invalid_argument("superpixel labels are not contiguous");
    p.cx = sx[p.id] / p.pixel_count;
    p.cy = sy[p.id] / p.pixel_count;
  }
  return SuperpixelMap{std::move(labels), std::move(patches)};
}

void save_superpixels(const SuperpixelMap& map, const std::filesystem::path& dir) {
  nlohmann::json j{{"format", "psyseg-superpixels-1"},
                   {"width", map.labels.width},
                   {"height", map.labels.height},
                   {"count", map.count()},
                   {"patches", nlohmann::json::array()}};
  for (const auto& p : map.patches)
    j["patches"].push_back({{"id", p.id},
                            {"pixels", p.pixel_count},
                            {"centroid", {p.cx, p.cy}},
                            {"bbox", {p.x0, p.y0, p.x1, p.y1}}});
  std::ofstream out(dir / "superpixels.json");
  if (!out) throw std::runtime_error("cannot write " + (dir / "superpixels.json").string());
  out << j.dump(1) << '\n';
  save_label_png(map.labels, dir / "labels.png");
}

SuperpixelMap load_superpixels(const std::filesystem::path& dir) {
  std::ifstream in(dir / "superpixels.json");
  if (!in) throw std::runtime_error("cannot open " + (dir / "superpixels.json").string());
  const auto j = nlohmann::json::parse(in);
  auto map = superpixels_from_labels(load_label_png(dir / "labels.png"));
  if (map.count() != j.at("count").get<int>())
    throw std::runtime_error("superpixels.json disagrees with labels.png");
  return map;
}

}  // namespace psyseg::imaging
