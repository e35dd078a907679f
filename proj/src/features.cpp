#include "psyseg/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace psyseg::embedding {

Eigen::VectorXd describe_region(const imaging::Image& image, const std::vector<std::uint8_t>& mask) {
  const int w = image.width, h = image.height;
  auto used = [&](int x, int y) { return mask.empty() || mask[static_cast<std::size_t>(y) * w + x] != 0; };

  Eigen::VectorXd f = Eigen::VectorXd::Zero(kRegionFeatures);
  double sum[3] = {0, 0, 0}, sum2[3] = {0, 0, 0};
  double n = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!used(x, y)) continue;
      n += 1;
      for (int c = 0; c < 3; ++c) {
        const double v = image.at(x, y, c);
        sum[c] += v;
        sum2[c] += v * v;
        f(6 + c * 8 + (image.at(x, y, c) >> 5)) += 1;
      }
    }
  if (n == 0) return f;
  for (int c = 0; c < 3; ++c) {
    const double mean = sum[c] / n;
    f(c) = mean / 255.0;
    f(3 + c) = std::sqrt(std::max(0.0, sum2[c] / n - mean * mean)) / 255.0;
  }
  f.segment(6, 24) /= n;

  std::vector<double> gray(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      gray[static_cast<std::size_t>(y) * w + x] =
          0.299 * image.at(x, y, 0) + 0.587 * image.at(x, y, 1) + 0.114 * image.at(x, y, 2);
  auto g = [&](int x, int y) {
    x = std::clamp(x, 0, w - 1);
    y = std::clamp(y, 0, h - 1);
    return gray[static_cast<std::size_t>(y) * w + x];
  };
  double total_mag = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!used(x, y)) continue;
      const double gx = (g(x + 1, y - 1) + 2 * g(x + 1, y) + g(x + 1, y + 1)) -
                        (g(x - 1, y - 1) + 2 * g(x - 1, y) + g(x - 1, y + 1));
      const double gy = (g(x - 1, y + 1) + 2 * g(x, y + 1) + g(x + 1, y + 1)) -
                        (g(x - 1, y - 1) + 2 * g(x, y - 1) + g(x + 1, y - 1));
      const double mag = std::hypot(gx, gy);
      f(30 + std::min(7, static_cast<int>(mag / kMagnitudeBinWidth))) += 1;
      if (mag > 0) {
        // Unsigned orientation, bins centred on multiples of pi/8 (bin 0 = horizontal gradient).
        double theta = std::atan2(gy, gx);
        if (theta < 0) theta += std::numbers::pi;
        const int bin = static_cast<int>(std::floor((theta + std::numbers::pi / 16) / (std::numbers::pi / 8))) % 8;
        f(38 + bin) += mag;
        total_mag += mag;
      }
    }
  f.segment(30, 8) /= n;
  if (total_mag > 0) f.segment(38, 8) /= total_mag;
  return f;
}

FeatureVector describe_patch(const imaging::PatchView& view) {
  FeatureVector f(kFeatureDim);
  f.head(kRegionFeatures) = describe_region(view.crop, view.mask);
  f.tail(kRegionFeatures) = describe_region(view.context, {});
  return f;
}

Eigen::MatrixXd describe_all(const imaging::Image& image, const imaging::SuperpixelMap& map, double context_scale) {
  Eigen::MatrixXd out(map.count(), kFeatureDim);
#pragma omp parallel for schedule(dynamic, 4)
  for (int p = 0; p < map.count(); ++p)
    out.row(p) = describe_patch(imaging::extract_patch(image, map, p, context_scale)).transpose();
  return out;
}

}  // namespace psyseg::embedding
