#include <doctest.h>

#include <fstream>
#include <map>
#include <set>

#include "psyseg/features.hpp"
#include "psyseg/image.hpp"
#include "psyseg/patch.hpp"
#include "psyseg/slic.hpp"
#include "psyseg/synthetic.hpp"
#include "support.hpp"

using namespace psyseg;
using namespace psyseg::imaging;

TEST_CASE("png roundtrip keeps every pixel") {
  Image img(2, 2);
  const std::uint8_t px[12] = {255, 0, 0, 0, 255, 0, 0, 0, 255, 10, 20, 30};
  std::copy(px, px + 12, img.pixels.begin());
  const auto back = decode_png(encode_png(img));
  CHECK(back == img);

  const auto dir = testing::scratch_dir("png");
  save_image(img, dir / "a.png");
  const auto loaded = load_image(dir / "a.png");
  CHECK(loaded == img);
  save_image(loaded, dir / "b.png");
  CHECK(load_image(dir / "b.png").pixels == loaded.pixels);
}

TEST_CASE("16-bit grayscale is rejected as an RGB image") {
  const auto dir = testing::scratch_dir("png16");
  LabelMap m{3, 2, {0, 1, 2, 300, 4000, 65535}};
  save_label_png(m, dir / "labels.png");
  CHECK(load_label_png(dir / "labels.png") == m);
  try {
    load_image(dir / "labels.png");
    FAIL("expected a decode error");
  } catch (const ImageError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("unsupported format") != std::string::npos);
    CHECK(msg.find("labels.png") != std::string::npos);
  }
}

TEST_CASE("missing or out-of-range files are errors") {
  CHECK_THROWS_AS(load_image("/nonexistent/psyseg.png"), ImageError);
  const auto dir = testing::scratch_dir("pngbad");
  LabelMap big{1, 1, {70000}};
  CHECK_THROWS_AS(save_label_png(big, dir / "x.png"), ImageError);
  std::ofstream(dir / "junk.png") << "not a png";
  CHECK_THROWS_AS(load_image(dir / "junk.png"), ImageError);
}

TEST_CASE("synthetic generator is deterministic and has nine classes") {
  const auto spec = SyntheticSpec::desk_scale();
  CHECK(spec.width == 1200);
  CHECK(spec.height == 600);
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  CHECK(a.image == b.image);
  CHECK(a.truth == b.truth);

  std::map<int, long> hist;
  for (auto l : a.truth.labels) ++hist[l];
  CHECK(hist.size() == 9);
  for (auto [cls, n] : hist) {
    CHECK(cls >= 0);
    CHECK(cls < 9);
    CHECK(n > 0);
  }

  auto other = spec;
  other.seed = 2;
  CHECK_FALSE(generate_synthetic(other).image == a.image);
}

TEST_CASE("both reference hierarchies share the nine leaves") {
  const auto s = generate_synthetic(SyntheticSpec::desk_scale());
  auto names = [](const oracle::KnowledgeTree& t) {
    auto v = t.class_names();
    return std::set<std::string>(v.begin(), v.end());
  };
  CHECK(s.color_first.class_count() == 9);
  CHECK(names(s.color_first) == names(s.texture_first));
  CHECK(s.color_first.max_depth() == 2);
  CHECK(s.texture_first.max_depth() == 2);
}

TEST_CASE("paper-scale cells are dominated by their base colour") {
  const auto spec = SyntheticSpec::paper_scale();
  CHECK(spec.width == 3600);
  CHECK(spec.height == 1800);
  const auto s = generate_synthetic(spec);
  std::vector<std::map<std::array<int, 3>, long>> counts(9);
  for (int y = 0; y < s.image.height; y += 3)
    for (int x = 0; x < s.image.width; x += 3) {
      const int cls = s.truth.at(x, y);
      ++counts[cls][{s.image.at(x, y, 0), s.image.at(x, y, 1), s.image.at(x, y, 2)}];
    }
  for (int cls = 0; cls < 9; ++cls) {
    auto best = std::max_element(counts[cls].begin(), counts[cls].end(),
                                 [](auto& l, auto& r) { return l.second < r.second; });
    const auto& base = spec.colors[cls / 3];
    CHECK(best->first == std::array<int, 3>{base.r, base.g, base.b});
  }
}

TEST_CASE("cells too small for the textures are a configuration error") {
  auto spec = SyntheticSpec::desk_scale();
  spec.width = 90;
  spec.height = 60;
  CHECK_THROWS_AS(generate_synthetic(spec), ConfigError);
}

TEST_CASE("slic partitions random images into connected patches near the target count") {
  const int targets[10] = {50, 80, 120, 200, 300, 400, 500, 650, 800, 1000};
  for (int i = 0; i < 10; ++i) {
    CAPTURE(i);
    const auto img = testing::random_image(256 + 16 * i, 256 + 8 * i, 100 + i);
    SlicParams p;
    p.target_count = targets[i];
    const auto map = slic(img, p);
    CHECK(std::abs(map.count() - p.target_count) <= 0.2 * p.target_count);
    REQUIRE(map.labels.labels.size() == img.pixel_count());
    const auto comps = testing::components_per_label(map.labels, map.count());
    REQUIRE(comps.size() == static_cast<std::size_t>(map.count()));
    for (int c : comps) CHECK(c == 1);
    long total = 0;
    for (const auto& rec : map.patches) total += rec.pixel_count;
    CHECK(total == static_cast<long>(img.pixel_count()));
  }
}

TEST_CASE("slic on a uniform image tiles the plane") {
  Image img(300, 300, 90);
  SlicParams p;
  p.target_count = 100;
  const auto map = slic(img, p);
  CHECK(map.count() >= 80);
  CHECK(map.count() <= 120);
  for (int c : testing::components_per_label(map.labels, map.count())) CHECK(c == 1);
}

TEST_CASE("slic is deterministic and the parallel sweep matches the serial one") {
  const auto img = testing::random_image(256, 256, 7);
  SlicParams p;
  p.target_count = 150;
  const auto a = slic(img, p);
  CHECK(slic(img, p) == a);
  p.parallel = false;
  CHECK(slic(img, p) == a);
}

TEST_CASE("slic rejects out-of-range targets") {
  Image img(10, 10);
  SlicParams p;
  p.target_count = 1;
  CHECK_THROWS_AS(slic(img, p), std::invalid_argument);
  p.target_count = 101;
  CHECK_THROWS_AS(slic(img, p), std::invalid_argument);
}

TEST_CASE("superpixels persist through json and a 16-bit label image") {
  const auto img = testing::random_image(256, 256, 3);
  SlicParams p;
  p.target_count = 120;
  const auto map = slic(img, p);
  const auto dir = testing::scratch_dir("sp");
  save_superpixels(map, dir);
  CHECK(load_superpixels(dir) == map);
}

TEST_CASE("context window geometry") {
  CHECK(context_box(Box{40, 40, 60, 60}, 2.0, 200, 200) == Box{30, 30, 70, 70});
  CHECK(context_box(Box{40, 40, 60, 60}, 1.0, 200, 200) == Box{40, 40, 60, 60});
  const auto corner = context_box(Box{0, 0, 10, 10}, 3.0, 50, 50);
  CHECK(corner.x0 == 0);
  CHECK(corner.y0 == 0);
  CHECK(corner.x1 <= 50);
  CHECK(corner.y1 <= 50);
  CHECK(corner.contains(Box{0, 0, 10, 10}));
}

TEST_CASE("patch views hold the crop inside the context") {
  const auto img = testing::random_image(256, 256, 11);
  SlicParams p;
  p.target_count = 60;
  const auto map = slic(img, p);
  for (int id = 0; id < map.count(); ++id) {
    const auto v = extract_patch(img, map, id, 3.0);
    CHECK(v.context_box.contains(v.crop_box));
    CHECK(v.crop.width == v.crop_box.width());
    CHECK(v.context.width == v.context_box.width());
    long inside = 0;
    for (auto m : v.mask) inside += m;
    CHECK(inside == map.patches[id].pixel_count);
    const auto same = extract_patch(img, map, id, 1.0);
    CHECK(same.context == same.crop);
  }
  CHECK_THROWS_AS(extract_patch(img, map, map.count()), std::invalid_argument);
}

TEST_CASE("uniform red region: means, zero spread, zero gradients") {
  Image red(12, 12);
  for (int y = 0; y < 12; ++y)
    for (int x = 0; x < 12; ++x) red.at(x, y, 0) = 255;
  const auto f = embedding::describe_region(red, {});
  REQUIRE(f.size() == embedding::kRegionFeatures);
  CHECK(f(0) == doctest::Approx(1.0));
  CHECK(f(1) == doctest::Approx(0.0));
  CHECK(f(2) == doctest::Approx(0.0));
  for (int c = 3; c < 6; ++c) CHECK(f(c) == doctest::Approx(0.0));
  CHECK(f(30) == doctest::Approx(1.0));
  for (int b = 1; b < 8; ++b) CHECK(f(30 + b) == doctest::Approx(0.0));
  CHECK(f.segment(38, 8).sum() == doctest::Approx(0.0));
  // Channel histograms sum to one each.
  for (int c = 0; c < 3; ++c) CHECK(f.segment(6 + 8 * c, 8).sum() == doctest::Approx(1.0));
}

TEST_CASE("vertical stripes put orientation mass in the horizontal-gradient bin") {
  Image stripes(16, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      for (int c = 0; c < 3; ++c) stripes.at(x, y, c) = (x / 2) % 2 ? 255 : 0;
  const auto f = embedding::describe_region(stripes, {});
  const Eigen::VectorXd orient = f.segment(38, 8);
  CHECK(orient.sum() == doctest::Approx(1.0));
  Eigen::Index best = 0;
  orient.maxCoeff(&best);
  CHECK(best == 0);
  CHECK(orient(0) > 0.9);
}

TEST_CASE("patch descriptors are 92-D, finite and deterministic") {
  const auto img = testing::random_image(256, 256, 5);
  SlicParams p;
  p.target_count = 40;
  const auto map = slic(img, p);
  const auto all = embedding::describe_all(img, map, 3.0);
  CHECK(all.rows() == map.count());
  CHECK(all.cols() == embedding::kFeatureDim);
  CHECK(all.allFinite());
  const auto v = extract_patch(img, map, 4, 3.0);
  const auto f = embedding::describe_patch(v);
  CHECK(f == embedding::describe_patch(v));
  CHECK((all.row(4).transpose() - f).norm() == 0.0);
}
