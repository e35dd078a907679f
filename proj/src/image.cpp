#include "psyseg/image.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

namespace psyseg::imaging {

Image::Image(int w, int h, std::uint8_t fill)
    : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {
  if (w < 1 || h < 1) throw std::invalid_argument("image dimensions must be positive");
}

Image Image::crop(int x0, int y0, int x1, int y1) const {
  if (x0 < 0 || y0 < 0 || x1 > width || y1 > height || x0 >= x1 || y0 >= y1)
    throw std::invalid_argument("crop box outside image");
  Image out(x1 - x0, y1 - y0);
  for (int y = y0; y < y1; ++y)
    std::memcpy(&out.pixels[out.index(0, y - y0)], &pixels[index(x0, y)],
                static_cast<std::size_t>(x1 - x0) * 3);
  return out;
}

namespace {

struct MemoryReader {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t offset;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t count) {
  auto* reader = static_cast<MemoryReader*>(png_get_io_ptr(png));
  if (reader->offset + count > reader->size) png_error(png, "truncated PNG stream");
  std::memcpy(out, reader->data + reader->offset, count);
  reader->offset += count;
}

void write_to_vector(png_structp png, png_bytep in, png_size_t count) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), in, in + count);
}

void flush_noop(png_structp) {}

// libpng reports errors by longjmp; everything touched after setjmp lives in
// this struct so no C++ destructor is skipped.
struct DecodeResult {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int color_type = 0;
  std::vector<std::uint8_t> rows;
  std::size_t rowbytes = 0;
  char error[256] = {};
};

void on_png_error(png_structp png, png_const_charp msg) {
  auto* result = static_cast<DecodeResult*>(png_get_error_ptr(png));
  if (result) std::snprintf(result->error, sizeof(result->error), "%s", msg);
  std::longjmp(png_jmpbuf(png), 1);
}

void on_png_warning(png_structp, png_const_charp) {}

// Decodes a PNG; when `want_16bit_gray` the stream must be 16-bit grayscale,
// otherwise it must be 8-bit (any color type expandable to RGB).
bool decode(const std::vector<std::uint8_t>& bytes, bool want_16bit_gray, DecodeResult& result) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) {
    std::snprintf(result.error, sizeof(result.error), "not a PNG file");
    return false;
  }
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &result, on_png_error, on_png_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  MemoryReader reader{bytes.data(), bytes.size(), 0};
  std::vector<png_bytep> row_ptrs;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, &reader, read_from_memory);
  png_read_info(png, info);
  result.width = static_cast<int>(png_get_image_width(png, info));
  result.height = static_cast<int>(png_get_image_height(png, info));
  result.bit_depth = png_get_bit_depth(png, info);
  result.color_type = png_get_color_type(png, info);

  if (want_16bit_gray) {
    if (result.bit_depth != 16 || result.color_type != PNG_COLOR_TYPE_GRAY) {
      std::snprintf(result.error, sizeof(result.error), "unsupported format: expected 16-bit grayscale");
      png_destroy_read_struct(&png, &info, nullptr);
      return false;
    }
    png_set_swap(png);  // PNG is big-endian; keep host order in the row buffer
  } else {
    if (result.bit_depth == 16) {
      std::snprintf(result.error, sizeof(result.error), "unsupported format: 16-bit samples");
      png_destroy_read_struct(&png, &info, nullptr);
      return false;
    }
    if (result.color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (result.color_type == PNG_COLOR_TYPE_GRAY || result.color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
      png_set_expand_gray_1_2_4_to_8(png);
      png_set_gray_to_rgb(png);
    }
    if (result.color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png), png_set_strip_alpha(png);
  }
  png_read_update_info(png, info);
  result.rowbytes = png_get_rowbytes(png, info);
  result.rows.resize(result.rowbytes * static_cast<std::size_t>(result.height));
  row_ptrs.resize(static_cast<std::size_t>(result.height));
  for (int y = 0; y < result.height; ++y) row_ptrs[y] = result.rows.data() + result.rowbytes * y;
  png_read_image(png, row_ptrs.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

struct EncodeState {
  char error[256] = {};
};

bool encode(const std::uint8_t* data, int width, int height, int bit_depth, int color_type,
            std::size_t rowbytes, std::vector<std::uint8_t>& out, EncodeState& state) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &state, on_png_error, on_png_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(height));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, &out, write_to_vector, flush_noop);
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  for (int y = 0; y < height; ++y)
    row_ptrs[y] = const_cast<png_bytep>(data + rowbytes * static_cast<std::size_t>(y));
  png_write_image(png, row_ptrs.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open image file: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::vector<std::uint8_t>& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ImageError("cannot write image file: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageError("short write: " + path.string());
}

}  // namespace

Image decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  DecodeResult result;
  if (!decode(bytes, false, result))
    throw ImageError("cannot decode " + name + ": " + result.error);
  Image image(result.width, result.height);
  for (int y = 0; y < result.height; ++y)
    std::memcpy(&image.pixels[image.index(0, y)], result.rows.data() + result.rowbytes * y,
                static_cast<std::size_t>(result.width) * 3);
  return image;
}

std::vector<std::uint8_t> encode_png(const Image& image) {
  std::vector<std::uint8_t> out;
  EncodeState state;
  if (!encode(image.pixels.data(), image.width, image.height, 8, PNG_COLOR_TYPE_RGB,
              static_cast<std::size_t>(image.width) * 3, out, state))
    throw ImageError(std::string("PNG encode failed: ") + state.error);
  return out;
}

Image load_image(const std::filesystem::path& path) {
  return decode_png(read_file(path), path.string());
}

void save_image(const Image& image, const std::filesystem::path& path) {
  write_file(encode_png(image), path);
}

void save_label_png(const LabelMap& map, const std::filesystem::path& path) {
  std::vector<std::uint16_t> samples(map.labels.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (map.labels[i] < 0 || map.labels[i] > 65535)
      throw ImageError("label value out of 16-bit range in " + path.string());
    samples[i] = static_cast<std::uint16_t>(map.labels[i]);
  }
  std::vector<std::uint8_t> out;
  EncodeState state;
  if (!encode(reinterpret_cast<const std::uint8_t*>(samples.data()), map.width, map.height, 16,
              PNG_COLOR_TYPE_GRAY, static_cast<std::size_t>(map.width) * 2, out, state))
    throw ImageError(std::string("PNG encode failed: ") + state.error);
  write_file(out, path);
}

LabelMap load_label_png(const std::filesystem::path& path) {
  DecodeResult result;
  if (!decode(read_file(path), true, result))
    throw ImageError("cannot decode " + path.string() + ": " + result.error);
  LabelMap map{result.width, result.height, {}};
  map.labels.resize(static_cast<std::size_t>(result.width) * result.height);
  for (int y = 0; y < result.height; ++y) {
    const auto* row = reinterpret_cast<const std::uint16_t*>(result.rows.data() + result.rowbytes * y);
    for (int x = 0; x < result.width; ++x) map.labels[static_cast<std::size_t>(y) * result.width + x] = row[x];
  }
  return map;
}

}  // namespace psyseg::imaging
