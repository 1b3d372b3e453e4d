#include "splatsdf/io/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

namespace splatsdf::io {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::string& path, const char* what) {
  throw std::runtime_error("png: " + std::string(what) + ": " + path);
}

}  // namespace

Image read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail(path, "cannot open");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) fail(path, "init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(path, "decode error");
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_swap(png);  // wire is big-endian
  png_read_update_info(png, info);

  const int channels = png_get_channels(png, info);
  const size_t row_bytes = png_get_rowbytes(png, info);
  std::vector<unsigned char> raw(row_bytes * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = raw.data() + y * row_bytes;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  Image img(int(w), int(h), channels);
  if (depth == 16) {
    const auto* p16 = reinterpret_cast<const std::uint16_t*>(raw.data());
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = p16[i] / 65535.f;
  } else {
    for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = raw[i] / 255.f;
  }
  return img;
}

namespace {

void write_png_impl(const std::string& path, const Image& img, int depth) {
  if (img.channels != 1 && img.channels != 3)
    fail(path, "only 1- or 3-channel images supported");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail(path, "cannot open for write");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  if (!png || !info) fail(path, "init failed");
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(path, "encode error");
  }
  png_init_io(png, fp.get());
  const int color = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(png, info, img.width, img.height, depth, color, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (depth == 16) png_set_swap(png);

  const size_t n = img.data.size();
  if (depth == 16) {
    std::vector<std::uint16_t> raw(n);
    for (size_t i = 0; i < n; ++i)
      raw[i] = std::uint16_t(std::lround(std::clamp(img.data[i], 0.f, 1.f) * 65535.f));
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
      rows[y] = reinterpret_cast<png_bytep>(raw.data() + size_t(y) * img.width * img.channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
  } else {
    std::vector<unsigned char> raw(n);
    for (size_t i = 0; i < n; ++i)
      raw[i] = (unsigned char)std::lround(std::clamp(img.data[i], 0.f, 1.f) * 255.f);
    std::vector<png_bytep> rows(img.height);
    for (int y = 0; y < img.height; ++y)
      rows[y] = raw.data() + size_t(y) * img.width * img.channels;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
  }
  png_destroy_write_struct(&png, &info);
}

}  // namespace

void write_png8(const std::string& path, const Image& img) { write_png_impl(path, img, 8); }
void write_png16(const std::string& path, const Image& img) { write_png_impl(path, img, 16); }

Image encode_normal_map(const Image& normals) {
  Image out(normals.width, normals.height, 3);
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = 0.5f * (normals.data[i] + 1.f);
  return out;
}

Image decode_normal_map(const Image& encoded) {
  Image out(encoded.width, encoded.height, 3);
  for (size_t i = 0; i < out.data.size(); ++i)
    out.data[i] = 2.f * encoded.data[i] - 1.f;
  // Snap near-zero vectors (invalid markers) to exact zero.
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      Vec3<float> n = out.rgb(x, y);
      if (n.norm() < 0.5f) out.set_rgb(x, y, {0, 0, 0});
    }
  return out;
}

}  // namespace splatsdf::io
