#include "mutualdepth/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

namespace md {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw std::runtime_error("png: " + what + ": " + path);
}

// RAII around the libpng write structs; setjmp is handled at the call sites.
struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  PngWriter() {
    png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png) info = png_create_info_struct(png);
  }
  ~PngWriter() { png_destroy_write_struct(&png, &info); }
};

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  PngReader() {
    png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (png) info = png_create_info_struct(png);
  }
  ~PngReader() { png_destroy_read_struct(&png, &info, nullptr); }
};

void write_png(const std::string& path, int64_t h, int64_t w, int bit_depth,
               int color_type, const std::vector<png_bytep>& rows) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail(path, "cannot open for writing");
  PngWriter ctx;
  if (!ctx.png || !ctx.info) fail(path, "cannot allocate encoder");
  if (setjmp(png_jmpbuf(ctx.png))) fail(path, "encoding failed");
  png_init_io(ctx.png, fp.get());
  png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(w),
               static_cast<png_uint_32>(h), bit_depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);
  if (bit_depth == 16) png_set_swap(ctx.png);  // we fill rows little-endian
  png_write_image(ctx.png, const_cast<png_bytepp>(rows.data()));
  png_write_end(ctx.png, nullptr);
}

// Reads any PNG into 8- or 16-bit samples with the requested channel count.
void read_png(const std::string& path, int want_channels, int want_depth,
              int64_t& h, int64_t& w, std::vector<uint16_t>& samples) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail(path, "cannot open");
  PngReader ctx;
  if (!ctx.png || !ctx.info) fail(path, "cannot allocate decoder");
  if (setjmp(png_jmpbuf(ctx.png))) fail(path, "decoding failed");
  png_init_io(ctx.png, fp.get());
  png_read_info(ctx.png, ctx.info);

  png_uint_32 width = 0, height = 0;
  int bit_depth = 0, color_type = 0;
  png_get_IHDR(ctx.png, ctx.info, &width, &height, &bit_depth, &color_type,
               nullptr, nullptr, nullptr);

  // Normalize to the requested layout.
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(ctx.png);
  if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS))
    png_set_tRNS_to_alpha(ctx.png);
  png_set_strip_alpha(ctx.png);
  if (want_channels == 3) {
    if (color_type == PNG_COLOR_TYPE_GRAY ||
        color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
      png_set_gray_to_rgb(ctx.png);
  } else {
    if (color_type == PNG_COLOR_TYPE_RGB ||
        color_type == PNG_COLOR_TYPE_RGB_ALPHA ||
        color_type == PNG_COLOR_TYPE_PALETTE)
      png_set_rgb_to_gray_fixed(ctx.png, 1, -1, -1);
  }
  if (want_depth == 8 && bit_depth == 16) png_set_strip_16(ctx.png);
  if (want_depth == 16 && bit_depth < 16) fail(path, "expected a 16-bit image");
  if (want_depth == 16) png_set_swap(ctx.png);
  png_read_update_info(ctx.png, ctx.info);

  const int channels = png_get_channels(ctx.png, ctx.info);
  if (channels != want_channels) fail(path, "unexpected channel count");
  h = height;
  w = width;
  const size_t bytes_per_sample = want_depth / 8;
  std::vector<uint8_t> buffer(static_cast<size_t>(h) * w * channels *
                              bytes_per_sample);
  std::vector<png_bytep> rows(static_cast<size_t>(h));
  const size_t stride = static_cast<size_t>(w) * channels * bytes_per_sample;
  for (int64_t i = 0; i < h; ++i) rows[i] = buffer.data() + i * stride;
  png_read_image(ctx.png, rows.data());
  png_read_end(ctx.png, nullptr);

  samples.resize(static_cast<size_t>(h) * w * channels);
  if (want_depth == 8) {
    for (size_t i = 0; i < samples.size(); ++i) samples[i] = buffer[i];
  } else {
    const uint16_t* src = reinterpret_cast<const uint16_t*>(buffer.data());
    for (size_t i = 0; i < samples.size(); ++i) samples[i] = src[i];
  }
}

uint16_t quantize(double v, double scale, double max_value) {
  const double q = std::nearbyint(v * scale);
  return static_cast<uint16_t>(std::min(max_value, std::max(0.0, q)));
}

}  // namespace

void write_png_rgb8(const std::string& path, const Tensor& image) {
  check(image.rank() == 3 && image.dim(0) == 3, "write_png_rgb8: need [3,H,W]");
  const int64_t h = image.dim(1), w = image.dim(2), n = h * w;
  std::vector<uint8_t> buffer(static_cast<size_t>(n) * 3);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t c = 0; c < 3; ++c)
      buffer[i * 3 + c] = static_cast<uint8_t>(quantize(image[c * n + i], 255.0, 255.0));
  std::vector<png_bytep> rows(static_cast<size_t>(h));
  for (int64_t i = 0; i < h; ++i) rows[i] = buffer.data() + i * w * 3;
  write_png(path, h, w, 8, PNG_COLOR_TYPE_RGB, rows);
}

Tensor read_png_rgb8(const std::string& path) {
  int64_t h = 0, w = 0;
  std::vector<uint16_t> samples;
  read_png(path, 3, 8, h, w, samples);
  Tensor out({3, h, w});
  const int64_t n = h * w;
  for (int64_t i = 0; i < n; ++i)
    for (int64_t c = 0; c < 3; ++c)
      out[c * n + i] = static_cast<double>(samples[i * 3 + c]) / 255.0;
  return out;
}

void write_png_gray16(const std::string& path, const Tensor& grid) {
  check(grid.rank() == 2, "write_png_gray16: need [H,W]");
  const int64_t h = grid.dim(0), w = grid.dim(1);
  std::vector<uint16_t> buffer(static_cast<size_t>(h) * w);
  for (int64_t i = 0; i < h * w; ++i) buffer[i] = quantize(grid[i], 1.0, 65535.0);
  std::vector<png_bytep> rows(static_cast<size_t>(h));
  for (int64_t i = 0; i < h; ++i)
    rows[i] = reinterpret_cast<png_bytep>(buffer.data() + i * w);
  write_png(path, h, w, 16, PNG_COLOR_TYPE_GRAY, rows);
}

Tensor read_png_gray16(const std::string& path) {
  int64_t h = 0, w = 0;
  std::vector<uint16_t> samples;
  read_png(path, 1, 16, h, w, samples);
  Tensor out({h, w});
  for (int64_t i = 0; i < h * w; ++i) out[i] = static_cast<double>(samples[i]);
  return out;
}

void write_png_gray8(const std::string& path, const Tensor& grid) {
  check(grid.rank() == 2, "write_png_gray8: need [H,W]");
  const int64_t h = grid.dim(0), w = grid.dim(1);
  std::vector<uint8_t> buffer(static_cast<size_t>(h) * w);
  for (int64_t i = 0; i < h * w; ++i)
    buffer[i] = static_cast<uint8_t>(quantize(grid[i], 1.0, 255.0));
  std::vector<png_bytep> rows(static_cast<size_t>(h));
  for (int64_t i = 0; i < h; ++i) rows[i] = buffer.data() + i * w;
  write_png(path, h, w, 8, PNG_COLOR_TYPE_GRAY, rows);
}

Tensor read_png_gray8(const std::string& path) {
  int64_t h = 0, w = 0;
  std::vector<uint16_t> samples;
  read_png(path, 1, 8, h, w, samples);
  Tensor out({h, w});
  for (int64_t i = 0; i < h * w; ++i) out[i] = static_cast<double>(samples[i]);
  return out;
}

}  // namespace md
