#include "segrefine/png.hpp"

#include <cstdio>
#include <memory>

#include <png.h>

#include "segrefine/error.hpp"

namespace segrefine {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};

void write_png(const std::filesystem::path& path, std::size_t height, std::size_t width, int color_type,
               const std::vector<png_color>& palette, const std::vector<std::uint8_t>& pixels) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "wb"));
  if (!file) throw Error(ErrorCode::IoFailure, "cannot open " + path.string());

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw Error(ErrorCode::IoFailure, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::IoFailure, "libpng failed writing " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (color_type == PNG_COLOR_TYPE_PALETTE)
    png_set_PLTE(png, info, palette.data(), static_cast<int>(palette.size()));
  png_write_info(png, info);
  const std::size_t stride = color_type == PNG_COLOR_TYPE_PALETTE ? width : width * 3;
  for (std::size_t y = 0; y < height; ++y)
    png_write_row(png, const_cast<png_bytep>(pixels.data() + y * stride));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

void check_label_tensor(const Tensor& t) {
  if (t.dtype() != DType::i64 || t.ndim() != 2) throw Error(ErrorCode::ShapeMismatch, "label map must be i64 H x W");
}

}  // namespace

Rgb class_color(std::size_t index) {
  Rgb c{0, 0, 0};
  std::size_t id = index;
  for (int shift = 7; shift >= 0; --shift) {
    for (int ch = 0; ch < 3; ++ch) c[ch] |= static_cast<std::uint8_t>(((id >> ch) & 1u) << shift);
    id >>= 3;
  }
  return c;
}

void write_label_png(const std::filesystem::path& path, const Tensor& labels) {
  check_label_tensor(labels);
  const auto data = labels.i64();
  std::vector<std::uint8_t> pixels(data.size());
  std::int64_t top = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i] < 0 || data[i] > 255)
      throw Error(ErrorCode::LabelOutOfRange, "palette PNG holds labels 0..255, got " + std::to_string(data[i]));
    pixels[i] = static_cast<std::uint8_t>(data[i]);
    top = std::max(top, data[i]);
  }
  std::vector<png_color> palette(static_cast<std::size_t>(top) + 1);
  for (std::size_t i = 0; i < palette.size(); ++i) {
    const auto c = class_color(i);
    palette[i] = {c[0], c[1], c[2]};
  }
  write_png(path, labels.dim(0), labels.dim(1), PNG_COLOR_TYPE_PALETTE, palette, pixels);
}

void write_segments_png(const std::filesystem::path& path, const Tensor& segments) {
  check_label_tensor(segments);
  const auto data = segments.i64();
  std::vector<std::uint8_t> pixels(data.size() * 3);
  for (std::size_t i = 0; i < data.size(); ++i) {
    // splitmix64 finaliser keeps colours stable across runs.
    std::uint64_t z = static_cast<std::uint64_t>(data[i]) + 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z ^= z >> 31;
    for (int ch = 0; ch < 3; ++ch) pixels[i * 3 + ch] = static_cast<std::uint8_t>(z >> (8 * ch));
  }
  write_png(path, segments.dim(0), segments.dim(1), PNG_COLOR_TYPE_RGB, {}, pixels);
}

}  // namespace segrefine
