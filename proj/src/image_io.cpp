#include "aamgan/image_io.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <memory>

#include "aamgan/error.hpp"

namespace aamgan::img {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Rgb8 read_png(const std::string& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  require(fp != nullptr, ErrorKind::MissingFile, "cannot open " + path);

  png_byte header[8];
  require(std::fread(header, 1, 8, fp.get()) == 8 && png_sig_cmp(header, 0, 8) == 0, ErrorKind::DecodeError,
          path + " is not a PNG file");

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, ErrorKind::DecodeError, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail(ErrorKind::DecodeError, "libpng info init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorKind::DecodeError, "libpng failed decoding " + path);
  }

  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  // Normalize any color type to 8-bit RGB.
  png_set_expand(png);
  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_gray_to_rgb(png);
  png_read_update_info(png, info);

  Rgb8 out;
  out.width = static_cast<int>(png_get_image_width(png, info));
  out.height = static_cast<int>(png_get_image_height(png, info));
  out.pixels.resize(static_cast<size_t>(out.width) * out.height * 3);

  std::vector<png_bytep> rows(static_cast<size_t>(out.height));
  for (int y = 0; y < out.height; ++y) rows[static_cast<size_t>(y)] = out.pixels.data() + static_cast<size_t>(y) * out.width * 3;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return out;
}

void write_png(const std::string& path, const Rgb8& image) {
  require(image.width > 0 && image.height > 0, ErrorKind::ShapeMismatch, "empty image");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  require(fp != nullptr, ErrorKind::IOFailure, "cannot write " + path);

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  require(png != nullptr, ErrorKind::IOFailure, "libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail(ErrorKind::IOFailure, "libpng info init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorKind::IOFailure, "libpng failed writing " + path);
  }

  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y)
    png_write_row(png, const_cast<png_bytep>(image.pixels.data() + static_cast<size_t>(y) * image.width * 3));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Tensor<float> to_tensor(const Rgb8& image) {
  Tensor<float> t({3, image.height, image.width});
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < 3; ++c) t[static_cast<int64_t>((c * image.height + y)) * image.width + x] =
          float(image.at(y, x, c)) / 127.5f - 1.0f;
  return t;
}

Rgb8 to_image(const Tensor<float>& t) {
  const Tensor<float>* src = &t;
  require((t.rank() == 3 && t.dim(0) == 3) || (t.rank() == 4 && t.dim(0) == 1 && t.dim(1) == 3),
          ErrorKind::ShapeMismatch, "expected 3xHxW or 1x3xHxW");
  const int h = t.dim(t.rank() - 2), w = t.dim(t.rank() - 1);
  Rgb8 out;
  out.width = w;
  out.height = h;
  out.pixels.resize(static_cast<size_t>(w) * h * 3);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        float v = (*src)[static_cast<int64_t>((c * h + y)) * w + x];
        v = std::min(1.0f, std::max(-1.0f, v));
        out.at(y, x, c) = static_cast<uint8_t>(std::lround((v + 1.0f) * 127.5f));
      }
  return out;
}

Rgb8 resize(const Rgb8& image, int width, int height) {
  if (image.width == width && image.height == height) return image;
  Rgb8 out;
  out.width = width;
  out.height = height;
  out.pixels.resize(static_cast<size_t>(width) * height * 3);
  const double sx = double(image.width) / width, sy = double(image.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::min((y + 0.5) * sy - 0.5, double(image.height - 1));
    const int y0 = std::max(0, static_cast<int>(std::floor(fy)));
    const int y1 = std::min(image.height - 1, y0 + 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::min((x + 0.5) * sx - 0.5, double(image.width - 1));
      const int x0 = std::max(0, static_cast<int>(std::floor(fx)));
      const int x1 = std::min(image.width - 1, x0 + 1);
      const double wx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = image.at(y0, x0, c) * (1 - wx) + image.at(y0, x1, c) * wx;
        const double bot = image.at(y1, x0, c) * (1 - wx) + image.at(y1, x1, c) * wx;
        out.at(y, x, c) = static_cast<uint8_t>(std::lround(top * (1 - wy) + bot * wy));
      }
    }
  }
  return out;
}

}  // namespace aamgan::img
