#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aamgan/tensor.hpp"

namespace aamgan::img {

// 8-bit RGB image, row-major, interleaved channels.
struct Rgb8 {
  int width = 0, height = 0;
  std::vector<uint8_t> pixels;  // 3 * width * height

  uint8_t& at(int y, int x, int c) { return pixels[(static_cast<size_t>(y) * width + x) * 3 + c]; }
  uint8_t at(int y, int x, int c) const { return pixels[(static_cast<size_t>(y) * width + x) * 3 + c]; }
};

Rgb8 read_png(const std::string& path);
void write_png(const std::string& path, const Rgb8& image);

// Byte v maps to v / 127.5 - 1 (so 0 -> -1, 255 -> +1). Output is 3xHxW.
Tensor<float> to_tensor(const Rgb8& image);
// Inverse mapping with clamping to [-1, 1] first. Input 3xHxW or 1x3xHxW.
Rgb8 to_image(const Tensor<float>& t);

// Bilinear resize.
Rgb8 resize(const Rgb8& image, int width, int height);

}  // namespace aamgan::img
