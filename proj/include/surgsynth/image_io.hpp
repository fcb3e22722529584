#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace surgsynth {

// 8-bit (gray or RGB) or 16-bit gray image, row-major, interleaved channels.
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  int bit_depth = 8;
  std::vector<std::uint16_t> data;  // one entry per sample, 8-bit images use the low byte

  std::uint16_t at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  bool operator==(const Image &) const = default;
};

Image make_rgb8(int width, int height, const std::vector<std::uint8_t> &rgb);
Image make_gray8(int width, int height, const std::vector<std::uint8_t> &gray);
Image make_gray16(int width, int height, const std::vector<std::uint16_t> &gray);

// Encoding uses fixed zlib settings and writes no timestamps, so equal images
// always produce identical bytes.
std::string encode_png(const Image &image);
Image decode_png(const std::string &bytes);

void write_png(const std::filesystem::path &path, const Image &image);
Image read_png(const std::filesystem::path &path);

}  // namespace surgsynth
