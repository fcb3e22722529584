#include <gtest/gtest.h>

#include "support.hpp"
#include "surgsynth/error.hpp"
#include "surgsynth/image_io.hpp"

using namespace surgsynth;
using surgsynth::testing::TempDir;

TEST(Png, Rgb8RoundTrip) {
  std::vector<std::uint8_t> rgb(7 * 5 * 3);
  for (std::size_t i = 0; i < rgb.size(); ++i) rgb[i] = static_cast<std::uint8_t>(i * 37);
  const Image img = make_rgb8(7, 5, rgb);
  const Image back = decode_png(encode_png(img));
  EXPECT_EQ(back, img);
  EXPECT_EQ(back.at(1, 0, 2), rgb[5]);
}

TEST(Png, Gray16RoundTripKeepsFullRange) {
  std::vector<std::uint16_t> d = {0, 1, 255, 256, 1234, 65535};
  const Image img = make_gray16(3, 2, d);
  const Image back = decode_png(encode_png(img));
  EXPECT_EQ(back.bit_depth, 16);
  EXPECT_EQ(back.data, d);
}

TEST(Png, EncodingIsDeterministic) {
  std::vector<std::uint8_t> g(64 * 64, 0);
  for (std::size_t i = 0; i < g.size(); i += 3) g[i] = 255;
  EXPECT_EQ(encode_png(make_gray8(64, 64, g)), encode_png(make_gray8(64, 64, g)));
}

TEST(Png, FileRoundTripAndErrors) {
  TempDir dir;
  const Image img = make_gray8(2, 2, {0, 255, 255, 0});
  write_png(dir / "m.png", img);
  EXPECT_EQ(read_png(dir / "m.png"), img);
  EXPECT_THROW(read_png(dir / "missing.png"), Error);
  EXPECT_THROW(decode_png("not a png"), Error);
  EXPECT_THROW(make_rgb8(2, 2, {1, 2, 3}), Error);
}
