#include "surgsynth/image_io.hpp"

#include <png.h>

#include <cstring>
#include <fstream>
#include <sstream>

#include "surgsynth/error.hpp"

namespace surgsynth {
namespace {

void write_to_string(png_structp png, png_bytep data, png_size_t length) {
  auto *out = static_cast<std::string *>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char *>(data), length);
}

void flush_noop(png_structp) {}

struct ReadCursor {
  const std::string *bytes;
  std::size_t offset;
};

void read_from_string(png_structp png, png_bytep data, png_size_t length) {
  auto *cur = static_cast<ReadCursor *>(png_get_io_ptr(png));
  if (cur->offset + length > cur->bytes->size()) png_error(png, "truncated PNG");
  std::memcpy(data, cur->bytes->data() + cur->offset, length);
  cur->offset += length;
}

[[noreturn]] void on_png_error(png_structp png, png_const_charp msg) {
  auto *err = static_cast<std::string *>(png_get_error_ptr(png));
  if (err) *err = msg;
  png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

void check_size(int width, int height, int channels, std::size_t n) {
  if (width <= 0 || height <= 0 || n != static_cast<std::size_t>(width) * static_cast<std::size_t>(height) * channels)
    throw Error(Errc::kInvalidParam, "image dimensions do not match data");
}

}  // namespace

Image make_rgb8(int width, int height, const std::vector<std::uint8_t> &rgb) {
  check_size(width, height, 3, rgb.size());
  Image img{width, height, 3, 8, {}};
  img.data.assign(rgb.begin(), rgb.end());
  return img;
}

Image make_gray8(int width, int height, const std::vector<std::uint8_t> &gray) {
  check_size(width, height, 1, gray.size());
  Image img{width, height, 1, 8, {}};
  img.data.assign(gray.begin(), gray.end());
  return img;
}

Image make_gray16(int width, int height, const std::vector<std::uint16_t> &gray) {
  check_size(width, height, 1, gray.size());
  return Image{width, height, 1, 16, gray};
}

std::string encode_png(const Image &image) {
  if (image.width <= 0 || image.height <= 0 ||
      image.data.size() != static_cast<std::size_t>(image.width) * image.height * image.channels)
    throw Error(Errc::kInvalidParam, "image dimensions do not match data");
  if ((image.channels != 1 && image.channels != 3) || (image.bit_depth != 8 && image.bit_depth != 16))
    throw Error(Errc::kInvalidParam, "unsupported image format");

  std::string out;
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, on_png_error, on_png_warning);
  if (!png) throw Error(Errc::kIoError, "png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  const int bytes_per_sample = image.bit_depth / 8;
  std::vector<png_byte> row(static_cast<std::size_t>(image.width) * image.channels * bytes_per_sample);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(Errc::kIoError, "PNG encode failed: " + error);
  }
  png_set_write_fn(png, &out, write_to_string, flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height),
               image.bit_depth, image.channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_set_compression_level(png, 6);
  png_write_info(png, info);
  const std::size_t samples = static_cast<std::size_t>(image.width) * image.channels;
  for (int y = 0; y < image.height; ++y) {
    const std::uint16_t *src = image.data.data() + static_cast<std::size_t>(y) * samples;
    if (bytes_per_sample == 1) {
      for (std::size_t i = 0; i < samples; ++i) row[i] = static_cast<png_byte>(src[i]);
    } else {
      // PNG stores 16-bit samples big-endian.
      for (std::size_t i = 0; i < samples; ++i) {
        row[2 * i] = static_cast<png_byte>(src[i] >> 8);
        row[2 * i + 1] = static_cast<png_byte>(src[i] & 0xFF);
      }
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

Image decode_png(const std::string &bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0)
    throw Error(Errc::kParseError, "not a PNG stream");
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, on_png_error, on_png_warning);
  if (!png) throw Error(Errc::kIoError, "png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  Image img;
  std::vector<png_byte> row;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw Error(Errc::kParseError, "PNG decode failed: " + error);
  }
  ReadCursor cursor{&bytes, 0};
  png_set_read_fn(png, &cursor, read_from_string);
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  img.width = static_cast<int>(png_get_image_width(png, info));
  img.height = static_cast<int>(png_get_image_height(png, info));
  img.channels = png_get_channels(png, info);
  img.bit_depth = png_get_bit_depth(png, info);
  const std::size_t samples = static_cast<std::size_t>(img.width) * img.channels;
  const int bytes_per_sample = img.bit_depth == 16 ? 2 : 1;
  row.resize(samples * bytes_per_sample);
  img.data.resize(samples * img.height);
  for (int y = 0; y < img.height; ++y) {
    png_read_row(png, row.data(), nullptr);
    std::uint16_t *dst = img.data.data() + static_cast<std::size_t>(y) * samples;
    for (std::size_t i = 0; i < samples; ++i)
      dst[i] = bytes_per_sample == 1 ? row[i]
                                     : static_cast<std::uint16_t>((row[2 * i] << 8) | row[2 * i + 1]);
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

void write_png(const std::filesystem::path &path, const Image &image) {
  const std::string bytes = encode_png(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::kIoError, "cannot write " + path.string());
}

Image read_png(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::kIoError, "cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_png(ss.str());
}

}  // namespace surgsynth
