// PNG encode/decode for layout and height maps, on top of libpng.

#include <png.h>

#include <csetjmp>
#include <cstring>

#include "majutsu/layout.hpp"

namespace majutsu::layout {

namespace {

struct ReadCursor {
  std::span<const std::uint8_t> data;
  std::size_t pos = 0;
};

void read_from_memory(png_structp png, png_bytep out, png_size_t length) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->pos + length > cur->data.size()) png_error(png, "truncated PNG");
  std::memcpy(out, cur->data.data() + cur->pos, length);
  cur->pos += length;
}

void write_to_memory(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void flush_noop(png_structp) {}

void silent_warning(png_structp, png_const_charp) {}

struct RawImage {
  int width = 0;
  int height = 0;
  int channels = 0;
  int bit_depth = 0;
  std::vector<std::uint8_t> pixels;  // row-major, 16-bit samples little-endian
};

enum class Want { Rgb8, Gray };

// Returns false on any libpng error; `raw` is only meaningful on success.
bool read_png(std::span<const std::uint8_t> bytes, Want want, RawImage& raw) {
  if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) return false;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                           silent_warning);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    return false;
  }
  ReadCursor cursor{bytes, 0};
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    return false;
  }
  png_set_read_fn(png, &cursor, read_from_memory);
  png_read_info(png, info);
  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  const bool is_gray = (color_type & PNG_COLOR_MASK_COLOR) == 0 && color_type != PNG_COLOR_TYPE_PALETTE;

  if (want == Want::Rgb8) {
    if (depth == 16) png_error(png, "16-bit layout image");
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (is_gray) png_set_gray_to_rgb(png);
    if (is_gray && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  } else {
    if (!is_gray) png_error(png, "height image is not grayscale");
    if (depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);
  }
  png_read_update_info(png, info);

  raw.width = static_cast<int>(png_get_image_width(png, info));
  raw.height = static_cast<int>(png_get_image_height(png, info));
  raw.channels = png_get_channels(png, info);
  raw.bit_depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  raw.pixels.assign(stride * static_cast<std::size_t>(raw.height), 0);
  rows.resize(static_cast<std::size_t>(raw.height));
  for (int r = 0; r < raw.height; ++r) {
    rows[static_cast<std::size_t>(r)] = raw.pixels.data() + stride * static_cast<std::size_t>(r);
  }
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

std::vector<std::uint8_t> write_png(int width, int height, int color_type, int bit_depth,
                                    const std::vector<std::uint8_t>& pixels) {
  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr,
                                            silent_warning);
  if (!png) throw Error(ErrorCode::SerializationFailure, "png");
  png_infop info = png_create_info_struct(png);
  const int channels = color_type == PNG_COLOR_TYPE_RGB ? 3 : 1;
  const std::size_t stride =
      static_cast<std::size_t>(width) * static_cast<std::size_t>(channels) * (bit_depth / 8);
  std::vector<png_bytep> rows(static_cast<std::size_t>(height));
  for (int r = 0; r < height; ++r) {
    rows[static_cast<std::size_t>(r)] =
        const_cast<png_bytep>(pixels.data() + stride * static_cast<std::size_t>(r));
  }
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error(ErrorCode::SerializationFailure, "png");
  }
  png_set_write_fn(png, &out, write_to_memory, flush_noop);
  png_set_compression_level(png, 6);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (bit_depth == 16) png_set_swap(png);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

}  // namespace

LayoutMap decode_layout_image(std::span<const std::uint8_t> png, double meters_per_pixel) {
  RawImage raw;
  if (!read_png(png, Want::Rgb8, raw) || raw.channels != 3 || raw.bit_depth != 8) {
    throw Error(ErrorCode::CorruptImage, "layout");
  }
  LayoutMap layout(raw.width, raw.height, SemanticClass::Ground, meters_per_pixel);
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      const std::size_t o = (static_cast<std::size_t>(y) * raw.width + x) * 3;
      const Rgb rgb{raw.pixels[o], raw.pixels[o + 1], raw.pixels[o + 2]};
      bool found = false;
      for (auto cls : kAllClasses) {
        if (palette_color(cls) == rgb) {
          layout.set(x, y, cls);
          found = true;
          break;
        }
      }
      if (!found) {
        throw Error(ErrorCode::NonPaletteColor,
                    std::to_string(x) + "," + std::to_string(y) + ",(" +
                        std::to_string(rgb.r) + "," + std::to_string(rgb.g) + "," +
                        std::to_string(rgb.b) + ")");
      }
    }
  }
  return layout;
}

std::vector<std::uint8_t> encode_layout_image(const LayoutMap& layout) {
  std::vector<std::uint8_t> pixels;
  pixels.reserve(layout.cells.size() * 3);
  for (auto cls : layout.cells.cells()) {
    const Rgb c = palette_color(cls);
    pixels.push_back(c.r);
    pixels.push_back(c.g);
    pixels.push_back(c.b);
  }
  return write_png(layout.width(), layout.height(), PNG_COLOR_TYPE_RGB, 8, pixels);
}

HeightMap decode_height_image(std::span<const std::uint8_t> png, double h_max) {
  if (h_max < 0.0) throw Error(ErrorCode::NegativeHMax, format_double(h_max));
  RawImage raw;
  if (!read_png(png, Want::Gray, raw) || raw.channels != 1) {
    throw Error(ErrorCode::CorruptImage, "height");
  }
  HeightMap hmap(raw.width, raw.height, 0.0, h_max);
  const double max_code = raw.bit_depth == 16 ? 65535.0 : 255.0;
  for (int y = 0; y < raw.height; ++y) {
    for (int x = 0; x < raw.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * raw.width + x;
      const double code = raw.bit_depth == 16
                              ? static_cast<double>(raw.pixels[2 * i] | (raw.pixels[2 * i + 1] << 8))
                              : static_cast<double>(raw.pixels[i]);
      hmap.set(x, y, code / max_code * h_max);
    }
  }
  return hmap;
}

std::vector<std::uint8_t> encode_height_image(const HeightMap& hmap, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw Error(ErrorCode::SerializationFailure, "bit_depth");
  const double max_code = bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<std::uint8_t> pixels;
  pixels.reserve(hmap.heights.size() * static_cast<std::size_t>(bit_depth / 8));
  for (double h : hmap.heights.cells()) {
    const double t = hmap.h_max > 0.0 ? std::clamp(h / hmap.h_max, 0.0, 1.0) : 0.0;
    const auto code = static_cast<std::uint32_t>(std::lround(t * max_code));
    if (bit_depth == 16) {
      pixels.push_back(static_cast<std::uint8_t>(code & 0xFF));
      pixels.push_back(static_cast<std::uint8_t>(code >> 8));
    } else {
      pixels.push_back(static_cast<std::uint8_t>(code));
    }
  }
  return write_png(hmap.width(), hmap.height(), PNG_COLOR_TYPE_GRAY, bit_depth, pixels);
}

std::vector<std::uint8_t> encode_rgb8_png(int width, int height,
                                          std::span<const std::uint8_t> rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3) {
    throw Error(ErrorCode::SerializationFailure, "rgb size");
  }
  return write_png(width, height, PNG_COLOR_TYPE_RGB, 8, {rgb.begin(), rgb.end()});
}

std::vector<std::uint8_t> encode_gray_png(int width, int height, int bit_depth,
                                          std::span<const std::uint16_t> codes) {
  if (codes.size() != static_cast<std::size_t>(width) * height || (bit_depth != 8 && bit_depth != 16)) {
    throw Error(ErrorCode::SerializationFailure, "gray size");
  }
  std::vector<std::uint8_t> pixels;
  for (auto c : codes) {
    if (bit_depth == 16) {
      pixels.push_back(static_cast<std::uint8_t>(c & 0xFF));
      pixels.push_back(static_cast<std::uint8_t>(c >> 8));
    } else {
      pixels.push_back(static_cast<std::uint8_t>(c));
    }
  }
  return write_png(width, height, PNG_COLOR_TYPE_GRAY, bit_depth, pixels);
}

}  // namespace majutsu::layout
