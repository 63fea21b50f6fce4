#include "image.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

namespace srforge::pipeline {

namespace fs = std::filesystem;

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Image8 read_png(const fs::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) fail(ErrorCode::Io, "cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::Internal, "libpng initialisation failed");
  }
  Image8 img;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::Io, "corrupt PNG: " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  const png_byte depth = png_get_bit_depth(png, info);
  if (depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  img.width = png_get_image_width(png, info);
  img.height = png_get_image_height(png, info);
  img.channels = png_get_channels(png, info);
  if (img.channels != 1 && img.channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail(ErrorCode::Io, "unsupported PNG channel layout in " + path.string());
  }
  img.pixels.resize(img.width * img.height * img.channels);
  rows.resize(img.height);
  for (std::size_t y = 0; y < img.height; ++y) rows[y] = img.pixels.data() + y * img.width * img.channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

// Skips whitespace and '#' comments in a PNM header.
int pnm_next_int(std::istream& in) {
  int ch = in.peek();
  while (ch != EOF) {
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(ch)) {
      in.get();
    } else {
      break;
    }
    ch = in.peek();
  }
  int v = -1;
  if (!(in >> v)) return -1;
  return v;
}

Image8 read_pnm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  char magic[2];
  in.read(magic, 2);
  if (!in || magic[0] != 'P' || (magic[1] != '5' && magic[1] != '6'))
    fail(ErrorCode::Io, "not a binary PGM/PPM: " + path.string());
  Image8 img;
  img.channels = magic[1] == '5' ? 1 : 3;
  const int w = pnm_next_int(in), h = pnm_next_int(in), maxval = pnm_next_int(in);
  if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
    fail(ErrorCode::Io, "unsupported PNM header in " + path.string());
  in.get();  // single whitespace before the raster
  img.width = static_cast<std::size_t>(w);
  img.height = static_cast<std::size_t>(h);
  img.pixels.resize(img.width * img.height * img.channels);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
    fail(ErrorCode::Io, "truncated PNM raster in " + path.string());
  if (maxval != 255) {
    for (auto& p : img.pixels) p = static_cast<std::uint8_t>(std::lround(p * 255.0 / maxval));
  }
  return img;
}

}  // namespace

void ImagePlane::check_range() const {
  const double hi = range == Range::Byte ? 255.0 : 1.0;
  for (const double v : data) {
    if (!(v >= 0.0 && v <= hi)) fail(ErrorCode::Usage, "image plane value outside declared range");
  }
}

ImagePlane ImagePlane::crop(std::size_t x, std::size_t y, std::size_t w, std::size_t h) const {
  if (x + w > width || y + h > height) fail(ErrorCode::Usage, "crop window exceeds image bounds");
  ImagePlane out(w, h, range);
  for (std::size_t r = 0; r < h; ++r)
    std::copy_n(data.begin() + static_cast<std::ptrdiff_t>((y + r) * width + x), w,
                out.data.begin() + static_cast<std::ptrdiff_t>(r * w));
  return out;
}

ImagePlane ImagePlane::to_range(Range target) const {
  if (target == range) return *this;
  ImagePlane out(width, height, target);
  for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = target == Range::Unit ? data[i] / 255.0 : data[i] * 255.0;
  return out;
}

Image8 read_image(const fs::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) fail(ErrorCode::Io, "cannot open " + path.string());
  unsigned char sig[8] = {};
  probe.read(reinterpret_cast<char*>(sig), 8);
  if (probe.gcount() >= 8 && png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
  if (probe.gcount() >= 2 && sig[0] == 'P' && (sig[1] == '5' || sig[1] == '6')) return read_pnm(path);
  fail(ErrorCode::Io, "unrecognised image format: " + path.string());
}

void write_png(const fs::path& path, const Image8& image) {
  if (image.channels != 1 && image.channels != 3) fail(ErrorCode::Usage, "write_png: 1 or 3 channels required");
  if (image.pixels.size() != image.width * image.height * image.channels)
    fail(ErrorCode::Usage, "write_png: pixel buffer size mismatch");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) fail(ErrorCode::Io, "cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::Internal, "libpng initialisation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail(ErrorCode::Io, "PNG encode failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), 8,
               image.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(image.height);
  for (std::size_t y = 0; y < image.height; ++y)
    rows[y] = const_cast<png_bytep>(image.pixels.data() + y * image.width * image.channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

bool is_image_file(const fs::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".ppm" || ext == ".pgm" || ext == ".pnm";
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) fail(ErrorCode::Io, "not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

ImagePlane channel_plane(const Image8& image, std::size_t channel) {
  if (channel >= image.channels) fail(ErrorCode::Usage, "channel index out of range");
  ImagePlane out(image.width, image.height, Range::Byte);
  for (std::size_t y = 0; y < image.height; ++y)
    for (std::size_t x = 0; x < image.width; ++x) out.at(x, y) = image.at(x, y, channel);
  return out;
}

std::vector<std::uint8_t> quantize(const ImagePlane& plane) {
  const double k = plane.range == Range::Unit ? 255.0 : 1.0;
  std::vector<std::uint8_t> out(plane.data.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(std::clamp(std::round(plane.data[i] * k), 0.0, 255.0));
  return out;
}

ImagePlane dihedral(const ImagePlane& plane, int transform_id) {
  if (transform_id < 0 || transform_id > 7) fail(ErrorCode::Usage, "transform id must be in 0..7");
  ImagePlane cur = plane;
  if (transform_id & 4) {
    for (std::size_t y = 0; y < cur.height; ++y)
      std::reverse(cur.data.begin() + static_cast<std::ptrdiff_t>(y * cur.width),
                   cur.data.begin() + static_cast<std::ptrdiff_t>((y + 1) * cur.width));
  }
  for (int r = 0; r < (transform_id & 3); ++r) {
    // clockwise quarter turn: new(x', y') with x' = H-1-y, y' = x
    ImagePlane rot(cur.height, cur.width, cur.range);
    for (std::size_t y = 0; y < cur.height; ++y)
      for (std::size_t x = 0; x < cur.width; ++x) rot.at(cur.height - 1 - y, x) = cur.at(x, y);
    cur = std::move(rot);
  }
  return cur;
}

}  // namespace srforge::pipeline
