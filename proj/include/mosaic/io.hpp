// File formats: 8-bit PNG, float32 depth rasters, ascii PLY.
//
// Depth raster layout (all little-endian): a 16-byte header holding the
// magic "MDEP", height, width and a reserved zero as uint32, followed by
// height * width float32 depths in row-major order. Invalid pixels are 0.
#pragma once

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "mosaic/camera.hpp"
#include "mosaic/image.hpp"

namespace mosaic {

static_assert(std::endian::native == std::endian::little, "depth raster IO assumes a little-endian host");

inline constexpr std::array<char, 4> kDepthMagic{'M', 'D', 'E', 'P'};

inline void write_depth(const std::filesystem::path& path, const DepthMap& depth) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const std::uint32_t header[3] = {static_cast<std::uint32_t>(depth.height()),
                                   static_cast<std::uint32_t>(depth.width()), 0u};
  out.write(kDepthMagic.data(), 4);
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  std::vector<float> row(depth.size());
  for (std::size_t i = 0; i < depth.size(); ++i) row[i] = depth.valid(i) ? static_cast<float>(depth.depth(i)) : 0.0f;
  out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * sizeof(float)));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline DepthMap read_depth(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  char magic[4];
  std::uint32_t header[3];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (!in || std::memcmp(magic, kDepthMagic.data(), 4) != 0) {
    throw std::runtime_error(path.string() + ": not a depth raster");
  }
  DepthMap d(static_cast<int>(header[0]), static_cast<int>(header[1]));
  std::vector<float> data(d.size());
  in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(float)));
  if (!in) throw std::runtime_error(path.string() + ": truncated depth raster");
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (data[i] > 0.0f) d.set(i, data[i]);
  }
  return d;
}

/// Quantises [0, 1] colours to 8 bits (values outside are clamped).
inline void write_png(const std::filesystem::path& path, const PixelImage& img) {
  if (img.channels() != 3 && img.channels() != 1) throw std::invalid_argument("write_png: need 1 or 3 channels");
  std::unique_ptr<FILE, int (*)(FILE*)> fp(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!fp) throw std::runtime_error("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("libpng initialisation failed");
  }
  std::vector<png_byte> buf(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) {
    buf[i] = static_cast<png_byte>(std::lround(std::clamp(img[i], 0.0, 1.0) * 255.0));
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.height()));
  const std::size_t stride = static_cast<std::size_t>(img.width()) * img.channels();
  for (int y = 0; y < img.height(); ++y) rows[y] = buf.data() + y * stride;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng failed writing " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, img.width(), img.height(), 8, img.channels() == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

/// Reads an 8-bit RGB or gray PNG into [0, 1].
inline PixelImage read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw std::runtime_error(path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw std::runtime_error(path.string() + ": " + image.message);
  }
  PixelImage out(static_cast<int>(image.height), static_cast<int>(image.width), 3);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = buf[i] / 255.0;
  return out;
}

struct ColouredPoint {
  double x, y, z;
  std::uint8_t r, g, b;
};

inline void write_ply(const std::filesystem::path& path, const std::vector<ColouredPoint>& points) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "ply\nformat ascii 1.0\nelement vertex " << points.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  char line[128];
  for (const auto& p : points) {
    std::snprintf(line, sizeof line, "%.6f %.6f %.6f %u %u %u\n", p.x, p.y, p.z, unsigned{p.r}, unsigned{p.g},
                  unsigned{p.b});
    out << line;
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

inline std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace mosaic
