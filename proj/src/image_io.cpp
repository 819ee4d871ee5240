#include "splatcull/raster.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace splatcull {
namespace {

constexpr char kContributionMagic[4] = {'S', 'C', 'C', 'N'};
constexpr std::uint32_t kContributionVersion = 1;

}  // namespace

void write_contributions(const std::filesystem::path& path, std::span<const float> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  const std::uint64_t count = values.size();
  out.write(kContributionMagic, 4);
  out.write(reinterpret_cast<const char*>(&kContributionVersion), 4);
  out.write(reinterpret_cast<const char*>(&count), 8);
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::vector<float> read_contributions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t count = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&count), 8);
  if (!in || std::memcmp(magic, kContributionMagic, 4) != 0) throw std::runtime_error("bad contribution header");
  if (version != kContributionVersion) throw std::runtime_error("unsupported contribution version");
  std::vector<float> values(count);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(float)));
  if (static_cast<std::uint64_t>(in.gcount()) != count * sizeof(float)) {
    throw std::runtime_error("truncated contribution record");
  }
  return values;
}

void write_png(const std::filesystem::path& path, std::span<const float> image, int width, int height) {
  if (image.size() != static_cast<std::size_t>(width) * height * 3) {
    throw std::invalid_argument("write_png: image size does not match dimensions");
  }
  std::unique_ptr<std::FILE, int (*)(std::FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!file) throw std::runtime_error("cannot open '" + path.string() + "' for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng initialisation failed");
  }
  std::vector<png_byte> row(static_cast<std::size_t>(width) * 3);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw std::runtime_error("libpng write failed for '" + path.string() + "'");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < height; ++y) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      const float v = std::clamp(image[static_cast<std::size_t>(y) * row.size() + i], 0.0f, 1.0f);
      row[i] = static_cast<png_byte>(std::lround(v * 255.0f));
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace splatcull
