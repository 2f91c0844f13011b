#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vp3d {

// Row-major 8-bit single-channel image. Binary masks use values 0 and 1.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  std::size_t count_nonzero() const;

  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // interleaved RGB

  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}
  explicit RgbImage(const GrayImage& gray);
  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b);
};

// Binary PGM (P5) and PPM (P6). Throw std::runtime_error naming the path on I/O failure.
void write_pgm(const GrayImage& image, const std::string& path);
GrayImage read_pgm(const std::string& path);
void write_ppm(const RgbImage& image, const std::string& path);

}  // namespace vp3d
