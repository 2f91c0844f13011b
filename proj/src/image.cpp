#include "vp3d/image.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <string>

namespace vp3d {

std::size_t GrayImage::count_nonzero() const {
  return static_cast<std::size_t>(std::count_if(pixels.begin(), pixels.end(), [](std::uint8_t v) { return v != 0; }));
}

RgbImage::RgbImage(const GrayImage& gray) : RgbImage(gray.width, gray.height) {
  for (std::size_t i = 0; i < gray.pixels.size(); ++i)
    pixels[3 * i] = pixels[3 * i + 1] = pixels[3 * i + 2] = gray.pixels[i];
}

void RgbImage::set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
  pixels[i] = r;
  pixels[i + 1] = g;
  pixels[i + 2] = b;
}

namespace {

void write_binary(const std::string& path, const std::string& header, const std::vector<std::uint8_t>& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << header;
  f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace

void write_pgm(const GrayImage& image, const std::string& path) {
  write_binary(path, "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n",
               image.pixels);
}

void write_ppm(const RgbImage& image, const std::string& path) {
  write_binary(path, "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n",
               image.pixels);
}

GrayImage read_pgm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  f >> magic >> w >> h >> maxval;
  if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255) throw std::runtime_error("unsupported PGM: " + path);
  f.get();
  GrayImage img(w, h);
  f.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!f) throw std::runtime_error("truncated PGM: " + path);
  return img;
}

}  // namespace vp3d
