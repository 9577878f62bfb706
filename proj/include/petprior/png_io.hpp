#ifndef PETPRIOR_PNG_IO_HPP
#define PETPRIOR_PNG_IO_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "petprior/maskgen.hpp"
#include "petprior/slicer.hpp"

namespace petprior {

/// Interleaved 8-bit RGB raster, row-major (y, x).
struct RgbRaster {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RgbRaster() = default;
  RgbRaster(int w, int h, std::uint8_t fill = 255)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

  void set(int x, int y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    const auto i = (static_cast<std::size_t>(y) * width + x) * 3;
    pixels[i] = r;
    pixels[i + 1] = g;
    pixels[i + 2] = b;
  }
};

void write_png(const RgbRaster& raster, const std::filesystem::path& path);
RgbRaster read_png(const std::filesystem::path& path);

/// Hole mask as grayscale-in-RGB, valid = 255, hole = 0. Image rows become
/// PNG columns so the picture matches the usual x-right, y-down view.
void write_mask_png(const HoleMask& mask, const std::filesystem::path& path);

/// Debug dump of an RGB slice (values x255, rounded).
void write_slice_png(const RGBSlice& slice, const std::filesystem::path& path);

}  // namespace petprior

#endif  // PETPRIOR_PNG_IO_HPP
