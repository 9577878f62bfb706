#include "petprior/png_io.hpp"

#include <png.h>

#include <cmath>
#include <cstring>

namespace petprior {

void write_png(const RgbRaster& raster, const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(raster.width);
  image.height = static_cast<png_uint_32>(raster.height);
  image.format = PNG_FORMAT_RGB;
  const int ok = png_image_write_to_file(&image, path.string().c_str(), 0, raster.pixels.data(),
                                         raster.width * 3, nullptr);
  require(ok != 0, ErrorCode::kIo, "cannot write PNG " + path.string() + ": " + image.message);
}

RgbRaster read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  require(png_image_begin_read_from_file(&image, path.string().c_str()) != 0, ErrorCode::kIo,
          "cannot read PNG " + path.string());
  image.format = PNG_FORMAT_RGB;
  RgbRaster raster(static_cast<int>(image.width), static_cast<int>(image.height), 0);
  const int ok = png_image_finish_read(&image, nullptr, raster.pixels.data(), raster.width * 3, nullptr);
  require(ok != 0, ErrorCode::kIo, "cannot decode PNG " + path.string());
  return raster;
}

void write_mask_png(const HoleMask& mask, const std::filesystem::path& path) {
  RgbRaster raster(static_cast<int>(mask.rows()), static_cast<int>(mask.cols()), 0);
  for (Index c = 0; c < mask.cols(); ++c) {
    for (Index r = 0; r < mask.rows(); ++r) {
      const std::uint8_t v = mask.mask(r, c) ? 255 : 0;
      raster.set(static_cast<int>(r), static_cast<int>(c), v, v, v);
    }
  }
  write_png(raster, path);
}

void write_slice_png(const RGBSlice& slice, const std::filesystem::path& path) {
  RgbRaster raster(static_cast<int>(slice.rows()), static_cast<int>(slice.cols()), 0);
  auto to_byte = [](float v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
  };
  for (Index c = 0; c < slice.cols(); ++c) {
    for (Index r = 0; r < slice.rows(); ++r) {
      raster.set(static_cast<int>(r), static_cast<int>(c), to_byte(slice.channels[0](r, c)),
                 to_byte(slice.channels[1](r, c)), to_byte(slice.channels[2](r, c)));
    }
  }
  write_png(raster, path);
}

}  // namespace petprior
