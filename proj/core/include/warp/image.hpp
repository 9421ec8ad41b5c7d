#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace warp {

/// 8-bit interleaved raster with a fixed channel count.
template <int Channels>
class Raster {
 public:
  static constexpr int kChannels = Channels;

  Raster() = default;
  Raster(int width, int height, std::uint8_t fill = 0);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return data_.empty(); }
  std::size_t size() const { return data_.size(); }

  std::uint8_t& at(int x, int y, int c) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * Channels + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * Channels + c];
  }

  std::span<std::uint8_t> data() { return data_; }
  std::span<const std::uint8_t> data() const { return data_; }

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// RGB image, the only pixel format the harness operates on.
using Image = Raster<3>;
/// RGB plus straight (non-premultiplied) alpha, used for patches.
using RgbaImage = Raster<4>;

extern template class Raster<3>;
extern template class Raster<4>;

/// Per-pixel intensity used by the scripted detectors: R + G + B.
inline int pixel_intensity_sum(const Image& img, int x, int y) {
  return img.at(x, y, 0) + img.at(x, y, 1) + img.at(x, y, 2);
}

}  // namespace warp
