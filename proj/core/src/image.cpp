#include "warp/image.hpp"

#include <stdexcept>
#include <string>

namespace warp {

template <int Channels>
Raster<Channels>::Raster(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw std::invalid_argument("raster dimensions must be >= 1, got " + std::to_string(width) + "x" +
                                std::to_string(height));
  }
  data_.assign(static_cast<std::size_t>(width) * height * Channels, fill);
}

template class Raster<3>;
template class Raster<4>;

}  // namespace warp
