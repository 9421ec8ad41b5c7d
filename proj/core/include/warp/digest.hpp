#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "warp/image.hpp"

namespace warp {

/// Lowercase hex SHA-256.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

/// Digest of dimensions plus pixel bytes; two images share a digest only if
/// they are pixel-identical.
std::string image_digest(const Image& image);
std::string image_digest(const RgbaImage& image);

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws std::invalid_argument on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

}  // namespace warp
