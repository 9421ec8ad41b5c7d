#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace warp {

/// Hex bitmap, bit i of the stream is element i (LSB-first within a nibble).
std::string encode_bitmap(const std::vector<bool>& bits);
std::vector<bool> decode_bitmap(std::string_view hex, std::size_t count);

/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace warp
