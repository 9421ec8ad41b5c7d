#include "warp/checkpoint.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "warp/errors.hpp"

namespace fs = std::filesystem;

namespace warp {

std::string encode_bitmap(const std::vector<bool>& bits) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out((bits.size() + 3) / 4, '0');
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (!bits[i]) continue;
    const auto nibble = static_cast<unsigned>(out[i / 4] >= 'a' ? out[i / 4] - 'a' + 10 : out[i / 4] - '0');
    out[i / 4] = kDigits[nibble | (1u << (i % 4))];
  }
  return out;
}

std::vector<bool> decode_bitmap(std::string_view hex, std::size_t count) {
  if (hex.size() != (count + 3) / 4) throw Error("bitmap length does not match cell count");
  std::vector<bool> bits(count, false);
  for (std::size_t i = 0; i < count; ++i) {
    const char ch = hex[i / 4];
    unsigned nibble;
    if (ch >= '0' && ch <= '9') nibble = static_cast<unsigned>(ch - '0');
    else if (ch >= 'a' && ch <= 'f') nibble = static_cast<unsigned>(ch - 'a' + 10);
    else throw Error("bitmap contains a non-hex character");
    bits[i] = (nibble >> (i % 4)) & 1u;
  }
  return bits;
}

void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << contents;
    out.flush();
    if (!out) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace warp
