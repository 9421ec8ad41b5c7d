#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace warp {

/// Seeded generator whose output is bit-identical on every conforming
/// platform. The engine is std::mt19937_64 (fully specified); the
/// distributions are written out here because the standard ones are not.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform01();
  /// Uniform on [lo, hi]. Returns lo when hi <= lo.
  double uniform(double lo, double hi);
  /// Uniform integer on [lo, hi] inclusive, unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Standard normal draw (Box-Muller, both variates used).
  double normal();

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);
/// FNV-1a over the bytes of a string.
std::uint64_t hash_string(std::string_view s);

/// Seed for one noise realization: hash(run seed, image id, level index,
/// repeat index). Independent streams per (image, level, repeat).
std::uint64_t derive_seed(std::uint64_t run_seed, std::string_view image_id,
                          std::uint64_t level_index, std::uint64_t repeat = 0);

}  // namespace warp
