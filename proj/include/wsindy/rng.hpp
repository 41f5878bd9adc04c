#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace wsindy {

// splitmix64 step; used as a seed-mixing finalizer so that sub-stream seeds
// derived from a master seed are decorrelated.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Order-dependent combine of a seed with one more key component.
inline std::uint64_t hash_mix(std::uint64_t h, std::uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 12) + (h >> 4);
  std::uint64_t s = h;
  return splitmix64(s);
}

// Stream purposes.  Each (master seed, purpose, index) tuple owns an
// independent generator, so adding experiments or stages never perturbs the
// draws of existing ones.
namespace stream {
inline constexpr std::uint64_t kInitial = 0x1A;    // initial particle positions
inline constexpr std::uint64_t kBrownian = 0x2B;   // driving noise of the SDE
inline constexpr std::uint64_t kExtrinsic = 0x3C;  // measurement noise
inline constexpr std::uint64_t kSynthetic = 0x4D;  // test-only synthetic data
}  // namespace stream

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t purpose,
                                 std::uint64_t index = 0) {
  return hash_mix(hash_mix(master, purpose), index);
}

// mt19937_64 core with an explicit uniform->normal map (Box-Muller), so the
// produced values are identical across standard libraries; std::normal_distribution
// is not specified tightly enough for bit-reproducible datasets.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : eng_(seed) {}

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace wsindy
