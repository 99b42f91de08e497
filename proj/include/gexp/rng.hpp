#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace gexp {

/// One step of the splitmix64 sequence; used to whiten seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Per-path random stream: the engine seed is derived from (master seed,
/// path index) alone, so paths can be simulated in any order or on any
/// thread without changing a single draw.
class PathRng {
 public:
  PathRng(std::uint64_t master_seed, long long path_index) {
    std::uint64_t s = master_seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(path_index + 1);
    eng_.seed(splitmix64(s));
  }

  /// Uniform on the open interval (0, 1); never returns an endpoint.
  double uniform() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal via the cosine Box-Muller branch: exactly two engine
  /// draws per call, so consumption is deterministic.
  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace gexp
