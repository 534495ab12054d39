#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace cotrain {

// splitmix64; used for seeding and for deriving independent stream ids
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256++ with explicit, platform-independent uniform/normal draws.
// Results depend only on the seed, never on libstdc++ distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  // Derives a stream from (seed, ids...). Distinct id tuples give streams
  // that are independent for practical purposes.
  static Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> ids) {
    std::uint64_t h = seed;
    splitmix64(h);
    for (std::uint64_t id : ids) {
      h ^= id + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      splitmix64(h);
    }
    return Rng(h);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // uniform in [0, 1), 53-bit resolution
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // unbiased integer in [0, bound)
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit = bound * (UINT64_MAX / bound);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % bound;
  }

  // standard normal via Box-Muller, second value cached
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    constexpr double two_pi = 6.283185307179586476925286766559;
    spare_ = radius * std::sin(two_pi * u2);
    has_spare_ = true;
    return radius * std::cos(two_pi * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::uint64_t state_[4]{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cotrain
