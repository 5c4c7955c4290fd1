#pragma once

#include <cstdint>
#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace lowdim {

// splitmix64 finalizer (Vigna). Fixed forever: experiment seeds derived from
// it must replay across builds.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

// Stable 64-bit hash of a seed and a list of stream labels (cell index,
// trial index, ...). Used everywhere a sub-stream is split off a master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> labels) {
  std::uint64_t h = mix64(master);
  for (std::uint64_t v : labels) h = hash_combine(h, v);
  return h;
}

// Counter-based splitmix64 stream. Chosen over std::mt19937_64 because the
// standard distributions are implementation-defined, and per-trial streams
// need cheap re-seeding. Sequences are bit-reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // (0, 1]
  double uniform_open() {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Standard normal, Box-Muller with cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  // +1 or -1, one bit of entropy per call (pooled).
  double rademacher() {
    if (bits_left_ == 0) {
      bit_pool_ = next_u64();
      bits_left_ = 64;
    }
    const double s = (bit_pool_ & 1u) ? 1.0 : -1.0;
    bit_pool_ >>= 1;
    --bits_left_;
    return s;
  }

  // Unbiased integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // k distinct indices from {0..n-1}, ascending. Partial Fisher-Yates.
  std::vector<int> sample_without_replacement(int n, int k) {
    if (k < 0 || k > n) throw std::invalid_argument("sample_without_replacement: need 0 <= k <= n");
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(uniform_index(static_cast<std::uint64_t>(n - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    std::vector<int> out(idx.begin(), idx.begin() + k);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
  std::uint64_t bit_pool_ = 0;
  int bits_left_ = 0;
};

}  // namespace lowdim
