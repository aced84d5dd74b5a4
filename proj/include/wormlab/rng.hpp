#pragma once

// Reproducible random number streams. Every stream is derived from
// (master seed, module tag, replica, item) by hashing, so replicas and
// per-site substreams are independent by construction and a rerun with
// the same master seed reproduces every draw regardless of scheduling.

#include <array>
#include <cmath>
#include <cstdint>

namespace wormlab {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ (v + kGolden + (h << 6) + (h >> 2)));
}

// xoshiro256++ with splitmix-expanded seeding.
class RngStream {
 public:
  RngStream() : RngStream(0) {}
  explicit RngStream(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& word : state_) {
      s += kGolden;
      word = mix64(s);
    }
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

  // uniform in [0,1)
  double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

  // uniform in (0,1], safe for log()
  double uniform_pos() { return ((next_u64() >> 11) + 1) * 0x1.0p-53; }

  // uniform integer in [0, n), n >= 1, by 128-bit multiply-shift (bias is
  // n / 2^64, far below anything resolvable here; no division in the loop)
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  double exponential() { return -std::log(uniform_pos()); }

  // Poisson by inversion; fine for the moderate means used here.
  std::uint64_t poisson(double mean) {
    if (mean <= 0) return 0;
    if (mean > 64) {
      // split recursively so the inversion loop stays short
      std::uint64_t half = poisson(mean / 2);
      return half + poisson(mean - mean / 2);
    }
    double p = std::exp(-mean);
    double cum = p;
    double u = uniform();
    std::uint64_t k = 0;
    while (u > cum && k < 4096) {
      ++k;
      p *= mean / static_cast<double>(k);
      cum += p;
    }
    return k;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }
  std::array<std::uint64_t, 4> state_{};
};

// Module tags keep streams for different purposes disjoint.
enum class StreamTag : std::uint64_t {
  Worms = 0x776f726d73ULL,
  Walk = 0x77616c6bULL,
  Potential = 0x706f74ULL,
  Percolation = 0x70657263ULL,
  Harness = 0x6861726eULL,
  Oracle = 0x6f7261ULL,
};

inline RngStream derive_stream(std::uint64_t master_seed, StreamTag tag,
                               std::uint64_t replica = 0,
                               std::uint64_t item = 0) {
  std::uint64_t h = mix64(master_seed);
  h = hash_combine(h, static_cast<std::uint64_t>(tag));
  h = hash_combine(h, replica);
  h = hash_combine(h, item);
  return RngStream(h);
}

}  // namespace wormlab
