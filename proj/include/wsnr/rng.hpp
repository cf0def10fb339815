#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace wsnr {

// Seed mixer used to derive independent streams from one user seed.
struct SplitMix64 {
  std::uint64_t state;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state{seed} {}

  constexpr std::uint64_t next() noexcept {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

/// Deterministic random source. Every conversion from raw bits is done
/// here rather than through <random> distributions, whose output is
/// implementation-defined, so a seed replays identically everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_{SplitMix64{seed}.next()} {}

  // Stream `stream` of `seed`; streams of one seed are independent.
  static Rng stream(std::uint64_t seed, std::uint64_t stream) {
    SplitMix64 mix{seed};
    std::uint64_t s = mix.next();
    for (std::uint64_t i = 0; i <= stream; ++i) s ^= mix.next() + i;
    return Rng{s};
  }

  std::uint64_t bits() { return engine_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // (0, 1]
  double uniform_open_closed() {
    return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return p > 0.0 && uniform() < p; }

  // Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = n == 0 ? 0 : (~std::uint64_t{0} - n + 1) % n;
    for (;;) {
      const std::uint64_t r = engine_();
      if (r >= limit) return r % n;
    }
  }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace wsnr
