#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>

namespace poststrat {

/// splitmix64 step; used for seed mixing and derivation.
std::uint64_t splitmix64(std::uint64_t& state);

/// Order-sensitive fold of 64-bit fields into a derived seed. Replicate- and
/// purpose-level streams are derived from the base seed plus identifying
/// fields so that each stream is independent of which other streams exist.
class SeedKey {
 public:
  explicit SeedKey(std::uint64_t base) : state_(base ^ 0x9e3779b97f4a7c15ULL) {
    mix();
  }
  SeedKey& add(std::uint64_t v) {
    state_ ^= v;
    mix();
    return *this;
  }
  SeedKey& add(std::string_view s);
  std::uint64_t value() const { return state_; }

 private:
  void mix();
  std::uint64_t state_;
};

/// Deterministic random stream: std::mt19937_64 with hand-rolled
/// distributions so draws are identical across standard library
/// implementations for a given seed.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  /// Standard normal via the Marsaglia polar method.
  double normal();

  bool bernoulli(double p) { return uniform() < p; }

  /// Index draw proportional to probs (need not be normalized).
  int categorical(std::span<const double> probs);

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace poststrat
