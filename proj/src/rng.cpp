#include "poststrat/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace poststrat {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void SeedKey::mix() { state_ = splitmix64(state_); }

SeedKey& SeedKey::add(std::string_view s) {
  // Fold 8 bytes at a time, then the length, so distinct tags cannot collide
  // by concatenation.
  std::uint64_t acc = 0;
  int shift = 0;
  for (unsigned char c : s) {
    acc |= static_cast<std::uint64_t>(c) << shift;
    shift += 8;
    if (shift == 64) {
      add(acc);
      acc = 0;
      shift = 0;
    }
  }
  add(acc);
  add(static_cast<std::uint64_t>(s.size()));
  return *this;
}

double RandomStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RandomStream::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * m;
  have_spare_ = true;
  return u * m;
}

int RandomStream::categorical(std::span<const double> probs) {
  if (probs.empty()) throw std::invalid_argument("empty categorical");
  double total = 0.0;
  for (double p : probs) {
    if (p < 0.0) throw std::invalid_argument("negative categorical weight");
    total += p;
  }
  if (total <= 0.0) throw std::invalid_argument("zero-mass categorical");
  double u = uniform() * total;
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
    acc += probs[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(probs.size() - 1);
}

}  // namespace poststrat
