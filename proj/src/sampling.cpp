#include "poststrat/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "poststrat/rng.hpp"

namespace poststrat {

std::string to_string(Representation r) {
  return r == Representation::Under ? "under" : "over";
}

Representation parse_representation(const std::string& name) {
  if (name == "under") return Representation::Under;
  if (name == "over") return Representation::Over;
  throw std::invalid_argument("unknown representation: " + name);
}

void SamplingDesign::validate() const {
  if (n < 1) throw std::invalid_argument("sample size must be >= 1");
  if (!(nb_rate_multiplier > 0.0)) {
    throw std::invalid_argument("nb_rate_multiplier must be positive");
  }
}

int Sample::non_binary_count() const {
  int count = 0;
  for (const auto& u : units) {
    if (u.gender == GenderCategory::NonBinary) ++count;
  }
  return count;
}

Sample draw_sample(const Population& pop, const SamplingDesign& design) {
  design.validate();
  const std::size_t big_n = pop.units.size();
  if (big_n == 0) throw std::invalid_argument("empty population");
  if (static_cast<std::size_t>(design.n) > big_n) {
    throw std::invalid_argument("sample size exceeds population size");
  }

  RandomStream rng(design.seed);
  // Exponential-key selection: key_i = log(u_i) / w_i, keep the n largest.
  std::vector<double> keys(big_n);
  for (std::size_t i = 0; i < big_n; ++i) {
    double w = pop.units[i].gender == GenderCategory::NonBinary
                   ? design.nb_rate_multiplier
                   : 1.0;
    double u = rng.uniform();
    keys[i] = u > 0.0 ? std::log(u) / w
                      : -std::numeric_limits<double>::infinity();
  }

  std::vector<std::size_t> order(big_n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto mid = order.begin() + design.n;
  std::nth_element(order.begin(), mid - 1, order.end(),
                   [&](std::size_t a, std::size_t b) {
                     if (keys[a] != keys[b]) return keys[a] > keys[b];
                     return a < b;
                   });
  order.resize(static_cast<std::size_t>(design.n));
  std::sort(order.begin(), order.end());

  Sample sample;
  sample.design = design;
  sample.units.reserve(order.size());
  sample.source_index = std::move(order);
  for (std::size_t idx : sample.source_index) {
    sample.units.push_back(pop.units[idx]);
  }
  return sample;
}

}  // namespace poststrat
