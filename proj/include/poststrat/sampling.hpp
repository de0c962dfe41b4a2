#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "poststrat/domain.hpp"
#include "poststrat/popgen.hpp"

namespace poststrat {

enum class Representation : int { Under = 0, Over = 1 };

std::string to_string(Representation r);
Representation parse_representation(const std::string& name);

/// Sample design: size n plus the inclusion-propensity multiplier applied to
/// non-binary units (1 = simple random sampling).
struct SamplingDesign {
  int n = 500;
  Representation representation = Representation::Under;
  double nb_rate_multiplier = 0.75;
  std::uint64_t seed = 0;

  void validate() const;
};

struct Sample {
  std::vector<Respondent> units;
  std::vector<std::size_t> source_index;  // positions in the source population
  SamplingDesign design;

  int non_binary_count() const;
};

/// Weighted sampling without replacement: each unit's inclusion propensity is
/// nb_rate_multiplier for non-binary-gender units and 1 otherwise
/// (Efraimidis-Spirakis exponential-key selection, equivalent to successive
/// draws proportional to the propensities). Units come back in population
/// order, so multiplier 1 with n = N returns the population itself.
Sample draw_sample(const Population& pop, const SamplingDesign& design);

}  // namespace poststrat
