#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "poststrat/domain.hpp"

namespace poststrat {

/// Everything needed to realize one finite synthetic population.
struct PopulationSpec {
  long long size = 100000;
  std::array<double, 3> gender_probs{0.49, 0.49, 0.02};
  ResponsePattern pattern = ResponsePattern::make({0.49, 0.49, 0.02}, 0.5);
  DemographicMargins margins{};
  Condition condition = condition_from_label(ConditionLabel::AllDifferent);
  // Optional main effects of age / education on the outcome; zero by default
  // (sensitivity hook, not part of the standard scenario).
  std::array<double, 3> age_effects{0.0, 0.0, 0.0};
  std::array<double, 3> edu_effects{0.0, 0.0, 0.0};
  std::uint64_t seed = 0;

  void validate() const;
};

/// A realized finite population plus its exact subgroup means. Truth values
/// are finite-population averages over the realized units; empty subgroups
/// leave the corresponding truth unset.
struct Population {
  std::vector<Respondent> units;
  double truth_population_mean = 0.0;
  std::array<std::optional<double>, 2> truth_sex_means;     // by latent sex
  std::array<std::optional<double>, 3> truth_gender_means;  // by gender
};

Population build_population(const PopulationSpec& spec);

/// Exact tallies of (latent sex, age, edu); total equals the population size.
PoststratTable sex_table(const Population& pop);

/// Exact tallies of (gender, age, edu); total equals the population size.
PoststratTable gender_table(const Population& pop);

/// CSV dump with columns gender,sex,age,edu,y (used for both populations and
/// samples).
void write_units_csv(std::ostream& out, std::span<const Respondent> units);

}  // namespace poststrat
