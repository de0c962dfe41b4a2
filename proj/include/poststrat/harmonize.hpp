#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "poststrat/domain.hpp"
#include "poststrat/sampling.hpp"

namespace poststrat {

/// A sample after applying a harmonization method. Sample-side methods
/// assign imputed_sex to every retained unit; population-side methods leave
/// it disengaged and operate on the control table instead.
struct HarmonizedSample {
  std::vector<Respondent> units;
  std::vector<char> retained;
  std::optional<std::vector<SexCategory>> imputed_sex;

  std::size_t retained_count() const;
};

enum class ImputationMode : int { BestCase = 0, WorstCase = 1 };

/// Oracle imputation model: the conditional response probabilities implied by
/// a response pattern, either as-is (best case) or reflected q -> 1-q per
/// gender row (worst case).
struct ImputationModelSpec {
  ImputationMode mode = ImputationMode::BestCase;
  ResponsePattern true_proportions = ResponsePattern::make({0.49, 0.49, 0.02}, 0.5);
};

/// Axis level of a unit for an analysis on the given axis: observed gender
/// for gender-axis tables, imputed sex (falling back to the latent response
/// when no imputation was done) for sex-axis tables.
int unit_axis_level(const HarmonizedSample& h, std::size_t i, TableAxis axis);

/// P(imputed sex = male | gender) under the model.
double male_sex_probability(const ResponsePattern& pattern, GenderCategory g,
                            ImputationMode mode);

/// P(gender | sex) used for population-side splits. Worst case swaps the
/// male and female gender shares and keeps the non-binary share.
std::array<double, 3> gender_split_shares(const ResponsePattern& pattern,
                                          SexCategory s, ImputationMode mode);

// ---- sample-side methods ----

/// Non-binary units are assigned male/female sex with probability 0.5 each;
/// male/female gender maps to the same sex.
HarmonizedSample fifty_fifty_split(const Sample& s, std::uint64_t seed);

/// Non-binary -> female sex; male/female gender maps to the same sex.
HarmonizedSample impute_all_female(const Sample& s);

/// Every unit's sex is drawn from the model's P(sex | gender). Degenerate
/// conditionals produce deterministic assignments.
HarmonizedSample sex_model_impute(const Sample& s,
                                  const ImputationModelSpec& model,
                                  std::uint64_t seed);

/// Extension behind a config flag: a saturated logistic fit of the sample's
/// own latent sex responses by gender, then stochastic imputation from the
/// fitted conditionals. Not part of the standard method set.
HarmonizedSample sex_model_fitted(const Sample& s, std::uint64_t seed);

/// Drops non-binary units; the rest map gender to sex directly.
HarmonizedSample remove_non_binary(const Sample& s);

/// Population-side methods keep the sample as observed.
HarmonizedSample pass_through(const Sample& s);

// ---- population-side methods ----

/// Splits each sex cell with an assumed gender distribution: the male-sex
/// cell divides between male gender and the male-answering share of
/// non-binary gender (and analogously for female), with no male/female
/// cross-assignment. Output cells carry their source-sex masses.
PoststratTable assume_known_proportions(const PoststratTable& sex_axis_table,
                                        const std::array<double, 3>& assumed_gender_probs,
                                        double assumed_p_nb_male,
                                        std::vector<std::string>* warnings = nullptr);

/// Splits each sex cell by the model's P(gender | sex) (fractional counts
/// allowed). Output cells carry their source-sex masses.
PoststratTable gender_model_split(const PoststratTable& sex_axis_table,
                                  const ImputationModelSpec& model,
                                  std::vector<std::string>* warnings = nullptr);

}  // namespace poststrat
