#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace poststrat {

// Core survey vocabulary shared by every other module. All types here are
// immutable value objects with no I/O and no randomness.

enum class GenderCategory : int { Male = 0, Female = 1, NonBinary = 2 };
enum class SexCategory : int { Male = 0, Female = 1 };

inline constexpr int kGenderCount = 3;
inline constexpr int kSexCount = 2;
inline constexpr int kAgeLevels = 3;
inline constexpr int kEduLevels = 3;

std::string to_string(GenderCategory g);
std::string to_string(SexCategory s);
GenderCategory parse_gender(const std::string& name);
SexCategory parse_sex(const std::string& name);

/// Joint distribution of (gender response, binary-sex response) together with
/// the parameters it was constructed from. At the defaults the joint is
/// 48%/1%/1%/48% for the male/female gender rows plus p*2% / (1-p)*2% for the
/// non-binary row.
struct ResponsePattern {
  std::array<std::array<double, 2>, 3> joint{};  // [gender][sex]
  double p_nb_male = 0.5;
  // Share of male-gender respondents who answer female to the sex question
  // (and vice versa). 1/49 makes the default joint hit the percentages above
  // exactly.
  double cross_rate_male_gender = 1.0 / 49.0;
  double cross_rate_female_gender = 1.0 / 49.0;

  static ResponsePattern make(const std::array<double, 3>& gender_probs,
                              double p_nb_male,
                              double cross_rate_male_gender = 1.0 / 49.0,
                              double cross_rate_female_gender = 1.0 / 49.0);

  double gender_prob(GenderCategory g) const;
  double sex_marginal(SexCategory s) const;
  /// P(sex = male | gender), computed from the stored rates so degenerate
  /// rows (zero gender mass) still yield a well-defined conditional.
  double male_sex_given_gender(GenderCategory g) const;
  /// P(gender | sex) for all three genders; throws if the sex column has
  /// zero mass.
  std::array<double, 3> gender_given_sex(SexCategory s) const;
  void validate() const;
};

/// Age-group and education margins, three levels each.
struct DemographicMargins {
  std::array<double, 3> age_probs{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  std::array<double, 3> edu_probs{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  void validate() const;
};

enum class ConditionLabel : int {
  AllSame = 0,
  MaleFemaleSame = 1,
  FemaleNbSame = 2,
  AllDifferent = 3,
};

std::string to_string(ConditionLabel label);
ConditionLabel parse_condition_label(const std::string& name);

/// Outcome means per gender category plus the outcome standard deviation.
struct Condition {
  double mu_male = 0.0;
  double mu_female = 0.0;
  double mu_nonbinary = 0.0;
  double sigma = 4.0;
  ConditionLabel label = ConditionLabel::AllSame;

  double mu(GenderCategory g) const;
  /// Checks sigma > 0 and that the label matches the equality pattern of the
  /// three means.
  void validate() const;
};

/// Builds the condition row for a label. The canonical rows (at scale = 10)
/// are AllSame (0,0,0), MaleFemaleSame (10,10,0), FemaleNbSame (10,0,0) and
/// AllDifferent (10,-10,0); means are multiplied by scale/10.
Condition condition_from_label(ConditionLabel label, double scale = 10.0,
                               double sigma = 4.0);

/// One simulated person. latent_sex is the unit's hypothetical answer to a
/// binary sex question and exists for every unit, including non-binary ones.
struct Respondent {
  GenderCategory gender = GenderCategory::Male;
  SexCategory latent_sex = SexCategory::Male;
  int age = 1;  // 1..3
  int edu = 1;  // 1..3
  double y = 0.0;
};

enum class TableAxis : int { Sex = 0, Gender = 1 };

std::string to_string(TableAxis axis);

/// One poststratification cell. axis_value is coded on the table's axis
/// (SexCategory or GenderCategory as int).
struct PoststratCell {
  int axis_value = 0;
  int age = 1;
  int edu = 1;
  double count = 0.0;
};

/// Cell counts over (sex-or-gender) x age x education. Cells are unique per
/// key and kept in canonical (axis_value, age, edu) order; zero-count cells
/// are not stored.
struct PoststratTable {
  TableAxis axis = TableAxis::Sex;
  std::vector<PoststratCell> cells;
  double total = 0.0;
  /// For tables produced by splitting a sex-axis table: per-cell mass that
  /// originated from the male / female sex cell. Empty otherwise.
  std::vector<std::array<double, 2>> source_sex_mass;

  int axis_levels() const { return axis == TableAxis::Sex ? 2 : 3; }
  double axis_margin(int axis_value) const;
  const PoststratCell* find(int axis_value, int age, int edu) const;
  void validate() const;
};

/// Builds a table from (possibly unsorted) cells, dropping zero-count cells
/// and checking key uniqueness.
PoststratTable make_table(TableAxis axis, std::vector<PoststratCell> cells,
                          std::vector<std::array<double, 2>> source_sex_mass = {});

enum class HarmonizationMethodKind : int {
  FiftyFiftySplit = 0,
  ImputeAllFemale = 1,
  SexModelBest = 2,
  SexModelWorst = 3,
  GenderModelBest = 4,
  GenderModelWorst = 5,
  RemoveNonBinary = 6,
  AssumeKnownProportions = 7,
};

/// True for methods that transform the population table (gender-axis
/// analyses); false for methods that transform the sample (sex-axis).
bool transforms_population_table(HarmonizationMethodKind kind);

std::string method_name(HarmonizationMethodKind kind);
HarmonizationMethodKind parse_method(const std::string& name);

struct HarmonizationMethod {
  HarmonizationMethodKind kind = HarmonizationMethodKind::FiftyFiftySplit;
  // Parameters for AssumeKnownProportions.
  std::array<double, 3> assumed_gender_probs{0.49, 0.49, 0.02};
  double assumed_p_nb_male = 0.5;
};

enum class Target : int {
  PopulationMean = 0,
  SexMeanMale = 1,
  SexMeanFemale = 2,
  GenderMeanMale = 3,
  GenderMeanFemale = 4,
  GenderMeanNonBinary = 5,
};

inline constexpr std::array<Target, 6> kAllTargets = {
    Target::PopulationMean,     Target::SexMeanMale,
    Target::SexMeanFemale,      Target::GenderMeanMale,
    Target::GenderMeanFemale,   Target::GenderMeanNonBinary,
};

std::string target_name(Target t);
Target parse_target(const std::string& name);

/// One estimate for one target: point, 95% interval, truth and availability.
/// When available is false the numeric fields are meaningless and are left
/// out of any serialization.
struct EstimateRecord {
  Target target = Target::PopulationMean;
  bool available = false;
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::optional<double> truth;
};

}  // namespace poststrat
