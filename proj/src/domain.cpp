#include "poststrat/domain.hpp"

#include <algorithm>
#include <cmath>

namespace poststrat {

namespace {

constexpr double kProbTol = 1e-12;

void check_probability(double p, const char* what) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::invalid_argument(std::string(what) + " must lie in [0,1]");
  }
}

}  // namespace

std::string to_string(GenderCategory g) {
  switch (g) {
    case GenderCategory::Male: return "male";
    case GenderCategory::Female: return "female";
    case GenderCategory::NonBinary: return "nonbinary";
  }
  throw std::invalid_argument("bad GenderCategory");
}

std::string to_string(SexCategory s) {
  return s == SexCategory::Male ? "male" : "female";
}

GenderCategory parse_gender(const std::string& name) {
  if (name == "male") return GenderCategory::Male;
  if (name == "female") return GenderCategory::Female;
  if (name == "nonbinary") return GenderCategory::NonBinary;
  throw std::invalid_argument("unknown gender category: " + name);
}

SexCategory parse_sex(const std::string& name) {
  if (name == "male") return SexCategory::Male;
  if (name == "female") return SexCategory::Female;
  throw std::invalid_argument("unknown sex category: " + name);
}

ResponsePattern ResponsePattern::make(const std::array<double, 3>& gender_probs,
                                      double p_nb_male,
                                      double cross_rate_male_gender,
                                      double cross_rate_female_gender) {
  check_probability(p_nb_male, "p_nb_male");
  check_probability(cross_rate_male_gender, "cross_rate_male_gender");
  check_probability(cross_rate_female_gender, "cross_rate_female_gender");
  for (double p : gender_probs) check_probability(p, "gender probability");
  double sum = gender_probs[0] + gender_probs[1] + gender_probs[2];
  if (std::abs(sum - 1.0) > kProbTol) {
    throw std::invalid_argument("gender probabilities must sum to 1");
  }

  ResponsePattern r;
  r.p_nb_male = p_nb_male;
  r.cross_rate_male_gender = cross_rate_male_gender;
  r.cross_rate_female_gender = cross_rate_female_gender;
  const double pm = gender_probs[0], pf = gender_probs[1], po = gender_probs[2];
  r.joint[0][0] = pm * (1.0 - cross_rate_male_gender);
  r.joint[0][1] = pm * cross_rate_male_gender;
  r.joint[1][0] = pf * cross_rate_female_gender;
  r.joint[1][1] = pf * (1.0 - cross_rate_female_gender);
  r.joint[2][0] = po * p_nb_male;
  r.joint[2][1] = po * (1.0 - p_nb_male);
  r.validate();
  return r;
}

double ResponsePattern::gender_prob(GenderCategory g) const {
  const auto& row = joint[static_cast<int>(g)];
  return row[0] + row[1];
}

double ResponsePattern::sex_marginal(SexCategory s) const {
  int c = static_cast<int>(s);
  return joint[0][c] + joint[1][c] + joint[2][c];
}

double ResponsePattern::male_sex_given_gender(GenderCategory g) const {
  switch (g) {
    case GenderCategory::Male: return 1.0 - cross_rate_male_gender;
    case GenderCategory::Female: return cross_rate_female_gender;
    case GenderCategory::NonBinary: return p_nb_male;
  }
  throw std::invalid_argument("bad GenderCategory");
}

std::array<double, 3> ResponsePattern::gender_given_sex(SexCategory s) const {
  int c = static_cast<int>(s);
  double col = joint[0][c] + joint[1][c] + joint[2][c];
  if (col <= 0.0) {
    throw std::domain_error("sex column has zero mass; conditional undefined");
  }
  return {joint[0][c] / col, joint[1][c] / col, joint[2][c] / col};
}

void ResponsePattern::validate() const {
  double sum = 0.0;
  for (const auto& row : joint) {
    for (double p : row) {
      check_probability(p, "joint probability");
      sum += p;
    }
  }
  if (std::abs(sum - 1.0) > kProbTol) {
    throw std::invalid_argument("joint probabilities must sum to 1");
  }
  check_probability(p_nb_male, "p_nb_male");
  check_probability(cross_rate_male_gender, "cross_rate_male_gender");
  check_probability(cross_rate_female_gender, "cross_rate_female_gender");
  double po = gender_prob(GenderCategory::NonBinary);
  if (std::abs(joint[2][0] - p_nb_male * po) > 1e-9 ||
      std::abs(joint[2][1] - (1.0 - p_nb_male) * po) > 1e-9) {
    throw std::invalid_argument("non-binary row inconsistent with p_nb_male");
  }
}

void DemographicMargins::validate() const {
  for (const auto* probs : {&age_probs, &edu_probs}) {
    double sum = 0.0;
    for (double p : *probs) {
      check_probability(p, "margin probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kProbTol) {
      throw std::invalid_argument("margin probabilities must sum to 1");
    }
  }
}

std::string to_string(ConditionLabel label) {
  switch (label) {
    case ConditionLabel::AllSame: return "all_same";
    case ConditionLabel::MaleFemaleSame: return "male_female_same";
    case ConditionLabel::FemaleNbSame: return "female_nb_same";
    case ConditionLabel::AllDifferent: return "all_different";
  }
  throw std::invalid_argument("bad ConditionLabel");
}

ConditionLabel parse_condition_label(const std::string& name) {
  if (name == "all_same") return ConditionLabel::AllSame;
  if (name == "male_female_same") return ConditionLabel::MaleFemaleSame;
  if (name == "female_nb_same") return ConditionLabel::FemaleNbSame;
  if (name == "all_different") return ConditionLabel::AllDifferent;
  throw std::invalid_argument("unknown condition label: " + name);
}

double Condition::mu(GenderCategory g) const {
  switch (g) {
    case GenderCategory::Male: return mu_male;
    case GenderCategory::Female: return mu_female;
    case GenderCategory::NonBinary: return mu_nonbinary;
  }
  throw std::invalid_argument("bad GenderCategory");
}

void Condition::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  const bool mf = mu_male == mu_female;
  const bool fn = mu_female == mu_nonbinary;
  const bool mn = mu_male == mu_nonbinary;
  bool ok = false;
  switch (label) {
    case ConditionLabel::AllSame: ok = mf && fn; break;
    case ConditionLabel::MaleFemaleSame: ok = mf && !fn; break;
    case ConditionLabel::FemaleNbSame: ok = fn && !mf; break;
    case ConditionLabel::AllDifferent: ok = !mf && !fn && !mn; break;
  }
  if (!ok) {
    throw std::invalid_argument("condition label inconsistent with means");
  }
}

Condition condition_from_label(ConditionLabel label, double scale, double sigma) {
  if (!(scale > 0.0)) throw std::invalid_argument("scale must be positive");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  // Canonical rows at scale 10.
  double m = 0.0, f = 0.0, nb = 0.0;
  switch (label) {
    case ConditionLabel::AllSame: break;
    case ConditionLabel::MaleFemaleSame: m = 10.0; f = 10.0; break;
    case ConditionLabel::FemaleNbSame: m = 10.0; break;
    case ConditionLabel::AllDifferent: m = 10.0; f = -10.0; break;
  }
  const double k = scale / 10.0;
  Condition c{m * k, f * k, nb * k, sigma, label};
  c.validate();
  return c;
}

std::string to_string(TableAxis axis) {
  return axis == TableAxis::Sex ? "sex" : "gender";
}

double PoststratTable::axis_margin(int axis_value) const {
  double sum = 0.0;
  for (const auto& cell : cells) {
    if (cell.axis_value == axis_value) sum += cell.count;
  }
  return sum;
}

const PoststratCell* PoststratTable::find(int axis_value, int age, int edu) const {
  for (const auto& cell : cells) {
    if (cell.axis_value == axis_value && cell.age == age && cell.edu == edu) {
      return &cell;
    }
  }
  return nullptr;
}

void PoststratTable::validate() const {
  double sum = 0.0;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& cell = cells[i];
    if (cell.count < 0.0) throw std::invalid_argument("negative cell count");
    if (cell.axis_value < 0 || cell.axis_value >= axis_levels() ||
        cell.age < 1 || cell.age > kAgeLevels || cell.edu < 1 ||
        cell.edu > kEduLevels) {
      throw std::invalid_argument("cell key out of range");
    }
    if (i > 0) {
      const auto& prev = cells[i - 1];
      auto key = std::array{cell.axis_value, cell.age, cell.edu};
      auto pkey = std::array{prev.axis_value, prev.age, prev.edu};
      if (!(pkey < key)) {
        throw std::invalid_argument("cells not unique/sorted by key");
      }
    }
    sum += cell.count;
  }
  if (std::abs(sum - total) > 1e-9 * std::max(1.0, std::abs(total))) {
    throw std::invalid_argument("cell counts do not sum to total");
  }
  if (!source_sex_mass.empty() && source_sex_mass.size() != cells.size()) {
    throw std::invalid_argument("source_sex_mass size mismatch");
  }
}

PoststratTable make_table(TableAxis axis, std::vector<PoststratCell> cells,
                          std::vector<std::array<double, 2>> source_sex_mass) {
  if (!source_sex_mass.empty() && source_sex_mass.size() != cells.size()) {
    throw std::invalid_argument("source_sex_mass size mismatch");
  }
  std::vector<std::size_t> order(cells.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    auto ka = std::array{cells[a].axis_value, cells[a].age, cells[a].edu};
    auto kb = std::array{cells[b].axis_value, cells[b].age, cells[b].edu};
    return ka < kb;
  });

  PoststratTable table;
  table.axis = axis;
  for (std::size_t idx : order) {
    if (cells[idx].count == 0.0) continue;
    table.cells.push_back(cells[idx]);
    if (!source_sex_mass.empty()) {
      table.source_sex_mass.push_back(source_sex_mass[idx]);
    }
    table.total += cells[idx].count;
  }
  table.validate();
  return table;
}

bool transforms_population_table(HarmonizationMethodKind kind) {
  switch (kind) {
    case HarmonizationMethodKind::GenderModelBest:
    case HarmonizationMethodKind::GenderModelWorst:
    case HarmonizationMethodKind::AssumeKnownProportions:
      return true;
    default:
      return false;
  }
}

std::string method_name(HarmonizationMethodKind kind) {
  switch (kind) {
    case HarmonizationMethodKind::FiftyFiftySplit: return "fifty_fifty";
    case HarmonizationMethodKind::ImputeAllFemale: return "impute_female";
    case HarmonizationMethodKind::SexModelBest: return "sex_model_best";
    case HarmonizationMethodKind::SexModelWorst: return "sex_model_worst";
    case HarmonizationMethodKind::GenderModelBest: return "gender_model_best";
    case HarmonizationMethodKind::GenderModelWorst: return "gender_model_worst";
    case HarmonizationMethodKind::RemoveNonBinary: return "remove_nb";
    case HarmonizationMethodKind::AssumeKnownProportions: return "known_proportions";
  }
  throw std::invalid_argument("bad HarmonizationMethodKind");
}

HarmonizationMethodKind parse_method(const std::string& name) {
  if (name == "fifty_fifty") return HarmonizationMethodKind::FiftyFiftySplit;
  if (name == "impute_female") return HarmonizationMethodKind::ImputeAllFemale;
  if (name == "sex_model_best") return HarmonizationMethodKind::SexModelBest;
  if (name == "sex_model_worst") return HarmonizationMethodKind::SexModelWorst;
  if (name == "gender_model_best") return HarmonizationMethodKind::GenderModelBest;
  if (name == "gender_model_worst") return HarmonizationMethodKind::GenderModelWorst;
  if (name == "remove_nb") return HarmonizationMethodKind::RemoveNonBinary;
  if (name == "known_proportions") return HarmonizationMethodKind::AssumeKnownProportions;
  throw std::invalid_argument("unknown harmonization method: " + name);
}

std::string target_name(Target t) {
  switch (t) {
    case Target::PopulationMean: return "population_mean";
    case Target::SexMeanMale: return "sex_mean_male";
    case Target::SexMeanFemale: return "sex_mean_female";
    case Target::GenderMeanMale: return "gender_mean_male";
    case Target::GenderMeanFemale: return "gender_mean_female";
    case Target::GenderMeanNonBinary: return "gender_mean_nb";
  }
  throw std::invalid_argument("bad Target");
}

Target parse_target(const std::string& name) {
  for (Target t : kAllTargets) {
    if (target_name(t) == name) return t;
  }
  throw std::invalid_argument("unknown target: " + name);
}

}  // namespace poststrat
