#include "poststrat/harmonize.hpp"

#include <algorithm>
#include <cmath>

#include "poststrat/rng.hpp"
#include "poststrat/stats.hpp"

namespace poststrat {

std::size_t HarmonizedSample::retained_count() const {
  std::size_t count = 0;
  for (char r : retained) count += r != 0;
  return count;
}

int unit_axis_level(const HarmonizedSample& h, std::size_t i, TableAxis axis) {
  if (axis == TableAxis::Gender) return static_cast<int>(h.units[i].gender);
  if (h.imputed_sex) return static_cast<int>((*h.imputed_sex)[i]);
  return static_cast<int>(h.units[i].latent_sex);
}

double male_sex_probability(const ResponsePattern& pattern, GenderCategory g,
                            ImputationMode mode) {
  double q = pattern.male_sex_given_gender(g);
  return mode == ImputationMode::BestCase ? q : 1.0 - q;
}

std::array<double, 3> gender_split_shares(const ResponsePattern& pattern,
                                          SexCategory s, ImputationMode mode) {
  auto shares = pattern.gender_given_sex(s);
  if (mode == ImputationMode::WorstCase) {
    std::swap(shares[0], shares[1]);  // reflect male/female, keep non-binary
  }
  return shares;
}

namespace {

HarmonizedSample base_harmonized(const Sample& s, bool with_imputed) {
  HarmonizedSample h;
  h.units = s.units;
  h.retained.assign(s.units.size(), 1);
  if (with_imputed) {
    h.imputed_sex.emplace(s.units.size(), SexCategory::Male);
  }
  return h;
}

SexCategory identity_sex(GenderCategory g) {
  return g == GenderCategory::Female ? SexCategory::Female : SexCategory::Male;
}

}  // namespace

HarmonizedSample fifty_fifty_split(const Sample& s, std::uint64_t seed) {
  auto h = base_harmonized(s, true);
  RandomStream rng(seed);
  for (std::size_t i = 0; i < h.units.size(); ++i) {
    if (h.units[i].gender == GenderCategory::NonBinary) {
      (*h.imputed_sex)[i] =
          rng.bernoulli(0.5) ? SexCategory::Male : SexCategory::Female;
    } else {
      (*h.imputed_sex)[i] = identity_sex(h.units[i].gender);
    }
  }
  return h;
}

HarmonizedSample impute_all_female(const Sample& s) {
  auto h = base_harmonized(s, true);
  for (std::size_t i = 0; i < h.units.size(); ++i) {
    (*h.imputed_sex)[i] = h.units[i].gender == GenderCategory::Male
                              ? SexCategory::Male
                              : SexCategory::Female;
  }
  return h;
}

HarmonizedSample sex_model_impute(const Sample& s,
                                  const ImputationModelSpec& model,
                                  std::uint64_t seed) {
  model.true_proportions.validate();
  auto h = base_harmonized(s, true);
  RandomStream rng(seed);
  std::array<double, 3> p_male{};
  for (int g = 0; g < kGenderCount; ++g) {
    p_male[static_cast<std::size_t>(g)] = male_sex_probability(
        model.true_proportions, static_cast<GenderCategory>(g), model.mode);
  }
  for (std::size_t i = 0; i < h.units.size(); ++i) {
    double p = p_male[static_cast<std::size_t>(h.units[i].gender)];
    (*h.imputed_sex)[i] = rng.bernoulli(p) ? SexCategory::Male : SexCategory::Female;
  }
  return h;
}

HarmonizedSample sex_model_fitted(const Sample& s, std::uint64_t seed) {
  auto h = base_harmonized(s, true);
  // Saturated logistic fit of latent sex on the gender categories reduces to
  // the per-gender empirical male shares.
  std::array<double, 3> male_count{};
  std::array<double, 3> count{};
  for (const auto& u : s.units) {
    auto g = static_cast<std::size_t>(u.gender);
    count[g] += 1.0;
    if (u.latent_sex == SexCategory::Male) male_count[g] += 1.0;
  }
  std::array<double, 3> p_male{};
  for (std::size_t g = 0; g < 3; ++g) {
    p_male[g] = count[g] > 0.0 ? male_count[g] / count[g] : 0.5;
  }
  RandomStream rng(seed);
  for (std::size_t i = 0; i < h.units.size(); ++i) {
    double p = p_male[static_cast<std::size_t>(h.units[i].gender)];
    (*h.imputed_sex)[i] = rng.bernoulli(p) ? SexCategory::Male : SexCategory::Female;
  }
  return h;
}

HarmonizedSample remove_non_binary(const Sample& s) {
  auto h = base_harmonized(s, true);
  for (std::size_t i = 0; i < h.units.size(); ++i) {
    if (h.units[i].gender == GenderCategory::NonBinary) {
      h.retained[i] = 0;
    } else {
      (*h.imputed_sex)[i] = identity_sex(h.units[i].gender);
    }
  }
  return h;
}

HarmonizedSample pass_through(const Sample& s) { return base_harmonized(s, false); }

namespace {

void warn_small_cells(const PoststratTable& table,
                      std::vector<std::string>* warnings) {
  if (warnings == nullptr) return;
  for (const auto& cell : table.cells) {
    if (cell.count < 5.0) {
      warnings->push_back("split cell (" + to_string(table.axis) + "=" +
                          std::to_string(cell.axis_value) + ", age=" +
                          std::to_string(cell.age) + ", edu=" +
                          std::to_string(cell.edu) + ") has count " +
                          format_double(cell.count) + " < 5");
    }
  }
}

struct GenderCellAccumulator {
  // [gender][age][edu] -> count and source-sex mass
  std::array<std::array<std::array<double, 3>, 3>, 3> count{};
  std::array<std::array<std::array<std::array<double, 2>, 3>, 3>, 3> source{};

  void add(int gender, int age, int edu, double mass, SexCategory from) {
    auto g = static_cast<std::size_t>(gender);
    auto a = static_cast<std::size_t>(age - 1);
    auto e = static_cast<std::size_t>(edu - 1);
    count[g][a][e] += mass;
    source[g][a][e][static_cast<std::size_t>(from)] += mass;
  }

  PoststratTable build() const {
    std::vector<PoststratCell> cells;
    std::vector<std::array<double, 2>> masses;
    for (int g = 0; g < 3; ++g) {
      for (int a = 0; a < 3; ++a) {
        for (int e = 0; e < 3; ++e) {
          double c = count[static_cast<std::size_t>(g)][static_cast<std::size_t>(a)]
                          [static_cast<std::size_t>(e)];
          if (c > 0.0) {
            cells.push_back(PoststratCell{g, a + 1, e + 1, c});
            masses.push_back(source[static_cast<std::size_t>(g)]
                                   [static_cast<std::size_t>(a)]
                                   [static_cast<std::size_t>(e)]);
          }
        }
      }
    }
    return make_table(TableAxis::Gender, std::move(cells), std::move(masses));
  }
};

}  // namespace

PoststratTable assume_known_proportions(const PoststratTable& sex_axis_table,
                                        const std::array<double, 3>& assumed,
                                        double assumed_p_nb_male,
                                        std::vector<std::string>* warnings) {
  if (sex_axis_table.axis != TableAxis::Sex) {
    throw std::invalid_argument("expected a sex-axis table");
  }
  sex_axis_table.validate();
  double sum = assumed[0] + assumed[1] + assumed[2];
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("assumed gender distribution must sum to 1");
  }
  for (double p : assumed) {
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("assumed share outside [0,1]");
  }
  if (!(assumed_p_nb_male >= 0.0 && assumed_p_nb_male <= 1.0)) {
    throw std::invalid_argument("assumed_p_nb_male outside [0,1]");
  }
  // Implied sex-cell shares under the no-cross-assignment split.
  const double male_sex_share = assumed[0] + assumed_p_nb_male * assumed[2];
  const double female_sex_share = assumed[1] + (1.0 - assumed_p_nb_male) * assumed[2];
  if (assumed[2] > 0.0 && assumed[2] >= std::min(male_sex_share, female_sex_share)) {
    throw std::invalid_argument(
        "assumed non-binary share too large to split the sex cells");
  }

  GenderCellAccumulator acc;
  for (const auto& cell : sex_axis_table.cells) {
    if (cell.axis_value == static_cast<int>(SexCategory::Male)) {
      if (male_sex_share <= 0.0) {
        throw std::invalid_argument("male sex share is zero; cannot split");
      }
      acc.add(0, cell.age, cell.edu, cell.count * assumed[0] / male_sex_share,
              SexCategory::Male);
      acc.add(2, cell.age, cell.edu,
              cell.count * assumed_p_nb_male * assumed[2] / male_sex_share,
              SexCategory::Male);
    } else {
      if (female_sex_share <= 0.0) {
        throw std::invalid_argument("female sex share is zero; cannot split");
      }
      acc.add(1, cell.age, cell.edu, cell.count * assumed[1] / female_sex_share,
              SexCategory::Female);
      acc.add(2, cell.age, cell.edu,
              cell.count * (1.0 - assumed_p_nb_male) * assumed[2] / female_sex_share,
              SexCategory::Female);
    }
  }
  auto table = acc.build();
  warn_small_cells(table, warnings);
  return table;
}

PoststratTable gender_model_split(const PoststratTable& sex_axis_table,
                                  const ImputationModelSpec& model,
                                  std::vector<std::string>* warnings) {
  if (sex_axis_table.axis != TableAxis::Sex) {
    throw std::invalid_argument("expected a sex-axis table");
  }
  sex_axis_table.validate();
  model.true_proportions.validate();

  std::array<std::array<double, 3>, 2> shares{};
  for (int s = 0; s < kSexCount; ++s) {
    shares[static_cast<std::size_t>(s)] = gender_split_shares(
        model.true_proportions, static_cast<SexCategory>(s), model.mode);
  }

  GenderCellAccumulator acc;
  for (const auto& cell : sex_axis_table.cells) {
    auto from = static_cast<SexCategory>(cell.axis_value);
    const auto& share = shares[static_cast<std::size_t>(cell.axis_value)];
    for (int g = 0; g < kGenderCount; ++g) {
      double mass = cell.count * share[static_cast<std::size_t>(g)];
      if (mass > 0.0) acc.add(g, cell.age, cell.edu, mass, from);
    }
  }
  auto table = acc.build();
  warn_small_cells(table, warnings);
  return table;
}

}  // namespace poststrat
