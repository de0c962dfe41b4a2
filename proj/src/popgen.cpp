#include "poststrat/popgen.hpp"

#include <array>
#include <cmath>

#include "poststrat/rng.hpp"
#include "poststrat/stats.hpp"

namespace poststrat {

void PopulationSpec::validate() const {
  if (size < 1) throw std::invalid_argument("population size must be >= 1");
  double sum = gender_probs[0] + gender_probs[1] + gender_probs[2];
  if (std::abs(sum - 1.0) > 1e-12) {
    throw std::invalid_argument("gender probabilities must sum to 1");
  }
  pattern.validate();
  for (int g = 0; g < kGenderCount; ++g) {
    if (std::abs(pattern.gender_prob(static_cast<GenderCategory>(g)) -
                 gender_probs[static_cast<std::size_t>(g)]) > 1e-9) {
      throw std::invalid_argument(
          "response pattern gender marginal disagrees with gender_probs");
    }
  }
  margins.validate();
  condition.validate();
}

Population build_population(const PopulationSpec& spec) {
  spec.validate();
  RandomStream rng(spec.seed);

  // Flattened joint in (gender, sex) order for the categorical draw.
  std::array<double, 6> joint{};
  for (int g = 0; g < 3; ++g) {
    for (int s = 0; s < 2; ++s) {
      joint[static_cast<std::size_t>(g * 2 + s)] = spec.pattern.joint[g][s];
    }
  }

  Population pop;
  pop.units.reserve(static_cast<std::size_t>(spec.size));

  double sum_all = 0.0;
  std::array<double, 2> sum_sex{};
  std::array<long long, 2> n_sex{};
  std::array<double, 3> sum_gender{};
  std::array<long long, 3> n_gender{};

  for (long long i = 0; i < spec.size; ++i) {
    int cat = rng.categorical(joint);
    auto gender = static_cast<GenderCategory>(cat / 2);
    auto sex = static_cast<SexCategory>(cat % 2);
    int age = rng.categorical(spec.margins.age_probs) + 1;
    int edu = rng.categorical(spec.margins.edu_probs) + 1;
    double mu = spec.condition.mu(gender) +
                spec.age_effects[static_cast<std::size_t>(age - 1)] +
                spec.edu_effects[static_cast<std::size_t>(edu - 1)];
    double y = mu + spec.condition.sigma * rng.normal();
    pop.units.push_back(Respondent{gender, sex, age, edu, y});

    sum_all += y;
    sum_sex[static_cast<std::size_t>(sex)] += y;
    ++n_sex[static_cast<std::size_t>(sex)];
    sum_gender[static_cast<std::size_t>(gender)] += y;
    ++n_gender[static_cast<std::size_t>(gender)];
  }

  pop.truth_population_mean = sum_all / static_cast<double>(spec.size);
  for (int s = 0; s < 2; ++s) {
    if (n_sex[static_cast<std::size_t>(s)] > 0) {
      pop.truth_sex_means[static_cast<std::size_t>(s)] =
          sum_sex[static_cast<std::size_t>(s)] /
          static_cast<double>(n_sex[static_cast<std::size_t>(s)]);
    }
  }
  for (int g = 0; g < 3; ++g) {
    if (n_gender[static_cast<std::size_t>(g)] > 0) {
      pop.truth_gender_means[static_cast<std::size_t>(g)] =
          sum_gender[static_cast<std::size_t>(g)] /
          static_cast<double>(n_gender[static_cast<std::size_t>(g)]);
    }
  }
  return pop;
}

namespace {

PoststratTable tally(const Population& pop, TableAxis axis) {
  if (pop.units.empty()) throw std::invalid_argument("empty population");
  const int levels = axis == TableAxis::Sex ? 2 : 3;
  // counts[axis][age][edu]
  std::array<std::array<std::array<double, 3>, 3>, 3> counts{};
  for (const auto& unit : pop.units) {
    int v = axis == TableAxis::Sex ? static_cast<int>(unit.latent_sex)
                                   : static_cast<int>(unit.gender);
    counts[static_cast<std::size_t>(v)][static_cast<std::size_t>(unit.age - 1)]
          [static_cast<std::size_t>(unit.edu - 1)] += 1.0;
  }
  std::vector<PoststratCell> cells;
  for (int v = 0; v < levels; ++v) {
    for (int a = 0; a < kAgeLevels; ++a) {
      for (int e = 0; e < kEduLevels; ++e) {
        double c = counts[static_cast<std::size_t>(v)][static_cast<std::size_t>(a)]
                         [static_cast<std::size_t>(e)];
        if (c > 0.0) cells.push_back(PoststratCell{v, a + 1, e + 1, c});
      }
    }
  }
  return make_table(axis, std::move(cells));
}

}  // namespace

PoststratTable sex_table(const Population& pop) { return tally(pop, TableAxis::Sex); }

PoststratTable gender_table(const Population& pop) {
  return tally(pop, TableAxis::Gender);
}

void write_units_csv(std::ostream& out, std::span<const Respondent> units) {
  out << "gender,sex,age,edu,y\n";
  for (const auto& u : units) {
    out << to_string(u.gender) << ',' << to_string(u.latent_sex) << ','
        << u.age << ',' << u.edu << ',' << format_double(u.y) << '\n';
  }
}

}  // namespace poststrat
