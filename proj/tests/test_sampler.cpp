#include <cmath>
#include <vector>

#include "doctest.h"
#include "poststrat/rng.hpp"
#include "poststrat/sampling.hpp"

using namespace poststrat;

namespace {

/// Population with an exact non-binary share, for distribution checks.
Population two_class_population(std::size_t n_total, std::size_t n_nb) {
  Population pop;
  pop.units.reserve(n_total);
  for (std::size_t i = 0; i < n_total; ++i) {
    Respondent u;
    u.gender = i < n_nb ? GenderCategory::NonBinary
                        : (i % 2 == 0 ? GenderCategory::Male : GenderCategory::Female);
    u.latent_sex = i % 2 == 0 ? SexCategory::Male : SexCategory::Female;
    u.age = static_cast<int>(i % 3) + 1;
    u.edu = static_cast<int>((i / 3) % 3) + 1;
    u.y = static_cast<double>(i % 7);
    pop.units.push_back(u);
  }
  return pop;
}

/// Independent draw-by-draw oracle for the non-binary count distribution of
/// successive weighted sampling without replacement: only the two weight
/// classes matter, so each draw picks the non-binary class with probability
/// w * nb_left / (w * nb_left + other_left).
double oracle_mean_nb_share(std::size_t n_total, std::size_t n_nb, int n_draws,
                            double multiplier, int reps, std::uint64_t seed) {
  RandomStream rng(seed);
  double total_share = 0.0;
  for (int r = 0; r < reps; ++r) {
    double nb_left = static_cast<double>(n_nb);
    double other_left = static_cast<double>(n_total - n_nb);
    int nb_drawn = 0;
    for (int d = 0; d < n_draws; ++d) {
      double p_nb = multiplier * nb_left / (multiplier * nb_left + other_left);
      if (rng.bernoulli(p_nb)) {
        ++nb_drawn;
        nb_left -= 1.0;
      } else {
        other_left -= 1.0;
      }
    }
    total_share += static_cast<double>(nb_drawn) / static_cast<double>(n_draws);
  }
  return total_share / static_cast<double>(reps);
}

double sampler_mean_nb_share(const Population& pop, int n, double multiplier,
                             int reps, std::uint64_t seed_base) {
  double total = 0.0;
  for (int r = 0; r < reps; ++r) {
    SamplingDesign design;
    design.n = n;
    design.nb_rate_multiplier = multiplier;
    design.seed = SeedKey(seed_base).add(static_cast<std::uint64_t>(r)).value();
    auto sample = draw_sample(pop, design);
    total += static_cast<double>(sample.non_binary_count()) / static_cast<double>(n);
  }
  return total / static_cast<double>(reps);
}

}  // namespace

TEST_CASE("identical design and seed give identical samples") {
  auto pop = two_class_population(2000, 40);
  SamplingDesign design;
  design.n = 150;
  design.nb_rate_multiplier = 0.5;
  design.seed = 4242;
  auto a = draw_sample(pop, design);
  auto b = draw_sample(pop, design);
  REQUIRE(a.source_index.size() == b.source_index.size());
  for (std::size_t i = 0; i < a.source_index.size(); ++i) {
    CHECK(a.source_index[i] == b.source_index[i]);
  }
}

TEST_CASE("exhaustive draw returns the whole population in order") {
  auto pop = two_class_population(500, 10);
  SamplingDesign design;
  design.n = 500;
  design.nb_rate_multiplier = 1.0;
  design.seed = 1;
  auto sample = draw_sample(pop, design);
  REQUIRE(sample.units.size() == 500);
  for (std::size_t i = 0; i < 500; ++i) {
    CHECK(sample.source_index[i] == i);
  }
}

TEST_CASE("design validation") {
  auto pop = two_class_population(100, 2);
  SamplingDesign design;
  design.n = 101;
  CHECK_THROWS_AS(draw_sample(pop, design), std::invalid_argument);
  design.n = 10;
  design.nb_rate_multiplier = 0.0;
  CHECK_THROWS_AS(draw_sample(pop, design), std::invalid_argument);
  design.n = 0;
  design.nb_rate_multiplier = 1.0;
  CHECK_THROWS_AS(draw_sample(pop, design), std::invalid_argument);
}

TEST_CASE("multiplier 1 reduces to simple random sampling") {
  const std::size_t n_pop = 200;
  const int n = 20, draws = 10000;
  auto pop = two_class_population(n_pop, 4);
  std::vector<int> hits(n_pop, 0);
  for (int r = 0; r < draws; ++r) {
    SamplingDesign design;
    design.n = n;
    design.nb_rate_multiplier = 1.0;
    design.seed = SeedKey(777).add(static_cast<std::uint64_t>(r)).value();
    auto sample = draw_sample(pop, design);
    for (std::size_t idx : sample.source_index) ++hits[idx];
  }
  const double expected = static_cast<double>(n) / static_cast<double>(n_pop);
  const double se = std::sqrt(expected * (1.0 - expected) / draws);
  for (std::size_t i = 0; i < n_pop; ++i) {
    double freq = static_cast<double>(hits[i]) / draws;
    CHECK(std::abs(freq - expected) < 3.0 * se);
  }
}

TEST_CASE("under-representation halves the expected non-binary share") {
  auto pop = two_class_population(5000, 100);  // exact 2% non-binary
  const int reps = 10000, n = 100;
  double est = sampler_mean_nb_share(pop, n, 0.5, reps, 11);
  double oracle = oracle_mean_nb_share(5000, 100, n, 0.5, reps, 12);
  // Per-draw share sd ~ sqrt(0.01*0.99/100); means over 10^4 replicates.
  const double se = std::sqrt(0.0101 * (1.0 - 0.0101) / n / reps);
  CHECK(std::abs(est - oracle) < 3.0 * std::sqrt(2.0) * se);
  CHECK(std::abs(est - 0.0101) < 0.0015);
}

TEST_CASE("over-representation doubles the expected non-binary share") {
  auto pop = two_class_population(5000, 100);
  const int reps = 10000, n = 100;
  double est = sampler_mean_nb_share(pop, n, 2.0, reps, 21);
  double oracle = oracle_mean_nb_share(5000, 100, n, 2.0, reps, 22);
  const double se = std::sqrt(0.0392 * (1.0 - 0.0392) / n / reps);
  CHECK(std::abs(est - oracle) < 3.0 * std::sqrt(2.0) * se);
  CHECK(std::abs(est - 2.0 * 0.02 / (2.0 * 0.02 + 0.98)) < 0.0015);
}

TEST_CASE("zero non-binary samples are detectable for downstream flagging") {
  auto pop = two_class_population(2000, 40);
  SamplingDesign design;
  design.n = 50;
  design.nb_rate_multiplier = 1e-9;
  design.seed = 3;
  auto sample = draw_sample(pop, design);
  CHECK(sample.non_binary_count() == 0);
}
