#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "poststrat/domain.hpp"
#include "poststrat/harmonize.hpp"

namespace poststrat {

struct McmcOptions {
  int chains = 4;
  int warmup = 500;
  int kept = 500;
  std::uint64_t seed = 0;
};

/// Hierarchical normal regression spec: y ~ normal(alpha + sum of per-factor
/// level effects, sigma_y), effects ~ normal(0, tau_f), half-normal priors on
/// the scales and a wide normal prior on alpha. Prior scale defaults to
/// prior_scale_multiplier * sd(y).
struct MrpModelSpec {
  double prior_scale_multiplier = 5.0;
  std::optional<double> fixed_residual_sd;  // when set, sigma_y is not sampled
  double rhat_limit = 1.05;
  McmcOptions mcmc;

  void validate() const;
};

struct FactorSpec {
  std::string name;
  int levels = 2;  // full level domain, observed or not
};

/// Posterior draws from the hierarchical model. Draws are stored per chain
/// contiguously: draw index d = chain * kept + k.
struct MrpFit {
  std::vector<FactorSpec> factors;
  std::vector<char> factor_active;  // inactive factors have effects pinned at 0
  int chains = 0;
  int kept = 0;

  std::vector<double> intercept_draws;                // [draws]
  std::vector<std::vector<double>> effect_draws;      // [factor][level * draws + d]
  std::vector<std::vector<double>> scale_draws;       // [factor][draws]
  std::vector<double> residual_sd_draws;              // [draws]

  double rhat_intercept = 1.0;
  std::vector<double> rhat_scales;  // per factor (1.0 for inactive)
  bool healthy = true;
  std::vector<std::string> warnings;

  /// Factor level codes of the data the model was fit on: [factor][obs].
  std::vector<std::vector<int>> data_levels;

  int draws() const { return chains * kept; }
  double effect(int factor, int level, int draw) const;
  /// Linear predictor for a cell: intercept + per-factor level effects.
  double cell_mean(int draw, std::span<const int> levels) const;
};

/// Gibbs-within-slice sampler: the intercept and all level effects are drawn
/// jointly from their exact Gaussian conditional given the scales; each scale
/// gets a slice-sampling update. Reproducible given mcmc.seed. Factors with
/// fewer than two observed levels are deactivated with a warning.
MrpFit fit_mrp(std::span<const double> y,
               const std::vector<FactorSpec>& factors,
               const std::vector<std::vector<int>>& levels,
               const MrpModelSpec& spec);

/// Convenience wrapper: factors are (axis variable, age, edu) where the axis
/// variable is imputed sex for sex-axis analyses and observed gender for
/// gender-axis analyses.
MrpFit fit_mrp_sample(const HarmonizedSample& h, TableAxis axis,
                      const MrpModelSpec& spec);

/// Cell-count-weighted aggregate of posterior cell predictions over the
/// target's cells; point = posterior mean, interval = 2.5/97.5 posterior
/// quantiles. Cells aggregate in canonical key order, so the estimate is
/// invariant to cell ordering. Targets absent from the table come back
/// unavailable.
EstimateRecord poststratify(const MrpFit& fit, const PoststratTable& table,
                            Target target);

/// Aggregate of posterior cell predictions over a subset of the fitted
/// observations (used for targets off the table's axis, e.g. gender means
/// under a sex-axis fit).
EstimateRecord aggregate_over_observations(const MrpFit& fit,
                                           std::span<const char> mask,
                                           Target target);

/// Aggregate using the table's source-sex masses (sex means under a
/// gender-axis fit on a split table).
EstimateRecord aggregate_source_sex(const MrpFit& fit,
                                    const PoststratTable& table,
                                    SexCategory sex, Target target);

/// Long-format dump: draw,parameter,value.
void write_draws_csv(std::ostream& out, const MrpFit& fit);

/// Split-half potential scale reduction over per-chain sequences.
double split_rhat(std::span<const double> draws, int chains);

}  // namespace poststrat
