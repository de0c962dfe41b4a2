#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "poststrat/domain.hpp"
#include "poststrat/mrp.hpp"
#include "poststrat/popgen.hpp"
#include "poststrat/sampling.hpp"

namespace poststrat {

enum class Estimator : int { WeightedRaking = 0, Mrp = 1 };

std::string to_string(Estimator e);
Estimator parse_estimator(const std::string& name);

enum class WeightingMode : int { Margins = 0, Cells = 1 };

std::string to_string(WeightingMode m);
WeightingMode parse_weighting_mode(const std::string& name);

/// The factorial simulation grid.
struct SimGrid {
  std::vector<ConditionLabel> conditions{
      ConditionLabel::AllSame, ConditionLabel::MaleFemaleSame,
      ConditionLabel::FemaleNbSame, ConditionLabel::AllDifferent};
  std::vector<double> p_nb_male_values{0.0, 0.5, 1.0};
  std::vector<Representation> representations{Representation::Under,
                                              Representation::Over};
  std::vector<HarmonizationMethod> methods;  // defaults to all eight
  std::vector<Estimator> estimators{Estimator::WeightedRaking, Estimator::Mrp};
  int replicates = 500;
  std::uint64_t base_seed = 20240101;

  SimGrid();
  void validate() const;
};

/// Engine parameters shared across grid points.
struct StudySettings {
  long long population_size = 100000;
  std::array<double, 3> gender_probs{0.49, 0.49, 0.02};
  double cross_rate_male_gender = 1.0 / 49.0;
  double cross_rate_female_gender = 1.0 / 49.0;
  DemographicMargins margins{};
  double effect_scale = 10.0;
  double sigma = 4.0;
  std::array<double, 3> age_effects{0.0, 0.0, 0.0};
  std::array<double, 3> edu_effects{0.0, 0.0, 0.0};

  int sample_size = 500;
  double under_multiplier = 0.75;
  double over_multiplier = 2.0;

  WeightingMode weighting_mode = WeightingMode::Margins;
  double rake_tol = 1e-8;
  int rake_max_iter = 1000;
  std::optional<double> trim_ratio;  // weight trimming, off by default

  // Extension: replace the best-case oracle assigner with a saturated
  // logistic fit on the sample's own latent responses. Off in standard runs.
  bool fitted_sex_model = false;

  MrpModelSpec mrp;

  int threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

/// One results-grid row. Flag markers (nonempty flag) have no target and
/// stand for a dropped (method, estimator, replicate) cell.
struct SimRecord {
  int replicate = 0;
  ConditionLabel condition = ConditionLabel::AllSame;
  double p_nb_male = 0.5;
  Representation representation = Representation::Under;
  HarmonizationMethodKind method = HarmonizationMethodKind::FiftyFiftySplit;
  Estimator estimator = Estimator::WeightedRaking;
  std::optional<Target> target;
  bool available = false;
  std::optional<double> estimate;
  std::optional<double> lower;
  std::optional<double> upper;
  std::optional<double> truth;
  std::string flag;
};

struct SimResult {
  SimGrid grid;
  std::vector<SimRecord> records;
};

struct SummaryRecord {
  ConditionLabel condition = ConditionLabel::AllSame;
  double p_nb_male = 0.5;
  Representation representation = Representation::Under;
  HarmonizationMethodKind method = HarmonizationMethodKind::FiftyFiftySplit;
  Estimator estimator = Estimator::WeightedRaking;
  Target target = Target::PopulationMean;
  double mean_bias = 0.0;
  double bias_q025 = 0.0;
  double bias_q975 = 0.0;
  double mean_width = 0.0;
  double width_q025 = 0.0;
  double width_q975 = 0.0;
  int n_effective_replicates = 0;
};

struct SummaryResult {
  std::vector<SummaryRecord> rows;
  /// Combinations where every replicate was flagged (an incomplete grid).
  std::vector<std::string> gaps;
};

/// Runs the full grid: per replicate build the population, draw the sample,
/// apply each method, build the matching control table, and compute each
/// estimator for all six targets. Replicates execute on a bounded worker
/// pool; output order and content are deterministic under base_seed.
SimResult run_grid(const SimGrid& grid, const StudySettings& settings);

/// Mean bias and interval widths with empirical 2.5/97.5 percentiles
/// (linear-interpolation rule) over unflagged, available replicates.
SummaryResult summarize(const SimResult& result);

inline constexpr const char* kSchemaHeader = "# poststrat-harmonize v1";

void write_results_csv(std::ostream& out, const SimResult& result);
void write_summary_csv(std::ostream& out, const SummaryResult& summary);

}  // namespace poststrat
