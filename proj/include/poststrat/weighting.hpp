#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "poststrat/domain.hpp"
#include "poststrat/harmonize.hpp"

namespace poststrat {

struct ConvergenceInfo {
  int iterations = 0;
  double max_rel_discrepancy = 0.0;
  /// Max relative margin discrepancy measured after each full cycle.
  std::vector<double> cycle_discrepancies;
  bool converged = true;
};

/// Per-unit weights aligned with the harmonized sample's unit list; dropped
/// units carry weight zero. Weights sum to the control total.
struct WeightVector {
  std::vector<double> weights;
  ConvergenceInfo convergence;
  std::vector<std::string> warnings;

  double total() const;
};

/// One margin constraint: weighted count of `level` of `variable` must hit
/// `target`. Variables are "sex", "gender", "age", "edu" for survey samples.
struct MarginLevel {
  std::string variable;
  int level = 0;
  double target = 0.0;
};
using MarginSpec = std::vector<MarginLevel>;

class RakingError : public std::runtime_error {
 public:
  RakingError(std::string variable, std::string level, double discrepancy,
              const std::string& what);
  std::string variable;
  std::string level;
  double discrepancy = 0.0;
};

/// One-way margins (axis variable, age, edu) of a control table.
MarginSpec margins_from_table(const PoststratTable& table);

/// Full-cell poststratification weights: w_i = N_j / n_j for unit i in cell
/// j. Throws std::invalid_argument when a nonempty sample cell is missing
/// from the table; table cells with no sample units only add a warning.
WeightVector cell_weights(const HarmonizedSample& h, const PoststratTable& table);

/// Iterative proportional fitting from a uniform start, cycling over margin
/// variables until the max relative margin discrepancy drops below tol.
/// Throws RakingError when a positive-target level has no sample units or
/// when max_iter cycles do not converge.
WeightVector rake(const HarmonizedSample& h, const MarginSpec& margins,
                  double tol = 1e-8, int max_iter = 1000);

/// Cap weights at trim_ratio times the mean weight, then rescale to the
/// original total. Off by default everywhere; exposed for sensitivity runs.
WeightVector trim_weights(WeightVector w, double trim_ratio);

/// Raking over generic coded variables (used by the standalone rake command).
struct CodedMarginVariable {
  std::string name;
  std::vector<int> unit_level;          // per retained unit, 0-based
  std::vector<double> targets;          // per level
  std::vector<std::string> level_names;
};

WeightVector rake_coded(const std::vector<CodedMarginVariable>& variables,
                        std::size_t n_units, double tol, int max_iter);

/// Weighted subgroup mean with a with-replacement linearization variance.
/// Subgroup membership: imputed sex (or latent sex when no imputation was
/// done) for sex targets, observed gender for gender targets.
EstimateRecord weighted_estimate(const HarmonizedSample& h,
                                 const WeightVector& w, Target target);

/// Writes unit_id,weight rows for retained units.
void write_weights_csv(std::ostream& out, const WeightVector& w,
                       std::span<const std::string> unit_ids);

}  // namespace poststrat
