#include "poststrat/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>

#include "poststrat/stats.hpp"

namespace poststrat {

double WeightVector::total() const {
  return std::accumulate(weights.begin(), weights.end(), 0.0);
}

RakingError::RakingError(std::string variable_in, std::string level_in,
                         double discrepancy_in, const std::string& what)
    : std::runtime_error(what),
      variable(std::move(variable_in)),
      level(std::move(level_in)),
      discrepancy(discrepancy_in) {}

MarginSpec margins_from_table(const PoststratTable& table) {
  table.validate();
  MarginSpec margins;
  const std::string axis_name = to_string(table.axis);
  for (int v = 0; v < table.axis_levels(); ++v) {
    double m = table.axis_margin(v);
    if (m > 0.0) margins.push_back(MarginLevel{axis_name, v, m});
  }
  std::array<double, 3> age{}, edu{};
  for (const auto& cell : table.cells) {
    age[static_cast<std::size_t>(cell.age - 1)] += cell.count;
    edu[static_cast<std::size_t>(cell.edu - 1)] += cell.count;
  }
  for (int a = 0; a < kAgeLevels; ++a) {
    if (age[static_cast<std::size_t>(a)] > 0.0) {
      margins.push_back(MarginLevel{"age", a + 1, age[static_cast<std::size_t>(a)]});
    }
  }
  for (int e = 0; e < kEduLevels; ++e) {
    if (edu[static_cast<std::size_t>(e)] > 0.0) {
      margins.push_back(MarginLevel{"edu", e + 1, edu[static_cast<std::size_t>(e)]});
    }
  }
  return margins;
}

namespace {

int unit_variable_level(const HarmonizedSample& h, std::size_t i,
                        const std::string& variable) {
  if (variable == "sex") return unit_axis_level(h, i, TableAxis::Sex);
  if (variable == "gender") return unit_axis_level(h, i, TableAxis::Gender);
  if (variable == "age") return h.units[i].age;
  if (variable == "edu") return h.units[i].edu;
  throw std::invalid_argument("unknown margin variable: " + variable);
}

}  // namespace

WeightVector cell_weights(const HarmonizedSample& h, const PoststratTable& table) {
  table.validate();
  const std::size_t n = h.units.size();

  std::map<std::array<int, 3>, double> sample_counts;
  for (std::size_t i = 0; i < n; ++i) {
    if (!h.retained[i]) continue;
    std::array<int, 3> key{unit_axis_level(h, i, table.axis), h.units[i].age,
                           h.units[i].edu};
    sample_counts[key] += 1.0;
  }

  std::map<std::array<int, 3>, double> cell_weight;
  for (const auto& cell : table.cells) {
    std::array<int, 3> key{cell.axis_value, cell.age, cell.edu};
    auto it = sample_counts.find(key);
    if (it == sample_counts.end()) continue;
    cell_weight[key] = cell.count / it->second;
  }

  WeightVector w;
  w.weights.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!h.retained[i]) continue;
    std::array<int, 3> key{unit_axis_level(h, i, table.axis), h.units[i].age,
                           h.units[i].edu};
    auto it = cell_weight.find(key);
    if (it == cell_weight.end()) {
      throw std::invalid_argument(
          "sample cell (" + std::to_string(key[0]) + "," + std::to_string(key[1]) +
          "," + std::to_string(key[2]) + ") is absent from the control table");
    }
    w.weights[i] = it->second;
  }

  for (const auto& cell : table.cells) {
    std::array<int, 3> key{cell.axis_value, cell.age, cell.edu};
    if (sample_counts.find(key) == sample_counts.end()) {
      w.warnings.push_back("control cell (" + std::to_string(key[0]) + "," +
                           std::to_string(key[1]) + "," + std::to_string(key[2]) +
                           ") has no sample units and contributes nothing");
    }
  }
  w.convergence.iterations = 1;
  w.convergence.converged = true;
  return w;
}

WeightVector rake_coded(const std::vector<CodedMarginVariable>& variables,
                        std::size_t n_units, double tol, int max_iter) {
  if (variables.empty()) throw std::invalid_argument("no margin variables");
  if (n_units == 0) throw std::invalid_argument("no units to rake");
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");

  double grand = 0.0;
  for (double t : variables[0].targets) grand += t;
  if (!(grand > 0.0)) throw std::invalid_argument("margin targets sum to zero");
  for (const auto& var : variables) {
    if (var.unit_level.size() != n_units) {
      throw std::invalid_argument("margin variable " + var.name +
                                  " does not cover every unit");
    }
    double sum = 0.0;
    for (double t : var.targets) {
      if (t < 0.0) throw std::invalid_argument("negative margin target");
      sum += t;
    }
    if (std::abs(sum - grand) > 1e-6 * grand) {
      throw std::invalid_argument("margin targets of " + var.name +
                                  " disagree on the grand total");
    }
    for (int lv : var.unit_level) {
      if (lv < 0 || static_cast<std::size_t>(lv) >= var.targets.size()) {
        throw std::invalid_argument("unit level outside margin domain for " +
                                    var.name);
      }
    }
  }

  // Positive-target levels must be represented; otherwise no amount of
  // scaling can reach the margin.
  for (const auto& var : variables) {
    std::vector<char> seen(var.targets.size(), 0);
    for (int lv : var.unit_level) seen[static_cast<std::size_t>(lv)] = 1;
    for (std::size_t lv = 0; lv < var.targets.size(); ++lv) {
      if (var.targets[lv] > 0.0 && !seen[lv]) {
        const std::string level_name = lv < var.level_names.size()
                                           ? var.level_names[lv]
                                           : std::to_string(lv);
        throw RakingError(var.name, level_name, var.targets[lv],
                          "margin level " + var.name + "=" + level_name +
                              " has a positive target but no sample units");
      }
    }
  }

  WeightVector w;
  w.weights.assign(n_units, 1.0);

  auto max_discrepancy = [&]() {
    double worst = 0.0;
    for (const auto& var : variables) {
      std::vector<double> cur(var.targets.size(), 0.0);
      for (std::size_t i = 0; i < n_units; ++i) {
        cur[static_cast<std::size_t>(var.unit_level[i])] += w.weights[i];
      }
      for (std::size_t lv = 0; lv < var.targets.size(); ++lv) {
        double rel = var.targets[lv] > 0.0
                         ? std::abs(cur[lv] - var.targets[lv]) / var.targets[lv]
                         : cur[lv] / grand;
        worst = std::max(worst, rel);
      }
    }
    return worst;
  };

  for (int cycle = 1; cycle <= max_iter; ++cycle) {
    for (const auto& var : variables) {
      std::vector<double> cur(var.targets.size(), 0.0);
      for (std::size_t i = 0; i < n_units; ++i) {
        cur[static_cast<std::size_t>(var.unit_level[i])] += w.weights[i];
      }
      std::vector<double> factor(var.targets.size(), 1.0);
      for (std::size_t lv = 0; lv < var.targets.size(); ++lv) {
        if (cur[lv] > 0.0) factor[lv] = var.targets[lv] / cur[lv];
      }
      for (std::size_t i = 0; i < n_units; ++i) {
        w.weights[i] *= factor[static_cast<std::size_t>(var.unit_level[i])];
      }
    }
    double disc = max_discrepancy();
    w.convergence.cycle_discrepancies.push_back(disc);
    w.convergence.iterations = cycle;
    w.convergence.max_rel_discrepancy = disc;
    if (disc < tol) {
      w.convergence.converged = true;
      return w;
    }
  }
  w.convergence.converged = false;
  throw RakingError("", "", w.convergence.max_rel_discrepancy,
                    "raking did not converge within " + std::to_string(max_iter) +
                        " cycles (max relative discrepancy " +
                        format_double(w.convergence.max_rel_discrepancy) + ")");
}

WeightVector rake(const HarmonizedSample& h, const MarginSpec& margins,
                  double tol, int max_iter) {
  if (margins.empty()) throw std::invalid_argument("empty margin spec");

  // Group margin levels by variable, preserving first-appearance order.
  std::vector<std::string> var_order;
  for (const auto& m : margins) {
    if (std::find(var_order.begin(), var_order.end(), m.variable) == var_order.end()) {
      var_order.push_back(m.variable);
    }
  }

  std::vector<std::size_t> retained_index;
  for (std::size_t i = 0; i < h.units.size(); ++i) {
    if (h.retained[i]) retained_index.push_back(i);
  }
  if (retained_index.empty()) throw std::invalid_argument("no retained units");

  std::vector<CodedMarginVariable> coded;
  for (const auto& name : var_order) {
    CodedMarginVariable var;
    var.name = name;
    std::vector<int> level_values;
    for (const auto& m : margins) {
      if (m.variable != name) continue;
      level_values.push_back(m.level);
      var.targets.push_back(m.target);
      var.level_names.push_back(std::to_string(m.level));
    }
    for (std::size_t i : retained_index) {
      int raw = unit_variable_level(h, i, name);
      auto it = std::find(level_values.begin(), level_values.end(), raw);
      if (it == level_values.end()) {
        throw std::invalid_argument("unit has level " + std::to_string(raw) +
                                    " of " + name + " outside the margin spec");
      }
      var.unit_level.push_back(static_cast<int>(it - level_values.begin()));
    }
    coded.push_back(std::move(var));
  }

  WeightVector packed = rake_coded(coded, retained_index.size(), tol, max_iter);
  WeightVector w;
  w.convergence = packed.convergence;
  w.warnings = packed.warnings;
  w.weights.assign(h.units.size(), 0.0);
  for (std::size_t k = 0; k < retained_index.size(); ++k) {
    w.weights[retained_index[k]] = packed.weights[k];
  }
  return w;
}

WeightVector trim_weights(WeightVector w, double trim_ratio) {
  if (!(trim_ratio > 0.0)) throw std::invalid_argument("trim ratio must be positive");
  double total = w.total();
  std::size_t carriers = 0;
  for (double x : w.weights) carriers += x > 0.0;
  if (carriers == 0) return w;
  double cap = trim_ratio * total / static_cast<double>(carriers);
  double trimmed_total = 0.0;
  for (double& x : w.weights) {
    x = std::min(x, cap);
    trimmed_total += x;
  }
  if (trimmed_total > 0.0) {
    double rescale = total / trimmed_total;
    for (double& x : w.weights) x *= rescale;
  }
  return w;
}

namespace {

bool in_subgroup(const HarmonizedSample& h, std::size_t i, Target target) {
  switch (target) {
    case Target::PopulationMean:
      return true;
    case Target::SexMeanMale:
      return unit_axis_level(h, i, TableAxis::Sex) == static_cast<int>(SexCategory::Male);
    case Target::SexMeanFemale:
      return unit_axis_level(h, i, TableAxis::Sex) == static_cast<int>(SexCategory::Female);
    case Target::GenderMeanMale:
      return h.units[i].gender == GenderCategory::Male;
    case Target::GenderMeanFemale:
      return h.units[i].gender == GenderCategory::Female;
    case Target::GenderMeanNonBinary:
      return h.units[i].gender == GenderCategory::NonBinary;
  }
  throw std::invalid_argument("bad Target");
}

}  // namespace

EstimateRecord weighted_estimate(const HarmonizedSample& h, const WeightVector& w,
                                 Target target) {
  if (w.weights.size() != h.units.size()) {
    throw std::invalid_argument("weight vector does not cover the sample");
  }
  EstimateRecord rec;
  rec.target = target;

  double w_sum = 0.0, wy_sum = 0.0;
  std::size_t n_retained = 0, n_sub = 0;
  for (std::size_t i = 0; i < h.units.size(); ++i) {
    if (!h.retained[i]) continue;
    ++n_retained;
    if (!in_subgroup(h, i, target)) continue;
    ++n_sub;
    w_sum += w.weights[i];
    wy_sum += w.weights[i] * h.units[i].y;
  }
  if (n_sub == 0 || w_sum <= 0.0) {
    rec.available = false;
    return rec;
  }

  const double point = wy_sum / w_sum;

  // With-replacement linearization for the domain ratio mean: the score is
  // zero outside the domain and the full retained sample size enters the
  // variance.
  double se = 0.0;
  if (n_retained >= 2) {
    const double n = static_cast<double>(n_retained);
    double d_sum = 0.0;
    for (std::size_t i = 0; i < h.units.size(); ++i) {
      if (!h.retained[i] || !in_subgroup(h, i, target)) continue;
      d_sum += w.weights[i] * (h.units[i].y - point) / w_sum;
    }
    const double d_bar = d_sum / n;
    double ss = 0.0;
    std::size_t counted = 0;
    for (std::size_t i = 0; i < h.units.size(); ++i) {
      if (!h.retained[i]) continue;
      ++counted;
      double d = in_subgroup(h, i, target)
                     ? w.weights[i] * (h.units[i].y - point) / w_sum
                     : 0.0;
      ss += (d - d_bar) * (d - d_bar);
    }
    (void)counted;
    se = std::sqrt(n / (n - 1.0) * ss);
  }

  rec.available = true;
  rec.estimate = point;
  rec.lower = point - 1.96 * se;
  rec.upper = point + 1.96 * se;
  return rec;
}

void write_weights_csv(std::ostream& out, const WeightVector& w,
                       std::span<const std::string> unit_ids) {
  out << "unit_id,weight\n";
  for (std::size_t i = 0; i < w.weights.size(); ++i) {
    const std::string id =
        i < unit_ids.size() ? unit_ids[i] : std::to_string(i);
    out << id << ',' << format_double(w.weights[i]) << '\n';
  }
}

}  // namespace poststrat
