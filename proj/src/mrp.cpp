#include "poststrat/mrp.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <ostream>

#include "poststrat/rng.hpp"
#include "poststrat/stats.hpp"

namespace poststrat {

void MrpModelSpec::validate() const {
  if (!(prior_scale_multiplier > 0.0)) {
    throw std::invalid_argument("prior_scale_multiplier must be positive");
  }
  if (fixed_residual_sd && !(*fixed_residual_sd > 0.0)) {
    throw std::invalid_argument("fixed residual sd must be positive");
  }
  if (!(rhat_limit > 1.0)) throw std::invalid_argument("rhat_limit must exceed 1");
  if (mcmc.chains < 1) throw std::invalid_argument("need at least one chain");
  if (mcmc.warmup < 0) throw std::invalid_argument("negative warmup");
  if (mcmc.kept < 200) throw std::invalid_argument("kept draws must be >= 200");
}

double MrpFit::effect(int factor, int level, int draw) const {
  if (!factor_active[static_cast<std::size_t>(factor)]) return 0.0;
  const auto& d = effect_draws[static_cast<std::size_t>(factor)];
  return d[static_cast<std::size_t>(level) * static_cast<std::size_t>(draws()) +
           static_cast<std::size_t>(draw)];
}

double MrpFit::cell_mean(int draw, std::span<const int> levels) const {
  double mu = intercept_draws[static_cast<std::size_t>(draw)];
  for (std::size_t f = 0; f < factors.size(); ++f) {
    mu += effect(static_cast<int>(f), levels[f], draw);
  }
  return mu;
}

namespace {

// Dense lower-triangular Cholesky; dim stays <= 1 + sum of factor levels.
class SmallCholesky {
 public:
  explicit SmallCholesky(int dim) : dim_(dim), l_(static_cast<std::size_t>(dim * dim)) {}

  void factor(const std::vector<double>& a) {
    for (int i = 0; i < dim_; ++i) {
      for (int j = 0; j <= i; ++j) {
        double sum = a[idx(i, j)];
        for (int k = 0; k < j; ++k) sum -= l_[idx(i, k)] * l_[idx(j, k)];
        if (i == j) {
          if (!(sum > 0.0)) throw std::runtime_error("precision not positive definite");
          l_[idx(i, i)] = std::sqrt(sum);
        } else {
          l_[idx(i, j)] = sum / l_[idx(j, j)];
        }
      }
    }
  }

  // Solves L z = b.
  void forward(std::vector<double>& b) const {
    for (int i = 0; i < dim_; ++i) {
      double sum = b[static_cast<std::size_t>(i)];
      for (int k = 0; k < i; ++k) sum -= l_[idx(i, k)] * b[static_cast<std::size_t>(k)];
      b[static_cast<std::size_t>(i)] = sum / l_[idx(i, i)];
    }
  }

  // Solves L^T x = b.
  void backward(std::vector<double>& b) const {
    for (int i = dim_ - 1; i >= 0; --i) {
      double sum = b[static_cast<std::size_t>(i)];
      for (int k = i + 1; k < dim_; ++k) {
        sum -= l_[idx(k, i)] * b[static_cast<std::size_t>(k)];
      }
      b[static_cast<std::size_t>(i)] = sum / l_[idx(i, i)];
    }
  }

 private:
  std::size_t idx(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(dim_) +
           static_cast<std::size_t>(c);
  }
  int dim_;
  std::vector<double> l_;
};

/// Univariate slice sampler with stepping out and shrinkage on a bounded
/// interval (Neal 2003).
double slice_sample(double x0, const std::function<double(double)>& logp,
                    RandomStream& rng, double width, double lo, double hi) {
  const double f0 = logp(x0);
  const double level = f0 + std::log(std::max(rng.uniform(), 1e-300));
  double left = x0 - rng.uniform() * width;
  double right = left + width;
  for (int s = 0; s < 64 && left > lo && logp(left) > level; ++s) left -= width;
  for (int s = 0; s < 64 && right < hi && logp(right) > level; ++s) right += width;
  left = std::max(left, lo);
  right = std::min(right, hi);
  for (int s = 0; s < 100; ++s) {
    double x1 = left + rng.uniform() * (right - left);
    if (logp(x1) > level) return x1;
    if (x1 < x0) {
      left = x1;
    } else {
      right = x1;
    }
  }
  return x0;
}

struct CellStat {
  double n = 0.0;
  double sum_y = 0.0;
  double sum_y2 = 0.0;
};

}  // namespace

MrpFit fit_mrp(std::span<const double> y, const std::vector<FactorSpec>& factors,
               const std::vector<std::vector<int>>& levels,
               const MrpModelSpec& spec) {
  spec.validate();
  const std::size_t n = y.size();
  if (n == 0) throw std::invalid_argument("empty sample");
  for (double v : y) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite outcome value");
  }
  if (levels.size() != factors.size()) {
    throw std::invalid_argument("levels/factors size mismatch");
  }
  for (std::size_t f = 0; f < factors.size(); ++f) {
    if (levels[f].size() != n) {
      throw std::invalid_argument("factor " + factors[f].name +
                                  " does not cover every observation");
    }
    for (int lv : levels[f]) {
      if (lv < 0 || lv >= factors[f].levels) {
        throw std::invalid_argument("level outside domain for " + factors[f].name);
      }
    }
  }

  MrpFit fit;
  fit.factors = factors;
  fit.chains = spec.mcmc.chains;
  fit.kept = spec.mcmc.kept;
  fit.data_levels = levels;
  fit.factor_active.assign(factors.size(), 1);

  for (std::size_t f = 0; f < factors.size(); ++f) {
    std::vector<char> seen(static_cast<std::size_t>(factors[f].levels), 0);
    for (int lv : levels[f]) seen[static_cast<std::size_t>(lv)] = 1;
    int observed = 0;
    for (char s : seen) observed += s;
    if (observed < 2) {
      fit.factor_active[f] = 0;
      fit.warnings.push_back("factor " + factors[f].name +
                             " has a single observed level; effect fixed at 0");
    }
  }

  // Coefficient layout: 0 = intercept, then the full level domain of each
  // active factor.
  std::vector<int> offset(factors.size(), -1);
  int dim = 1;
  for (std::size_t f = 0; f < factors.size(); ++f) {
    if (!fit.factor_active[f]) continue;
    offset[f] = dim;
    dim += factors[f].levels;
  }

  // Cross-product matrix C = X'X and T = X'y for the indicator design.
  std::vector<double> cross(static_cast<std::size_t>(dim * dim), 0.0);
  std::vector<double> xty(static_cast<std::size_t>(dim), 0.0);
  std::vector<int> cols;
  // Cell sufficient statistics for the residual-scale update.
  std::map<std::vector<int>, CellStat> cell_stats;
  std::vector<int> cell_key(factors.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    cols.clear();
    cols.push_back(0);
    for (std::size_t f = 0; f < factors.size(); ++f) {
      if (!fit.factor_active[f]) continue;
      cols.push_back(offset[f] + levels[f][i]);
    }
    for (int r : cols) {
      xty[static_cast<std::size_t>(r)] += y[i];
      for (int c : cols) {
        cross[static_cast<std::size_t>(r) * static_cast<std::size_t>(dim) +
              static_cast<std::size_t>(c)] += 1.0;
      }
    }
    for (std::size_t f = 0; f < factors.size(); ++f) cell_key[f] = levels[f][i];
    auto& stat = cell_stats[cell_key];
    stat.n += 1.0;
    stat.sum_y += y[i];
    stat.sum_y2 += y[i] * y[i];
  }

  const double y_mean = mean(y);
  double y_sd = sample_sd(y);
  if (y_sd <= 0.0) y_sd = 1e-3 * (1.0 + std::abs(y_mean));
  const double s_alpha = 10.0 * y_sd;
  const double s_scale = spec.prior_scale_multiplier * y_sd;
  // The dummy design is rank-deficient on its own; the scale floors keep the
  // prior diagonal above the likelihood's floating-point noise so the joint
  // precision stays positive definite.
  const double sigma_lo = std::max(1e-300, 1e-4 * y_sd);
  const double sigma_hi = 1e6 * y_sd;
  const double tau_lo = std::max(1e-300, 1e-6 * y_sd);
  const double tau_hi = 1e4 * y_sd;

  const int total_draws = fit.chains * fit.kept;
  fit.intercept_draws.assign(static_cast<std::size_t>(total_draws), 0.0);
  fit.residual_sd_draws.assign(static_cast<std::size_t>(total_draws), 0.0);
  fit.effect_draws.resize(factors.size());
  fit.scale_draws.resize(factors.size());
  for (std::size_t f = 0; f < factors.size(); ++f) {
    if (!fit.factor_active[f]) continue;
    fit.effect_draws[f].assign(
        static_cast<std::size_t>(factors[f].levels) * static_cast<std::size_t>(total_draws),
        0.0);
    fit.scale_draws[f].assign(static_cast<std::size_t>(total_draws), 0.0);
  }

  SmallCholesky chol(dim);
  std::vector<double> precision(static_cast<std::size_t>(dim * dim));
  std::vector<double> theta(static_cast<std::size_t>(dim));
  std::vector<double> mean_vec(static_cast<std::size_t>(dim));
  std::vector<double> z(static_cast<std::size_t>(dim));

  for (int chain = 0; chain < fit.chains; ++chain) {
    RandomStream rng(SeedKey(spec.mcmc.seed)
                         .add("mrp-chain")
                         .add(static_cast<std::uint64_t>(chain))
                         .value());
    double sigma = spec.fixed_residual_sd.value_or(std::max(y_sd, sigma_lo));
    std::vector<double> tau(factors.size(), std::max(0.5 * y_sd, tau_lo));
    std::fill(theta.begin(), theta.end(), 0.0);
    theta[0] = y_mean;

    const int total_iter = spec.mcmc.warmup + spec.mcmc.kept;
    for (int iter = 0; iter < total_iter; ++iter) {
      // Joint Gaussian update of (intercept, all effects) given the scales.
      const double inv_s2 = 1.0 / (sigma * sigma);
      for (int r = 0; r < dim; ++r) {
        for (int c = 0; c < dim; ++c) {
          precision[static_cast<std::size_t>(r) * static_cast<std::size_t>(dim) +
                    static_cast<std::size_t>(c)] =
              cross[static_cast<std::size_t>(r) * static_cast<std::size_t>(dim) +
                    static_cast<std::size_t>(c)] *
              inv_s2;
        }
      }
      precision[0] += 1.0 / (s_alpha * s_alpha);
      for (std::size_t f = 0; f < factors.size(); ++f) {
        if (!fit.factor_active[f]) continue;
        for (int lv = 0; lv < factors[f].levels; ++lv) {
          int k = offset[f] + lv;
          precision[static_cast<std::size_t>(k) * static_cast<std::size_t>(dim) +
                    static_cast<std::size_t>(k)] += 1.0 / (tau[f] * tau[f]);
        }
      }
      chol.factor(precision);
      for (int r = 0; r < dim; ++r) {
        mean_vec[static_cast<std::size_t>(r)] = xty[static_cast<std::size_t>(r)] * inv_s2;
      }
      chol.forward(mean_vec);
      chol.backward(mean_vec);
      for (int r = 0; r < dim; ++r) z[static_cast<std::size_t>(r)] = rng.normal();
      chol.backward(z);
      for (int r = 0; r < dim; ++r) {
        theta[static_cast<std::size_t>(r)] =
            mean_vec[static_cast<std::size_t>(r)] + z[static_cast<std::size_t>(r)];
      }

      // Slice updates for the effect scales.
      for (std::size_t f = 0; f < factors.size(); ++f) {
        if (!fit.factor_active[f]) continue;
        double ss = 0.0;
        for (int lv = 0; lv < factors[f].levels; ++lv) {
          double a = theta[static_cast<std::size_t>(offset[f] + lv)];
          ss += a * a;
        }
        const double lcount = static_cast<double>(factors[f].levels);
        auto logp = [&](double x) {
          double t2 = std::exp(2.0 * x);
          return -lcount * x - 0.5 * ss / t2 - 0.5 * t2 / (s_scale * s_scale) + x;
        };
        double x = slice_sample(std::log(tau[f]), logp, rng, 1.0, std::log(tau_lo),
                                std::log(tau_hi));
        tau[f] = std::exp(x);
      }

      // Slice update for the residual scale from the cell statistics.
      if (!spec.fixed_residual_sd) {
        double ssr = 0.0;
        for (const auto& [key, stat] : cell_stats) {
          double mu = theta[0];
          for (std::size_t f = 0; f < factors.size(); ++f) {
            if (!fit.factor_active[f]) continue;
            mu += theta[static_cast<std::size_t>(offset[f] + key[f])];
          }
          ssr += stat.sum_y2 - 2.0 * mu * stat.sum_y + stat.n * mu * mu;
        }
        ssr = std::max(ssr, 0.0);
        const double nd = static_cast<double>(n);
        auto logp = [&](double x) {
          double s2 = std::exp(2.0 * x);
          return -nd * x - 0.5 * ssr / s2 - 0.5 * s2 / (s_scale * s_scale) + x;
        };
        double x = slice_sample(std::log(sigma), logp, rng, 1.0, std::log(sigma_lo),
                                std::log(sigma_hi));
        sigma = std::exp(x);
      }

      if (iter >= spec.mcmc.warmup) {
        const int d = chain * fit.kept + (iter - spec.mcmc.warmup);
        fit.intercept_draws[static_cast<std::size_t>(d)] = theta[0];
        fit.residual_sd_draws[static_cast<std::size_t>(d)] = sigma;
        for (std::size_t f = 0; f < factors.size(); ++f) {
          if (!fit.factor_active[f]) continue;
          fit.scale_draws[f][static_cast<std::size_t>(d)] = tau[f];
          for (int lv = 0; lv < factors[f].levels; ++lv) {
            fit.effect_draws[f][static_cast<std::size_t>(lv) *
                                    static_cast<std::size_t>(total_draws) +
                                static_cast<std::size_t>(d)] =
                theta[static_cast<std::size_t>(offset[f] + lv)];
          }
        }
      }
    }
  }

  fit.rhat_intercept = split_rhat(fit.intercept_draws, fit.chains);
  fit.rhat_scales.assign(factors.size(), 1.0);
  fit.healthy = fit.rhat_intercept < spec.rhat_limit;
  for (std::size_t f = 0; f < factors.size(); ++f) {
    if (!fit.factor_active[f]) continue;
    fit.rhat_scales[f] = split_rhat(fit.scale_draws[f], fit.chains);
    fit.healthy = fit.healthy && fit.rhat_scales[f] < spec.rhat_limit;
  }
  return fit;
}

MrpFit fit_mrp_sample(const HarmonizedSample& h, TableAxis axis,
                      const MrpModelSpec& spec) {
  std::vector<double> y;
  std::vector<std::vector<int>> levels(3);
  for (std::size_t i = 0; i < h.units.size(); ++i) {
    if (!h.retained[i]) continue;
    y.push_back(h.units[i].y);
    levels[0].push_back(unit_axis_level(h, i, axis));
    levels[1].push_back(h.units[i].age - 1);
    levels[2].push_back(h.units[i].edu - 1);
  }
  std::vector<FactorSpec> factors{
      FactorSpec{to_string(axis), axis == TableAxis::Sex ? 2 : 3},
      FactorSpec{"age", kAgeLevels}, FactorSpec{"edu", kEduLevels}};
  return fit_mrp(y, factors, levels, spec);
}

namespace {

EstimateRecord summarize_draw_estimates(std::vector<double> estimates, Target target) {
  EstimateRecord rec;
  rec.target = target;
  rec.available = true;
  rec.estimate = mean(estimates);
  rec.lower = quantile_type7(estimates, 0.025);
  rec.upper = quantile_type7(std::move(estimates), 0.975);
  return rec;
}

/// Axis-value filter for on-axis targets; nullopt when the target is off the
/// table's axis.
std::optional<int> axis_filter(TableAxis axis, Target target) {
  if (target == Target::PopulationMean) return -1;  // all cells
  if (axis == TableAxis::Sex) {
    if (target == Target::SexMeanMale) return static_cast<int>(SexCategory::Male);
    if (target == Target::SexMeanFemale) return static_cast<int>(SexCategory::Female);
    return std::nullopt;
  }
  if (target == Target::GenderMeanMale) return static_cast<int>(GenderCategory::Male);
  if (target == Target::GenderMeanFemale) return static_cast<int>(GenderCategory::Female);
  if (target == Target::GenderMeanNonBinary) {
    return static_cast<int>(GenderCategory::NonBinary);
  }
  return std::nullopt;
}

}  // namespace

EstimateRecord poststratify(const MrpFit& fit, const PoststratTable& table,
                            Target target) {
  table.validate();
  if (fit.factors.empty() || fit.factors[0].name != to_string(table.axis)) {
    throw std::invalid_argument(
        "table axis does not match the fit's first grouping factor");
  }

  EstimateRecord rec;
  rec.target = target;
  auto filter = axis_filter(table.axis, target);
  if (!filter) {
    rec.available = false;
    return rec;
  }

  std::vector<std::array<int, 3>> cell_levels;
  std::vector<double> cell_counts;
  double total = 0.0;
  for (const auto& cell : table.cells) {
    if (*filter >= 0 && cell.axis_value != *filter) continue;
    cell_levels.push_back({cell.axis_value, cell.age - 1, cell.edu - 1});
    cell_counts.push_back(cell.count);
    total += cell.count;
  }
  if (cell_levels.empty() || total <= 0.0) {
    rec.available = false;
    return rec;
  }

  std::vector<double> estimates(static_cast<std::size_t>(fit.draws()));
  for (int d = 0; d < fit.draws(); ++d) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cell_levels.size(); ++j) {
      acc += cell_counts[j] * fit.cell_mean(d, cell_levels[j]);
    }
    estimates[static_cast<std::size_t>(d)] = acc / total;
  }
  return summarize_draw_estimates(std::move(estimates), target);
}

EstimateRecord aggregate_over_observations(const MrpFit& fit,
                                           std::span<const char> mask,
                                           Target target) {
  EstimateRecord rec;
  rec.target = target;
  const std::size_t n = fit.data_levels.empty() ? 0 : fit.data_levels[0].size();
  if (mask.size() != n) throw std::invalid_argument("mask size mismatch");
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n; ++i) {
    if (mask[i]) idx.push_back(i);
  }
  if (idx.empty()) {
    rec.available = false;
    return rec;
  }
  std::vector<int> lv(fit.factors.size());
  std::vector<double> estimates(static_cast<std::size_t>(fit.draws()));
  for (int d = 0; d < fit.draws(); ++d) {
    double acc = 0.0;
    for (std::size_t i : idx) {
      for (std::size_t f = 0; f < fit.factors.size(); ++f) {
        lv[f] = fit.data_levels[f][i];
      }
      acc += fit.cell_mean(d, lv);
    }
    estimates[static_cast<std::size_t>(d)] = acc / static_cast<double>(idx.size());
  }
  return summarize_draw_estimates(std::move(estimates), target);
}

EstimateRecord aggregate_source_sex(const MrpFit& fit, const PoststratTable& table,
                                    SexCategory sex, Target target) {
  table.validate();
  EstimateRecord rec;
  rec.target = target;
  if (table.source_sex_mass.empty()) {
    rec.available = false;
    return rec;
  }
  std::vector<std::array<int, 3>> cell_levels;
  std::vector<double> masses;
  double total = 0.0;
  for (std::size_t j = 0; j < table.cells.size(); ++j) {
    double m = table.source_sex_mass[j][static_cast<std::size_t>(sex)];
    if (m <= 0.0) continue;
    const auto& cell = table.cells[j];
    cell_levels.push_back({cell.axis_value, cell.age - 1, cell.edu - 1});
    masses.push_back(m);
    total += m;
  }
  if (cell_levels.empty() || total <= 0.0) {
    rec.available = false;
    return rec;
  }
  std::vector<double> estimates(static_cast<std::size_t>(fit.draws()));
  for (int d = 0; d < fit.draws(); ++d) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cell_levels.size(); ++j) {
      acc += masses[j] * fit.cell_mean(d, cell_levels[j]);
    }
    estimates[static_cast<std::size_t>(d)] = acc / total;
  }
  return summarize_draw_estimates(std::move(estimates), target);
}

void write_draws_csv(std::ostream& out, const MrpFit& fit) {
  out << "draw,parameter,value\n";
  for (int d = 0; d < fit.draws(); ++d) {
    out << d << ",intercept," << format_double(fit.intercept_draws[static_cast<std::size_t>(d)])
        << '\n';
    out << d << ",residual_sd,"
        << format_double(fit.residual_sd_draws[static_cast<std::size_t>(d)]) << '\n';
    for (std::size_t f = 0; f < fit.factors.size(); ++f) {
      if (!fit.factor_active[f]) continue;
      out << d << ",scale_" << fit.factors[f].name << ','
          << format_double(fit.scale_draws[f][static_cast<std::size_t>(d)]) << '\n';
      for (int lv = 0; lv < fit.factors[f].levels; ++lv) {
        out << d << ",effect_" << fit.factors[f].name << '_' << lv << ','
            << format_double(fit.effect(static_cast<int>(f), lv, d)) << '\n';
      }
    }
  }
}

double split_rhat(std::span<const double> draws, int chains) {
  if (chains < 1 || draws.empty()) return 1.0;
  const std::size_t per_chain = draws.size() / static_cast<std::size_t>(chains);
  const std::size_t half = per_chain / 2;
  if (half < 2) return 1.0;

  std::vector<double> seq_mean, seq_var;
  for (int c = 0; c < chains; ++c) {
    for (int part = 0; part < 2; ++part) {
      const std::size_t begin =
          static_cast<std::size_t>(c) * per_chain + static_cast<std::size_t>(part) * half;
      double m = 0.0;
      for (std::size_t i = 0; i < half; ++i) m += draws[begin + i];
      m /= static_cast<double>(half);
      double v = 0.0;
      for (std::size_t i = 0; i < half; ++i) {
        v += (draws[begin + i] - m) * (draws[begin + i] - m);
      }
      v /= static_cast<double>(half - 1);
      seq_mean.push_back(m);
      seq_var.push_back(v);
    }
  }
  const double w = mean(seq_var);
  double grand = mean(seq_mean);
  double b = 0.0;
  for (double m : seq_mean) b += (m - grand) * (m - grand);
  b *= static_cast<double>(half) / static_cast<double>(seq_mean.size() - 1);
  if (w < 1e-300) return 1.0;
  const double nd = static_cast<double>(half);
  double var_plus = (nd - 1.0) / nd * w + b / nd;
  return std::sqrt(var_plus / w);
}

}  // namespace poststrat
