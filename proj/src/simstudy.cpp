#include "poststrat/simstudy.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <thread>
#include <tuple>

#include "poststrat/harmonize.hpp"
#include "poststrat/rng.hpp"
#include "poststrat/stats.hpp"
#include "poststrat/weighting.hpp"

namespace poststrat {

std::string to_string(Estimator e) {
  return e == Estimator::WeightedRaking ? "weighted_raking" : "mrp";
}

Estimator parse_estimator(const std::string& name) {
  if (name == "weighted_raking") return Estimator::WeightedRaking;
  if (name == "mrp") return Estimator::Mrp;
  throw std::invalid_argument("unknown estimator: " + name);
}

std::string to_string(WeightingMode m) {
  return m == WeightingMode::Margins ? "margins" : "cells";
}

WeightingMode parse_weighting_mode(const std::string& name) {
  if (name == "margins") return WeightingMode::Margins;
  if (name == "cells") return WeightingMode::Cells;
  throw std::invalid_argument("unknown weighting mode: " + name);
}

SimGrid::SimGrid() {
  for (int k = 0; k < 8; ++k) {
    methods.push_back(HarmonizationMethod{static_cast<HarmonizationMethodKind>(k)});
  }
}

void SimGrid::validate() const {
  if (conditions.empty() || p_nb_male_values.empty() || representations.empty() ||
      methods.empty() || estimators.empty()) {
    throw std::invalid_argument("empty grid axis");
  }
  if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  for (double p : p_nb_male_values) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw std::invalid_argument("p_nb_male outside [0,1]");
    }
  }
  for (const auto& m : methods) {
    if (m.kind == HarmonizationMethodKind::AssumeKnownProportions) {
      double sum = m.assumed_gender_probs[0] + m.assumed_gender_probs[1] +
                   m.assumed_gender_probs[2];
      if (std::abs(sum - 1.0) > 1e-9) {
        throw std::invalid_argument("assumed gender distribution must sum to 1");
      }
    }
  }
}

void StudySettings::validate() const {
  if (population_size < 1) throw std::invalid_argument("population_size must be >= 1");
  if (sample_size < 1) throw std::invalid_argument("sample_size must be >= 1");
  if (static_cast<long long>(sample_size) > population_size) {
    throw std::invalid_argument("sample_size exceeds population_size");
  }
  if (!(under_multiplier > 0.0) || !(over_multiplier > 0.0)) {
    throw std::invalid_argument("representation multipliers must be positive");
  }
  if (!(rake_tol > 0.0)) throw std::invalid_argument("rake_tol must be positive");
  if (rake_max_iter < 1) throw std::invalid_argument("rake_max_iter must be >= 1");
  if (trim_ratio && !(*trim_ratio > 0.0)) {
    throw std::invalid_argument("trim_ratio must be positive");
  }
  if (!(effect_scale > 0.0)) throw std::invalid_argument("effect_scale must be positive");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  margins.validate();
  mrp.validate();
}

namespace {

std::uint64_t p_bits(double p) { return std::bit_cast<std::uint64_t>(p); }

std::uint64_t derive_seed(const SimGrid& grid, std::string_view purpose,
                          ConditionLabel condition, double p, int representation,
                          int replicate, int method) {
  return SeedKey(grid.base_seed)
      .add(purpose)
      .add(static_cast<std::uint64_t>(condition))
      .add(p_bits(p))
      .add(static_cast<std::uint64_t>(representation))
      .add(static_cast<std::uint64_t>(replicate))
      .add(static_cast<std::uint64_t>(method))
      .value();
}

std::optional<double> truth_for(const Population& pop, Target target) {
  switch (target) {
    case Target::PopulationMean: return pop.truth_population_mean;
    case Target::SexMeanMale: return pop.truth_sex_means[0];
    case Target::SexMeanFemale: return pop.truth_sex_means[1];
    case Target::GenderMeanMale: return pop.truth_gender_means[0];
    case Target::GenderMeanFemale: return pop.truth_gender_means[1];
    case Target::GenderMeanNonBinary: return pop.truth_gender_means[2];
  }
  throw std::invalid_argument("bad Target");
}

struct ReplicateContext {
  int replicate;
  ConditionLabel condition;
  double p;
  Representation representation;
};

SimRecord base_record(const ReplicateContext& ctx, HarmonizationMethodKind method,
                      Estimator estimator) {
  SimRecord rec;
  rec.replicate = ctx.replicate;
  rec.condition = ctx.condition;
  rec.p_nb_male = ctx.p;
  rec.representation = ctx.representation;
  rec.method = method;
  rec.estimator = estimator;
  return rec;
}

void push_estimate(std::vector<SimRecord>& out, const ReplicateContext& ctx,
                   HarmonizationMethodKind method, Estimator estimator,
                   const EstimateRecord& est, const Population& pop) {
  SimRecord rec = base_record(ctx, method, estimator);
  rec.target = est.target;
  auto truth = truth_for(pop, est.target);
  rec.available = est.available && truth.has_value();
  if (rec.available) {
    rec.estimate = est.estimate;
    rec.lower = est.lower;
    rec.upper = est.upper;
    rec.truth = truth;
  }
  out.push_back(std::move(rec));
}

void push_flag(std::vector<SimRecord>& out, const ReplicateContext& ctx,
               HarmonizationMethodKind method, Estimator estimator,
               const std::string& reason) {
  SimRecord rec = base_record(ctx, method, estimator);
  rec.flag = reason;
  out.push_back(std::move(rec));
}

std::vector<SimRecord> run_replicate(const SimGrid& grid,
                                     const StudySettings& settings,
                                     const ReplicateContext& ctx) {
  std::vector<SimRecord> out;

  PopulationSpec pspec;
  pspec.size = settings.population_size;
  pspec.gender_probs = settings.gender_probs;
  pspec.pattern =
      ResponsePattern::make(settings.gender_probs, ctx.p,
                            settings.cross_rate_male_gender,
                            settings.cross_rate_female_gender);
  pspec.margins = settings.margins;
  pspec.condition = condition_from_label(ctx.condition, settings.effect_scale,
                                         settings.sigma);
  pspec.age_effects = settings.age_effects;
  pspec.edu_effects = settings.edu_effects;
  // The population is shared by every representation, method and estimator at
  // this grid point; its stream depends only on (condition, p, replicate).
  pspec.seed = derive_seed(grid, "population", ctx.condition, ctx.p, 0,
                           ctx.replicate, 0);
  const Population pop = build_population(pspec);
  const PoststratTable sexT = sex_table(pop);

  SamplingDesign design;
  design.n = settings.sample_size;
  design.representation = ctx.representation;
  design.nb_rate_multiplier = ctx.representation == Representation::Under
                                  ? settings.under_multiplier
                                  : settings.over_multiplier;
  design.seed = derive_seed(grid, "sample", ctx.condition, ctx.p,
                            static_cast<int>(ctx.representation), ctx.replicate, 0);
  const Sample sample = draw_sample(pop, design);

  if (sample.non_binary_count() == 0) {
    // Mirrors the dropped iteration when no non-binary units are drawn.
    for (const auto& method : grid.methods) {
      for (Estimator estimator : grid.estimators) {
        push_flag(out, ctx, method.kind, estimator, "zero_nb_sample");
      }
    }
    return out;
  }

  for (const auto& method : grid.methods) {
    const int mk = static_cast<int>(method.kind);
    HarmonizedSample h;
    PoststratTable control;
    if (transforms_population_table(method.kind)) {
      h = pass_through(sample);
      if (method.kind == HarmonizationMethodKind::AssumeKnownProportions) {
        control = assume_known_proportions(sexT, method.assumed_gender_probs,
                                           method.assumed_p_nb_male);
      } else {
        ImputationModelSpec model;
        model.mode = method.kind == HarmonizationMethodKind::GenderModelBest
                         ? ImputationMode::BestCase
                         : ImputationMode::WorstCase;
        model.true_proportions = pspec.pattern;
        control = gender_model_split(sexT, model);
      }
    } else {
      const std::uint64_t hseed =
          derive_seed(grid, "harmonize", ctx.condition, ctx.p,
                      static_cast<int>(ctx.representation), ctx.replicate, mk);
      switch (method.kind) {
        case HarmonizationMethodKind::FiftyFiftySplit:
          h = fifty_fifty_split(sample, hseed);
          break;
        case HarmonizationMethodKind::ImputeAllFemale:
          h = impute_all_female(sample);
          break;
        case HarmonizationMethodKind::SexModelBest:
        case HarmonizationMethodKind::SexModelWorst: {
          if (settings.fitted_sex_model &&
              method.kind == HarmonizationMethodKind::SexModelBest) {
            h = sex_model_fitted(sample, hseed);
            break;
          }
          ImputationModelSpec model;
          model.mode = method.kind == HarmonizationMethodKind::SexModelBest
                           ? ImputationMode::BestCase
                           : ImputationMode::WorstCase;
          model.true_proportions = pspec.pattern;
          h = sex_model_impute(sample, model, hseed);
          break;
        }
        case HarmonizationMethodKind::RemoveNonBinary:
          h = remove_non_binary(sample);
          break;
        default:
          throw std::logic_error("unhandled sample-side method");
      }
      control = sexT;
    }

    for (Estimator estimator : grid.estimators) {
      if (estimator == Estimator::WeightedRaking) {
        try {
          WeightVector w = settings.weighting_mode == WeightingMode::Margins
                               ? rake(h, margins_from_table(control),
                                      settings.rake_tol, settings.rake_max_iter)
                               : cell_weights(h, control);
          if (settings.trim_ratio) w = trim_weights(std::move(w), *settings.trim_ratio);
          for (Target target : kAllTargets) {
            push_estimate(out, ctx, method.kind, estimator,
                          weighted_estimate(h, w, target), pop);
          }
        } catch (const RakingError&) {
          push_flag(out, ctx, method.kind, estimator, "raking_nonconvergence");
        } catch (const std::invalid_argument&) {
          push_flag(out, ctx, method.kind, estimator, "weighting_error");
        }
      } else {
        MrpModelSpec mspec = settings.mrp;
        mspec.mcmc.seed =
            derive_seed(grid, "mrp", ctx.condition, ctx.p,
                        static_cast<int>(ctx.representation), ctx.replicate, mk);
        const TableAxis axis = control.axis;
        MrpFit fit = fit_mrp_sample(h, axis, mspec);
        if (!fit.healthy) {
          push_flag(out, ctx, method.kind, estimator, "mrp_unhealthy");
          continue;
        }
        for (Target target : kAllTargets) {
          EstimateRecord est;
          if (axis == TableAxis::Sex &&
              (target == Target::GenderMeanMale ||
               target == Target::GenderMeanFemale ||
               target == Target::GenderMeanNonBinary)) {
            // Gender means under a sex-axis fit: average the cell
            // predictions of the sample units in that gender group.
            GenderCategory g = target == Target::GenderMeanMale
                                   ? GenderCategory::Male
                                   : (target == Target::GenderMeanFemale
                                          ? GenderCategory::Female
                                          : GenderCategory::NonBinary);
            std::vector<char> mask;
            for (std::size_t i = 0; i < h.units.size(); ++i) {
              if (!h.retained[i]) continue;
              mask.push_back(h.units[i].gender == g ? 1 : 0);
            }
            est = aggregate_over_observations(fit, mask, target);
          } else if (axis == TableAxis::Gender &&
                     (target == Target::SexMeanMale ||
                      target == Target::SexMeanFemale)) {
            // Sex means under a gender-axis fit: aggregate through the split
            // table's source-sex masses.
            SexCategory s = target == Target::SexMeanMale ? SexCategory::Male
                                                          : SexCategory::Female;
            est = aggregate_source_sex(fit, control, s, target);
          } else {
            est = poststratify(fit, control, target);
          }
          push_estimate(out, ctx, method.kind, estimator, est, pop);
        }
      }
    }
  }
  return out;
}

}  // namespace

SimResult run_grid(const SimGrid& grid, const StudySettings& settings) {
  grid.validate();
  settings.validate();

  struct Task {
    ReplicateContext ctx;
  };
  std::vector<Task> tasks;
  for (ConditionLabel condition : grid.conditions) {
    for (double p : grid.p_nb_male_values) {
      for (Representation representation : grid.representations) {
        for (int rep = 0; rep < grid.replicates; ++rep) {
          tasks.push_back(Task{ReplicateContext{rep, condition, p, representation}});
        }
      }
    }
  }

  std::vector<std::vector<SimRecord>> slots(tasks.size());
  unsigned hw = std::thread::hardware_concurrency();
  std::size_t n_threads = settings.threads > 0
                              ? static_cast<std::size_t>(settings.threads)
                              : std::max(1u, hw);
  n_threads = std::min(n_threads, tasks.size());

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      std::size_t idx = next.fetch_add(1);
      if (idx >= tasks.size()) return;
      try {
        slots[idx] = run_replicate(grid, settings, tasks[idx].ctx);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  SimResult result;
  result.grid = grid;
  for (auto& slot : slots) {
    for (auto& rec : slot) result.records.push_back(std::move(rec));
  }
  return result;
}

SummaryResult summarize(const SimResult& result) {
  if (result.records.empty()) throw std::invalid_argument("empty results");

  using ComboKey = std::tuple<int, int, int, int, int>;  // c, p, r, m, e indexes
  const SimGrid& grid = result.grid;

  auto find_index = [](auto value, const auto& axis) {
    for (std::size_t i = 0; i < axis.size(); ++i) {
      if (axis[i] == value) return static_cast<int>(i);
    }
    return -1;
  };

  std::map<ComboKey, int> flagged_count;
  std::map<std::pair<ComboKey, int>, std::vector<std::pair<double, double>>> values;
  for (const auto& rec : result.records) {
    int ci = find_index(rec.condition, grid.conditions);
    int pi = find_index(rec.p_nb_male, grid.p_nb_male_values);
    int ri = find_index(rec.representation, grid.representations);
    int mi = -1;
    for (std::size_t i = 0; i < grid.methods.size(); ++i) {
      if (grid.methods[i].kind == rec.method) mi = static_cast<int>(i);
    }
    int ei = find_index(rec.estimator, grid.estimators);
    if (ci < 0 || pi < 0 || ri < 0 || mi < 0 || ei < 0) continue;
    ComboKey key{ci, pi, ri, mi, ei};
    if (!rec.flag.empty()) {
      ++flagged_count[key];
      continue;
    }
    if (!rec.available || !rec.target) continue;
    values[{key, static_cast<int>(*rec.target)}].push_back(
        {*rec.estimate - *rec.truth, *rec.upper - *rec.lower});
  }

  SummaryResult summary;
  for (std::size_t ci = 0; ci < grid.conditions.size(); ++ci) {
    for (std::size_t pi = 0; pi < grid.p_nb_male_values.size(); ++pi) {
      for (std::size_t ri = 0; ri < grid.representations.size(); ++ri) {
        for (std::size_t mi = 0; mi < grid.methods.size(); ++mi) {
          for (std::size_t ei = 0; ei < grid.estimators.size(); ++ei) {
            ComboKey key{static_cast<int>(ci), static_cast<int>(pi),
                         static_cast<int>(ri), static_cast<int>(mi),
                         static_cast<int>(ei)};
            auto fit = flagged_count.find(key);
            const int flagged = fit == flagged_count.end() ? 0 : fit->second;
            if (flagged >= grid.replicates) {
              summary.gaps.push_back(
                  to_string(grid.conditions[ci]) + "/p=" +
                  format_double(grid.p_nb_male_values[pi]) + "/" +
                  to_string(grid.representations[ri]) + "/" +
                  method_name(grid.methods[mi].kind) + "/" +
                  to_string(grid.estimators[ei]) + ": all replicates flagged");
              continue;
            }
            for (Target target : kAllTargets) {
              auto vit = values.find({key, static_cast<int>(target)});
              if (vit == values.end() || vit->second.empty()) continue;
              std::vector<double> biases, widths;
              biases.reserve(vit->second.size());
              widths.reserve(vit->second.size());
              for (auto [b, w] : vit->second) {
                biases.push_back(b);
                widths.push_back(w);
              }
              SummaryRecord row;
              row.condition = grid.conditions[ci];
              row.p_nb_male = grid.p_nb_male_values[pi];
              row.representation = grid.representations[ri];
              row.method = grid.methods[mi].kind;
              row.estimator = grid.estimators[ei];
              row.target = target;
              row.mean_bias = mean(biases);
              row.bias_q025 = quantile_type7(biases, 0.025);
              row.bias_q975 = quantile_type7(biases, 0.975);
              row.mean_width = mean(widths);
              row.width_q025 = quantile_type7(widths, 0.025);
              row.width_q975 = quantile_type7(widths, 0.975);
              row.n_effective_replicates = static_cast<int>(biases.size());
              summary.rows.push_back(row);
            }
          }
        }
      }
    }
  }
  return summary;
}

namespace {

std::string opt_field(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

}  // namespace

void write_results_csv(std::ostream& out, const SimResult& result) {
  out << kSchemaHeader << '\n';
  out << "replicate,condition,p_nb_male,representation,method,estimator,target,"
         "estimate,lower,upper,truth,flagged\n";
  for (const auto& rec : result.records) {
    out << rec.replicate << ',' << to_string(rec.condition) << ','
        << format_double(rec.p_nb_male) << ',' << to_string(rec.representation)
        << ',' << method_name(rec.method) << ',' << to_string(rec.estimator) << ','
        << (rec.target ? target_name(*rec.target) : std::string()) << ','
        << opt_field(rec.estimate) << ',' << opt_field(rec.lower) << ','
        << opt_field(rec.upper) << ',' << opt_field(rec.truth) << ',' << rec.flag
        << '\n';
  }
}

void write_summary_csv(std::ostream& out, const SummaryResult& summary) {
  out << kSchemaHeader << '\n';
  out << "condition,p_nb_male,representation,method,estimator,target,mean_bias,"
         "bias_q025,bias_q975,mean_width,width_q025,width_q975,"
         "n_effective_replicates\n";
  for (const auto& row : summary.rows) {
    out << to_string(row.condition) << ',' << format_double(row.p_nb_male) << ','
        << to_string(row.representation) << ',' << method_name(row.method) << ','
        << to_string(row.estimator) << ',' << target_name(row.target) << ','
        << format_double(row.mean_bias) << ',' << format_double(row.bias_q025)
        << ',' << format_double(row.bias_q975) << ','
        << format_double(row.mean_width) << ',' << format_double(row.width_q025)
        << ',' << format_double(row.width_q975) << ','
        << row.n_effective_replicates << '\n';
  }
}

}  // namespace poststrat
