#include "poststrat/config.hpp"

#include <set>

namespace poststrat {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (allowed.find(it.key()) == allowed.end()) {
      throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
  }
}

template <typename T>
void read_field(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

template <typename T, std::size_t N>
void read_array(const json& j, const char* key, std::array<T, N>& out) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != N) {
    throw ConfigError(std::string("'") + key + "' must be an array of " +
                      std::to_string(N) + " numbers");
  }
  for (std::size_t i = 0; i < N; ++i) {
    try {
      out[i] = a[i].get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(std::string("bad value in '") + key + "': " + e.what());
    }
  }
}

template <typename Parsed, typename Parse>
std::vector<Parsed> read_name_list(const json& j, const char* key, Parse parse,
                                   const std::vector<Parsed>& fallback) {
  if (!j.contains(key)) return fallback;
  const auto& a = j.at(key);
  if (!a.is_array() || a.empty()) {
    throw ConfigError(std::string("'") + key + "' must be a nonempty array");
  }
  std::vector<Parsed> out;
  for (const auto& item : a) {
    if (!item.is_string()) {
      throw ConfigError(std::string("'") + key + "' entries must be strings");
    }
    try {
      out.push_back(parse(item.get<std::string>()));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  return out;
}

}  // namespace

RunConfig default_config() { return RunConfig{}; }

RunConfig parse_config(const json& j) {
  check_keys(j, "config",
             {"grid", "population", "sampling", "weighting", "harmonize", "mrp",
              "known_proportions", "output_dir", "threads"});
  RunConfig config;

  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    check_keys(g, "grid",
               {"conditions", "p_nb_male", "representations", "methods",
                "estimators", "replicates", "base_seed"});
    config.grid.conditions = read_name_list<ConditionLabel>(
        g, "conditions", parse_condition_label, config.grid.conditions);
    if (g.contains("p_nb_male")) {
      const auto& a = g.at("p_nb_male");
      if (!a.is_array() || a.empty()) {
        throw ConfigError("'p_nb_male' must be a nonempty array");
      }
      config.grid.p_nb_male_values.clear();
      for (const auto& item : a) {
        if (!item.is_number()) throw ConfigError("'p_nb_male' entries must be numbers");
        config.grid.p_nb_male_values.push_back(item.get<double>());
      }
    }
    config.grid.representations = read_name_list<Representation>(
        g, "representations", parse_representation, config.grid.representations);
    if (g.contains("methods")) {
      auto kinds = read_name_list<HarmonizationMethodKind>(
          g, "methods", parse_method, {});
      config.grid.methods.clear();
      for (auto kind : kinds) config.grid.methods.push_back(HarmonizationMethod{kind});
    }
    config.grid.estimators = read_name_list<Estimator>(
        g, "estimators", parse_estimator, config.grid.estimators);
    read_field(g, "replicates", config.grid.replicates);
    read_field(g, "base_seed", config.grid.base_seed);
  }

  if (j.contains("population")) {
    const auto& p = j.at("population");
    check_keys(p, "population",
               {"size", "gender_probs", "cross_rate_male_gender",
                "cross_rate_female_gender", "age_probs", "edu_probs",
                "effect_scale", "sigma", "age_effects", "edu_effects"});
    read_field(p, "size", config.settings.population_size);
    read_array(p, "gender_probs", config.settings.gender_probs);
    read_field(p, "cross_rate_male_gender", config.settings.cross_rate_male_gender);
    read_field(p, "cross_rate_female_gender", config.settings.cross_rate_female_gender);
    read_array(p, "age_probs", config.settings.margins.age_probs);
    read_array(p, "edu_probs", config.settings.margins.edu_probs);
    read_field(p, "effect_scale", config.settings.effect_scale);
    read_field(p, "sigma", config.settings.sigma);
    read_array(p, "age_effects", config.settings.age_effects);
    read_array(p, "edu_effects", config.settings.edu_effects);
  }

  if (j.contains("sampling")) {
    const auto& s = j.at("sampling");
    check_keys(s, "sampling", {"n", "under_multiplier", "over_multiplier"});
    read_field(s, "n", config.settings.sample_size);
    read_field(s, "under_multiplier", config.settings.under_multiplier);
    read_field(s, "over_multiplier", config.settings.over_multiplier);
  }

  if (j.contains("weighting")) {
    const auto& w = j.at("weighting");
    check_keys(w, "weighting", {"mode", "tol", "max_iter", "trim_ratio"});
    if (w.contains("mode")) {
      try {
        config.settings.weighting_mode =
            parse_weighting_mode(w.at("mode").get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      } catch (const json::exception& e) {
        throw ConfigError(std::string("bad value for 'mode': ") + e.what());
      }
    }
    read_field(w, "tol", config.settings.rake_tol);
    read_field(w, "max_iter", config.settings.rake_max_iter);
    if (w.contains("trim_ratio") && !w.at("trim_ratio").is_null()) {
      double ratio = 0.0;
      read_field(w, "trim_ratio", ratio);
      config.settings.trim_ratio = ratio;
    }
  }

  if (j.contains("harmonize")) {
    const auto& h = j.at("harmonize");
    check_keys(h, "harmonize", {"sex_model"});
    if (h.contains("sex_model")) {
      std::string mode;
      read_field(h, "sex_model", mode);
      if (mode == "fitted") {
        config.settings.fitted_sex_model = true;
      } else if (mode != "oracle") {
        throw ConfigError("'sex_model' must be 'oracle' or 'fitted'");
      }
    }
  }

  if (j.contains("mrp")) {
    const auto& m = j.at("mrp");
    check_keys(m, "mrp",
               {"chains", "warmup", "kept", "prior_scale_multiplier",
                "rhat_limit", "fixed_residual_sd"});
    read_field(m, "chains", config.settings.mrp.mcmc.chains);
    read_field(m, "warmup", config.settings.mrp.mcmc.warmup);
    read_field(m, "kept", config.settings.mrp.mcmc.kept);
    read_field(m, "prior_scale_multiplier", config.settings.mrp.prior_scale_multiplier);
    read_field(m, "rhat_limit", config.settings.mrp.rhat_limit);
    if (m.contains("fixed_residual_sd") && !m.at("fixed_residual_sd").is_null()) {
      double sd = 0.0;
      read_field(m, "fixed_residual_sd", sd);
      config.settings.mrp.fixed_residual_sd = sd;
    }
  }

  if (j.contains("known_proportions")) {
    const auto& k = j.at("known_proportions");
    check_keys(k, "known_proportions",
               {"assumed_gender_probs", "assumed_p_nb_male"});
    std::array<double, 3> assumed{0.49, 0.49, 0.02};
    double p_nb = 0.5;
    read_array(k, "assumed_gender_probs", assumed);
    read_field(k, "assumed_p_nb_male", p_nb);
    for (auto& method : config.grid.methods) {
      if (method.kind == HarmonizationMethodKind::AssumeKnownProportions) {
        method.assumed_gender_probs = assumed;
        method.assumed_p_nb_male = p_nb;
      }
    }
  }

  read_field(j, "output_dir", config.output_dir);
  read_field(j, "threads", config.settings.threads);

  try {
    config.grid.validate();
    config.settings.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return config;
}

nlohmann::json config_to_json(const RunConfig& config) {
  json j;
  json grid;
  grid["conditions"] = json::array();
  for (auto c : config.grid.conditions) grid["conditions"].push_back(to_string(c));
  grid["p_nb_male"] = config.grid.p_nb_male_values;
  grid["representations"] = json::array();
  for (auto r : config.grid.representations) {
    grid["representations"].push_back(to_string(r));
  }
  grid["methods"] = json::array();
  for (const auto& m : config.grid.methods) {
    grid["methods"].push_back(method_name(m.kind));
  }
  grid["estimators"] = json::array();
  for (auto e : config.grid.estimators) grid["estimators"].push_back(to_string(e));
  grid["replicates"] = config.grid.replicates;
  grid["base_seed"] = config.grid.base_seed;
  j["grid"] = grid;

  json population;
  population["size"] = config.settings.population_size;
  population["gender_probs"] = config.settings.gender_probs;
  population["cross_rate_male_gender"] = config.settings.cross_rate_male_gender;
  population["cross_rate_female_gender"] = config.settings.cross_rate_female_gender;
  population["age_probs"] = config.settings.margins.age_probs;
  population["edu_probs"] = config.settings.margins.edu_probs;
  population["effect_scale"] = config.settings.effect_scale;
  population["sigma"] = config.settings.sigma;
  population["age_effects"] = config.settings.age_effects;
  population["edu_effects"] = config.settings.edu_effects;
  j["population"] = population;

  json sampling;
  sampling["n"] = config.settings.sample_size;
  sampling["under_multiplier"] = config.settings.under_multiplier;
  sampling["over_multiplier"] = config.settings.over_multiplier;
  j["sampling"] = sampling;

  json weighting;
  weighting["mode"] = to_string(config.settings.weighting_mode);
  weighting["tol"] = config.settings.rake_tol;
  weighting["max_iter"] = config.settings.rake_max_iter;
  if (config.settings.trim_ratio) {
    weighting["trim_ratio"] = *config.settings.trim_ratio;
  } else {
    weighting["trim_ratio"] = nullptr;
  }
  j["weighting"] = weighting;

  json harmonize;
  harmonize["sex_model"] = config.settings.fitted_sex_model ? "fitted" : "oracle";
  j["harmonize"] = harmonize;

  json mrp;
  mrp["chains"] = config.settings.mrp.mcmc.chains;
  mrp["warmup"] = config.settings.mrp.mcmc.warmup;
  mrp["kept"] = config.settings.mrp.mcmc.kept;
  mrp["prior_scale_multiplier"] = config.settings.mrp.prior_scale_multiplier;
  mrp["rhat_limit"] = config.settings.mrp.rhat_limit;
  if (config.settings.mrp.fixed_residual_sd) {
    mrp["fixed_residual_sd"] = *config.settings.mrp.fixed_residual_sd;
  } else {
    mrp["fixed_residual_sd"] = nullptr;
  }
  j["mrp"] = mrp;

  json known;
  for (const auto& m : config.grid.methods) {
    if (m.kind == HarmonizationMethodKind::AssumeKnownProportions) {
      known["assumed_gender_probs"] = m.assumed_gender_probs;
      known["assumed_p_nb_male"] = m.assumed_p_nb_male;
    }
  }
  if (!known.is_null()) j["known_proportions"] = known;

  j["output_dir"] = config.output_dir;
  j["threads"] = config.settings.threads;
  return j;
}

}  // namespace poststrat
