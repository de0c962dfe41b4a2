#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "poststrat/cli.hpp"
#include "poststrat/config.hpp"
#include "poststrat/csv.hpp"
#include "poststrat/report.hpp"

using namespace poststrat;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path dir = fs::temp_directory_path() / ("poststrat_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void spit(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

std::string minimal_config_json(std::uint64_t seed) {
  nlohmann::json j;
  j["grid"]["conditions"] = {"all_different"};
  j["grid"]["p_nb_male"] = {0.5};
  j["grid"]["representations"] = {"under"};
  j["grid"]["methods"] = {"impute_female", "known_proportions"};
  j["grid"]["estimators"] = {"weighted_raking"};
  j["grid"]["replicates"] = 1;
  j["grid"]["base_seed"] = seed;
  j["population"]["size"] = 4000;
  // Keep the zero-non-binary flag path out of these smoke tests.
  j["sampling"]["n"] = 300;
  j["sampling"]["under_multiplier"] = 1.0;
  j["threads"] = 1;
  return j.dump();
}

int count_occurrences(const std::string& text, const std::string& needle) {
  int count = 0;
  std::size_t pos = 0;
  while ((pos = text.find(needle, pos)) != std::string::npos) {
    ++count;
    pos += needle.size();
  }
  return count;
}

}  // namespace

TEST_CASE("default config matches the standard scenario") {
  auto config = default_config();
  CHECK(config.grid.conditions.size() == 4);
  CHECK(config.grid.p_nb_male_values == std::vector<double>{0.0, 0.5, 1.0});
  CHECK(config.grid.representations.size() == 2);
  CHECK(config.grid.methods.size() == 8);
  CHECK(config.grid.replicates == 500);
  CHECK(config.settings.population_size == 100000);
  CHECK(config.settings.sample_size == 500);
  CHECK(config.settings.gender_probs == std::array<double, 3>{0.49, 0.49, 0.02});
  CHECK(config.settings.mrp.mcmc.chains == 4);
  CHECK(config.settings.mrp.mcmc.kept == 500);
}

TEST_CASE("unknown config keys are rejected") {
  CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"grid":{"foo":1}})")),
                  ConfigError);
  CHECK_THROWS_AS(parse_config(nlohmann::json::parse(R"({"outputs":"x"})")),
                  ConfigError);
  CHECK_THROWS_AS(
      parse_config(nlohmann::json::parse(R"({"grid":{"replicates":0}})")),
      ConfigError);
  CHECK_THROWS_AS(
      parse_config(nlohmann::json::parse(R"({"grid":{"conditions":["nope"]}})")),
      ConfigError);
  auto ok = parse_config(nlohmann::json::parse(R"({"grid":{"replicates":7}})"));
  CHECK(ok.grid.replicates == 7);
  CHECK(ok.grid.methods.size() == 8);
}

TEST_CASE("config echo round-trips through parse_config") {
  auto config = default_config();
  config.grid.replicates = 3;
  config.settings.trim_ratio = 4.0;
  auto echoed = parse_config(config_to_json(config));
  CHECK(echoed.grid.replicates == 3);
  REQUIRE(echoed.settings.trim_ratio.has_value());
  CHECK(*echoed.settings.trim_ratio == 4.0);
  CHECK(echoed.settings.weighting_mode == config.settings.weighting_mode);
}

TEST_CASE("fitted sex model sits behind a config flag, off by default") {
  CHECK_FALSE(default_config().settings.fitted_sex_model);
  auto on = parse_config(
      nlohmann::json::parse(R"({"harmonize":{"sex_model":"fitted"}})"));
  CHECK(on.settings.fitted_sex_model);
  auto off = parse_config(
      nlohmann::json::parse(R"({"harmonize":{"sex_model":"oracle"}})"));
  CHECK_FALSE(off.settings.fitted_sex_model);
  CHECK_THROWS_AS(
      parse_config(nlohmann::json::parse(R"({"harmonize":{"sex_model":"x"}})")),
      ConfigError);
  auto echoed = parse_config(config_to_json(on));
  CHECK(echoed.settings.fitted_sex_model);
}

TEST_CASE("simulate: missing config file exits 1") {
  auto outcome = run_simulate("/nonexistent/config.json");
  CHECK(outcome.exit_code == 1);
}

TEST_CASE("simulate: invalid config exits 2") {
  auto dir = fresh_dir("badcfg");
  spit(dir / "config.json", R"({"grid":{"bogus_key":1}})");
  CHECK(run_simulate((dir / "config.json").string()).exit_code == 2);
  spit(dir / "notjson.json", "{");
  CHECK(run_simulate((dir / "notjson.json").string()).exit_code == 2);
}

TEST_CASE("simulate: minimal run writes the three outputs") {
  auto dir = fresh_dir("smoke");
  nlohmann::json j = nlohmann::json::parse(minimal_config_json(11));
  j["output_dir"] = (dir / "out").string();
  spit(dir / "config.json", j.dump());

  auto outcome = run_simulate((dir / "config.json").string());
  CHECK(outcome.exit_code == 0);
  CHECK(fs::exists(dir / "out" / "results.csv"));
  CHECK(fs::exists(dir / "out" / "summary.csv"));
  CHECK(fs::exists(dir / "out" / "manifest.json"));

  std::string results = slurp(dir / "out" / "results.csv");
  CHECK(results.rfind("# poststrat-harmonize v1\n", 0) == 0);
  CHECK(results.find("replicate,condition,") != std::string::npos);

  auto manifest = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  CHECK(manifest["seed"] == 11);
  CHECK(manifest["outputs"]["results.csv"]["bytes"] == results.size());
}

TEST_CASE("simulate: identical configs produce byte-identical results") {
  auto dir = fresh_dir("determinism");
  for (const char* run : {"a", "b"}) {
    nlohmann::json j = nlohmann::json::parse(minimal_config_json(99));
    j["output_dir"] = (dir / run).string();
    spit(dir / (std::string("config_") + run + ".json"), j.dump());
    CHECK(run_simulate((dir / (std::string("config_") + run + ".json")).string())
              .exit_code == 0);
  }
  CHECK(slurp(dir / "a" / "results.csv") == slurp(dir / "b" / "results.csv"));

  // The manifest hash changes exactly when the results bytes change.
  auto ma = nlohmann::json::parse(slurp(dir / "a" / "manifest.json"));
  auto mb = nlohmann::json::parse(slurp(dir / "b" / "manifest.json"));
  CHECK(ma["outputs"]["results.csv"]["fnv1a64"] ==
        mb["outputs"]["results.csv"]["fnv1a64"]);

  nlohmann::json j = nlohmann::json::parse(minimal_config_json(100));
  j["output_dir"] = (dir / "c").string();
  spit(dir / "config_c.json", j.dump());
  CHECK(run_simulate((dir / "config_c.json").string()).exit_code == 0);
  auto mc = nlohmann::json::parse(slurp(dir / "c" / "manifest.json"));
  CHECK(ma["outputs"]["results.csv"]["fnv1a64"] !=
        mc["outputs"]["results.csv"]["fnv1a64"]);
}

TEST_CASE("simulate: PH_SEED overrides the config seed") {
  auto dir = fresh_dir("envseed");
  nlohmann::json j = nlohmann::json::parse(minimal_config_json(1));
  j["output_dir"] = (dir / "out").string();
  spit(dir / "config.json", j.dump());

  setenv("PH_SEED", "424242", 1);
  auto outcome = run_simulate((dir / "config.json").string());
  unsetenv("PH_SEED");
  CHECK(outcome.exit_code == 0);
  auto manifest = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  CHECK(manifest["seed"] == 424242);
}

TEST_CASE("rake command reproduces the matrix-IPF oracle") {
  auto dir = fresh_dir("rake");
  std::ostringstream sample;
  sample << "unit_id,sex,age\n";
  int id = 0;
  auto add_rows = [&](const char* sex, const char* age, int count) {
    for (int i = 0; i < count; ++i) {
      sample << "u" << id++ << ',' << sex << ',' << age << '\n';
    }
  };
  add_rows("male", "1", 10);
  add_rows("male", "2", 20);
  add_rows("female", "1", 30);
  add_rows("female", "2", 40);
  spit(dir / "sample.csv", sample.str());
  spit(dir / "margins.csv",
       "variable,level,target\n"
       "sex,male,50\nsex,female,50\nage,1,50\nage,2,50\n");

  const auto weights_path = dir / "weights.csv";
  CHECK(run_rake((dir / "sample.csv").string(), (dir / "margins.csv").string(),
                 1e-10, weights_path.string()) == 0);

  auto fitted = oracles::ipf_matrix({{10.0, 20.0}, {30.0, 40.0}}, {50.0, 50.0},
                                    {50.0, 50.0}, 200);
  const double counts[2][2] = {{10.0, 20.0}, {30.0, 40.0}};

  std::ifstream in(weights_path);
  auto table = read_csv(in);
  REQUIRE(table.rows.size() == 100);
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    int row = r < 30 ? 0 : 1;
    int col;
    if (row == 0) {
      col = r < 10 ? 0 : 1;
    } else {
      col = r < 60 ? 0 : 1;
    }
    double expected = fitted[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] /
                      counts[row][col];
    double got = parse_csv_double(table.rows[r][1], 0);
    CHECK(got == doctest::Approx(expected).epsilon(1e-6));
  }
}

TEST_CASE("rake command: proportional sample converges in one cycle") {
  auto dir = fresh_dir("rakeprop");
  std::ostringstream sample;
  sample << "sex\n";
  for (int i = 0; i < 4; ++i) sample << "male\n";
  for (int i = 0; i < 4; ++i) sample << "female\n";
  spit(dir / "sample.csv", sample.str());
  spit(dir / "margins.csv", "variable,level,target\nsex,male,40\nsex,female,40\n");
  CHECK(run_rake((dir / "sample.csv").string(), (dir / "margins.csv").string(),
                 1e-8, (dir / "weights.csv").string()) == 0);
  std::ifstream in(dir / "weights.csv");
  auto table = read_csv(in);
  for (const auto& row : table.rows) {
    CHECK(parse_csv_double(row[1], 0) == doctest::Approx(10.0));
  }
}

TEST_CASE("rake command: margin level missing from the sample exits 4") {
  auto dir = fresh_dir("rakemissing");
  spit(dir / "sample.csv", "sex\nmale\nmale\n");
  spit(dir / "margins.csv", "variable,level,target\nsex,male,7\nsex,female,3\n");
  CHECK(run_rake((dir / "sample.csv").string(), (dir / "margins.csv").string(),
                 1e-8, (dir / "weights.csv").string()) == 4);
}

TEST_CASE("rake command: missing files and bad csv") {
  auto dir = fresh_dir("rakebad");
  spit(dir / "sample.csv", "sex\nmale\n");
  CHECK(run_rake((dir / "nope.csv").string(), (dir / "margins.csv").string(), 1e-8,
                 (dir / "w.csv").string()) == 1);
  spit(dir / "margins.csv", "variable,level,target\nsex,male,7,extra\n");
  CHECK(run_rake((dir / "sample.csv").string(), (dir / "margins.csv").string(),
                 1e-8, (dir / "w.csv").string()) == 2);
  spit(dir / "margins.csv", "variable,level,target\nsex,male,7\nsex,male,3\n");
  CHECK(run_rake((dir / "sample.csv").string(), (dir / "margins.csv").string(),
                 1e-8, (dir / "w.csv").string()) == 2);
}

TEST_CASE("report: single-row summary yields one point and one segment") {
  auto dir = fresh_dir("report1");
  spit(dir / "summary.csv",
       "# poststrat-harmonize v1\n"
       "condition,p_nb_male,representation,method,estimator,target,mean_bias,"
       "bias_q025,bias_q975,mean_width,width_q025,width_q975,"
       "n_effective_replicates\n"
       "all_different,0.5,under,remove_nb,weighted_raking,population_mean,"
       "0.21,0.05,0.4,1.5,1.2,1.9,200\n");
  CHECK(run_report((dir / "summary.csv").string(), (dir / "figs").string()) == 0);

  auto svg = slurp(dir / "figs" / "all_different_bias.svg");
  CHECK(count_occurrences(svg, "r=\"2.6\"") == 1);          // one data point
  CHECK(count_occurrences(svg, "stroke-width=\"1.4\"") == 1);  // one segment
  CHECK(fs::exists(dir / "figs" / "all_different_width.svg"));
  CHECK(fs::exists(dir / "figs" / "all_different_bias.txt"));
}

TEST_CASE("report: file count is two metrics per condition") {
  auto dir = fresh_dir("reportcount");
  std::ostringstream csv;
  csv << "condition,p_nb_male,representation,method,estimator,target,mean_bias,"
         "bias_q025,bias_q975,mean_width,width_q025,width_q975,"
         "n_effective_replicates\n";
  for (const char* method : {"fifty_fifty", "remove_nb", "sex_model_best"}) {
    for (const char* est : {"mrp", "weighted_raking"}) {
      for (double p : {0.0, 0.5, 1.0}) {
        csv << "all_different," << p << ",under," << method << ',' << est
            << ",population_mean,0.1,-0.2,0.4,1.0,0.8,1.3,200\n";
      }
    }
  }
  spit(dir / "summary.csv", csv.str());
  CHECK(run_report((dir / "summary.csv").string(), (dir / "figs").string()) == 0);
  int svg_count = 0;
  for (const auto& entry : fs::directory_iterator(dir / "figs")) {
    if (entry.path().extension() == ".svg") ++svg_count;
  }
  CHECK(svg_count == 2);  // bias + width for the single condition
}

TEST_CASE("report: malformed summary exits 2 and names the line") {
  auto dir = fresh_dir("reportbad");
  spit(dir / "summary.csv",
       "condition,p_nb_male,representation,method,estimator,target,mean_bias,"
       "bias_q025,bias_q975,mean_width,width_q025,width_q975,"
       "n_effective_replicates\n"
       "all_different,0.5,under,remove_nb,weighted_raking,population_mean,"
       "xyz,0.05,0.4,1.5,1.2,1.9,200\n");
  CHECK(run_report((dir / "summary.csv").string(), (dir / "figs").string()) == 2);

  std::ifstream in(dir / "summary.csv");
  try {
    read_summary_csv(in);
    FAIL("expected CsvError");
  } catch (const CsvError& e) {
    CHECK(e.line == 2);
  }

  auto empty_dir = fresh_dir("reportempty");
  spit(empty_dir / "summary.csv",
       "condition,p_nb_male,representation,method,estimator,target,mean_bias,"
       "bias_q025,bias_q975,mean_width,width_q025,width_q975,"
       "n_effective_replicates\n");
  CHECK(run_report((empty_dir / "summary.csv").string(),
                   (empty_dir / "figs").string()) == 2);
}

TEST_CASE("report consumes exactly what simulate emits") {
  auto dir = fresh_dir("roundtrip");
  nlohmann::json j = nlohmann::json::parse(minimal_config_json(7));
  j["output_dir"] = (dir / "out").string();
  spit(dir / "config.json", j.dump());
  REQUIRE(run_simulate((dir / "config.json").string()).exit_code == 0);
  CHECK(run_report((dir / "out" / "summary.csv").string(),
                   (dir / "figs").string()) == 0);
  CHECK(fs::exists(dir / "figs" / "all_different_bias.svg"));
  CHECK(fs::exists(dir / "figs" / "all_different_width.txt"));
}
