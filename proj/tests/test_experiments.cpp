#include "rto/experiments.hpp"

#include "rto/io.hpp"

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

using namespace rto;
using numkit::Vector;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

nlohmann::json tiny_tv_config() {
  return {
      {"problem", "deconv_tv"}, {"n", 15},        {"m", 10},   {"sigma_obs", 1e-2},
      {"lambda", 4.0},          {"n_samps", 250}, {"seed", 9}, {"parallelism", 2},
  };
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("rto_test_" + tag)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("config parsing enforces required keys and shapes") {
  auto base = tiny_tv_config();
  CHECK_NOTHROW(cli::ExperimentConfig::from_json(base));

  auto missing_sigma = base;
  missing_sigma.erase("sigma_obs");
  CHECK_THROWS_AS(cli::ExperimentConfig::from_json(missing_sigma), cli::ConfigError);

  auto missing_lambda = base;
  missing_lambda.erase("lambda");
  CHECK_THROWS_AS(cli::ExperimentConfig::from_json(missing_lambda), cli::ConfigError);

  nlohmann::json besov = base;
  besov["problem"] = "deconv_besov";
  besov["n"] = 65;
  CHECK_THROWS_AS(cli::ExperimentConfig::from_json(besov), cli::ConfigError);
  besov["n"] = 64;
  CHECK_NOTHROW(cli::ExperimentConfig::from_json(besov));

  nlohmann::json elliptic = base;
  elliptic["problem"] = "elliptic_besov2d";
  elliptic["n"] = 60;
  CHECK_THROWS_AS(cli::ExperimentConfig::from_json(elliptic), cli::ConfigError);
  elliptic["n"] = 64;
  CHECK_NOTHROW(cli::ExperimentConfig::from_json(elliptic));

  const auto cfg = cli::ExperimentConfig::from_json(base);
  const auto round_trip = cli::ExperimentConfig::from_json(cfg.to_json());
  CHECK(round_trip.to_json() == cfg.to_json());
}

TEST_CASE("generate is deterministic and honors sigma = 0") {
  TempDir dir("generate");
  auto j = tiny_tv_config();
  const auto config = cli::ExperimentConfig::from_json(j);
  cli::cmd_generate(config, dir.path);
  const std::string truth1 = slurp(dir.path / "truth.csv");
  const std::string data1 = slurp(dir.path / "data.csv");
  cli::cmd_generate(config, dir.path);
  CHECK(slurp(dir.path / "truth.csv") == truth1);
  CHECK(slurp(dir.path / "data.csv") == data1);

  j["sigma_obs"] = 0.0;
  TempDir clean("generate0");
  cli::cmd_generate(cli::ExperimentConfig::from_json(j), clean.path);
  const auto data = io::read_csv(clean.path / "data.csv");
  const auto setup = cli::build_problem(cli::ExperimentConfig::from_json(tiny_tv_config()));
  const auto truth = cli::build_truth(config);
  const Vector expected = setup.model->evaluate(truth);
  CHECK((data.col(1) - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("full pipeline produces reproducible, schema-valid outputs") {
  TempDir dir("pipeline");
  const auto config = cli::ExperimentConfig::from_json(tiny_tv_config());
  cli::cmd_generate(config, dir.path);
  cli::cmd_sample(config, dir.path);
  const std::string chain1 = slurp(dir.path / "chain_theta.csv");

  cli::cmd_sample(config, dir.path);
  CHECK(slurp(dir.path / "chain_theta.csv") == chain1);

  cli::cmd_diagnose(dir.path);
  const auto summary = io::read_json(dir.path / "summary.json");
  const auto issues = io::validate_against_schema(summary, cli::summary_schema());
  for (const auto& issue : issues) MESSAGE(issue);
  CHECK(issues.empty());

  // The schema shipped in docs/ is the one the code enforces.
  const auto shipped = io::read_json(
      std::filesystem::path(RTO_GOLDEN_DIR).parent_path().parent_path() / "docs" /
      "summary.schema.json");
  CHECK(shipped == cli::summary_schema());

  // The run config embedded in run.json reproduces the run byte for byte.
  const auto run = io::read_json(dir.path / "run.json");
  const auto rehydrated = cli::ExperimentConfig::from_json(run.at("config"));
  TempDir redo("pipeline_redo");
  cli::cmd_generate(rehydrated, redo.path);
  cli::cmd_sample(rehydrated, redo.path);
  CHECK(slurp(redo.path / "chain_theta.csv") == chain1);

  const auto mean_csv = io::read_csv(dir.path / "posterior_mean.csv");
  CHECK(mean_csv.rows() == 15);
  CHECK(mean_csv.cols() == 3);
}

TEST_CASE("sampling reports missing data as a config error") {
  TempDir dir("missing_data");
  const auto config = cli::ExperimentConfig::from_json(tiny_tv_config());
  CHECK_THROWS_AS(cli::cmd_sample(config, dir.path), cli::ConfigError);
}

TEST_CASE("cli binary pipeline and exit codes") {
  TempDir dir("cli");
  const fs::path config_path = dir.path / "config.json";
  io::write_json(config_path, tiny_tv_config());

  const std::string base = std::string(RTO_CLI_PATH);
  auto run = [&](const std::string& args) {
    const std::string cmd = base + " " + args + " > /dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
  };

  CHECK(run("generate --config " + config_path.string() + " --out " + dir.path.string()) == 0);
  CHECK(run("sample --config " + config_path.string() + " --out " + dir.path.string()) == 0);
  CHECK(run("diagnose --out " + dir.path.string()) == 0);
  CHECK(fs::exists(dir.path / "summary.json"));

  // Invalid config: besov with a non power of two.
  auto bad = tiny_tv_config();
  bad["problem"] = "deconv_besov";
  bad["n"] = 65;
  const fs::path bad_path = dir.path / "bad.json";
  io::write_json(bad_path, bad);
  CHECK(run("generate --config " + bad_path.string() + " --out " + dir.path.string()) == 2);

  // Missing data file: runtime-level failure is a config error too (exit 2).
  TempDir empty("cli_empty");
  CHECK(run("sample --config " + config_path.string() + " --out " + empty.path.string()) == 2);
}

TEST_CASE("elliptic pipeline round trip at desk scale") {
  TempDir dir("elliptic");
  nlohmann::json j{
      {"problem", "elliptic_besov2d"},
      {"n", 16},
      {"sigma_obs", 2e-3},
      {"lambda", 32.0},
      {"n_samps", 40},
      {"seed", 2},
      {"parallelism", 2},
      {"data_mesh_div", 32},
  };
  const auto config = cli::ExperimentConfig::from_json(j);
  cli::cmd_generate(config, dir.path);
  const auto truth_grid = io::read_grid_csv(dir.path / "truth.csv");
  CHECK(truth_grid.rows() == 4);
  CHECK(truth_grid.cols() == 4);

  cli::cmd_sample(config, dir.path);
  cli::cmd_diagnose(dir.path);
  const auto run = io::read_json(dir.path / "run.json");
  CHECK(run.at("assumption_audit").at("n_states_checked").get<long>() >= 1);
  const auto mean_csv = io::read_csv(dir.path / "posterior_mean.csv");
  CHECK(mean_csv.cols() == 4);
  CHECK(mean_csv.rows() == 16);
}
