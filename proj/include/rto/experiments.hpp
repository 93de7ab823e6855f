#pragma once

#include "rto/models.hpp"
#include "rto/priors.hpp"
#include "rto/sampler.hpp"
#include "rto/transforms.hpp"

#include <json.hpp>

#include <filesystem>
#include <memory>
#include <string>

// Batch driver for the shipped experiments. Each run lives in one directory:
//   config.json, truth.csv, data.csv          (generate)
//   chain_u.csv, chain_theta.csv, run.json    (sample)
//   summary.json, posterior_mean.csv          (diagnose)
namespace rto::cli {

using numkit::Vector;

/// User-input problems: reported with exit code 2 by the CLI.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string problem;  // deconv_tv | deconv_besov | elliptic_besov2d
  long n = 0;
  long m = 30;               // measurement count (deconvolution only)
  double sigma_obs = -1.0;   // required, no default
  double lambda = -1.0;      // required, no default
  double s = 1.0;            // Besov smoothness order
  long n_samps = 10000;
  std::uint64_t seed = 1;
  int parallelism = 1;
  double bump_width = 0.05;   // elliptic forcing
  long data_mesh_div = 128;   // fine mesh used only for data generation
  std::string truth_path;  // optional truth override (CSV)
  lsq::LsqOptions solver = sampler::proposal_solver_defaults();

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_json_file(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  /// Problem-specific structural checks; throws ConfigError.
  void validate() const;

  bool is_elliptic() const { return problem == "elliptic_besov2d"; }
  long grid_root() const;  // sqrt(n) for the elliptic problem
};

struct ProblemSetup {
  std::unique_ptr<models::ForwardModel> model;  // sampling model
  std::shared_ptr<transforms::L1PriorTransform> transform;
  priors::L1Prior prior;
};

ProblemSetup build_problem(const ExperimentConfig& config);

/// Model used for synthetic-data generation (fine mesh for the elliptic
/// problem, identical to the sampling model otherwise).
std::unique_ptr<models::ForwardModel> build_data_model(const ExperimentConfig& config);

Vector build_truth(const ExperimentConfig& config);

void cmd_generate(const ExperimentConfig& config, const std::filesystem::path& out_dir);
void cmd_sample(const ExperimentConfig& config, const std::filesystem::path& run_dir);
void cmd_diagnose(const std::filesystem::path& run_dir);

/// The summary.json structural schema shipped with the project.
nlohmann::json summary_schema();

}  // namespace rto::cli
