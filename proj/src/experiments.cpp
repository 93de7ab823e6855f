#include "rto/experiments.hpp"

#include "rto/diagnostics.hpp"
#include "rto/io.hpp"

#include <cmath>
#include <set>

namespace rto::cli {

namespace {

using numkit::Index;
using numkit::Matrix;
using numkit::Vector;

bool is_power_of_two(long v) { return v >= 1 && (v & (v - 1)) == 0; }

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

double require_number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) {
    throw ConfigError(std::string("config: missing required key '") + key + "'");
  }
  return j.at(key).get<double>();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  if (!j.contains("problem")) throw ConfigError("config: missing required key 'problem'");
  c.problem = j.at("problem").get<std::string>();
  if (!j.contains("n")) throw ConfigError("config: missing required key 'n'");
  c.n = j.at("n").get<long>();
  c.m = get_or<long>(j, "m", 30);
  c.sigma_obs = require_number(j, "sigma_obs");
  c.lambda = require_number(j, "lambda");
  c.s = get_or<double>(j, "s", 1.0);
  c.n_samps = get_or<long>(j, "n_samps", 10000);
  c.seed = get_or<std::uint64_t>(j, "seed", 1);
  c.parallelism = get_or<int>(j, "parallelism", 1);
  c.bump_width = get_or<double>(j, "bump_width", 0.05);
  c.data_mesh_div = get_or<long>(j, "data_mesh_div", 128);
  c.truth_path = get_or<std::string>(j, "truth_path", "");
  if (j.contains("solver")) {
    const auto& s = j.at("solver");
    c.solver.max_iterations = get_or<int>(s, "max_iterations", c.solver.max_iterations);
    c.solver.gradient_tol = get_or<double>(s, "gradient_tol", c.solver.gradient_tol);
    c.solver.step_tol = get_or<double>(s, "step_tol", c.solver.step_tol);
    c.solver.residual_tol = get_or<double>(s, "residual_tol", c.solver.residual_tol);
    c.solver.initial_damping = get_or<double>(s, "initial_damping", c.solver.initial_damping);
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::filesystem::path& path) {
  try {
    return from_json(io::read_json(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: cannot parse " + path.string() + ": " + e.what());
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j{
      {"problem", problem},
      {"n", n},
      {"m", m},
      {"sigma_obs", sigma_obs},
      {"lambda", lambda},
      {"s", s},
      {"n_samps", n_samps},
      {"seed", seed},
      {"parallelism", parallelism},
      {"bump_width", bump_width},
      {"data_mesh_div", data_mesh_div},
      {"truth_path", truth_path},
      {"solver",
       {{"max_iterations", solver.max_iterations},
        {"gradient_tol", solver.gradient_tol},
        {"step_tol", solver.step_tol},
        {"residual_tol", solver.residual_tol},
        {"initial_damping", solver.initial_damping}}},
  };
  return j;
}

long ExperimentConfig::grid_root() const {
  const long root = std::lround(std::sqrt(static_cast<double>(n)));
  return root;
}

void ExperimentConfig::validate() const {
  static const std::set<std::string> known = {"deconv_tv", "deconv_besov", "elliptic_besov2d"};
  if (known.count(problem) == 0) {
    throw ConfigError("config: unknown problem '" + problem + "'");
  }
  if (sigma_obs < 0.0) throw ConfigError("config: sigma_obs must be >= 0");
  if (!(lambda > 0.0)) throw ConfigError("config: lambda must be positive");
  if (n_samps < 1) throw ConfigError("config: n_samps must be >= 1");
  if (parallelism < 1) throw ConfigError("config: parallelism must be >= 1");
  if (!(s >= 1.0)) throw ConfigError("config: Besov order s must be >= 1");

  if (problem == "deconv_tv") {
    if (n < 2) throw ConfigError("config: deconv_tv needs n >= 2");
    if (m < 1) throw ConfigError("config: deconv needs m >= 1");
  } else if (problem == "deconv_besov") {
    if (!is_power_of_two(n) || n < 2) {
      throw ConfigError("config: deconv_besov needs n a power of 2 (got " + std::to_string(n) +
                        ")");
    }
    if (m < 1) throw ConfigError("config: deconv needs m >= 1");
  } else {
    const long root = grid_root();
    if (root * root != n || !is_power_of_two(root) || root < 2) {
      throw ConfigError("config: elliptic_besov2d needs n a power of 4 (got " +
                        std::to_string(n) + ")");
    }
    if (data_mesh_div < root || data_mesh_div % root != 0) {
      throw ConfigError("config: data_mesh_div must be a multiple of sqrt(n)");
    }
    if (!(bump_width > 0.0)) throw ConfigError("config: bump_width must be positive");
  }
}

ProblemSetup build_problem(const ExperimentConfig& config) {
  ProblemSetup setup;
  if (config.problem == "deconv_tv") {
    setup.prior = priors::make_prior(priors::PriorKind::TV1D, config.n, config.lambda, config.s);
    setup.model = std::make_unique<models::ConvolutionModel>(
        models::build_convolution(config.n, config.m, config.sigma_obs));
  } else if (config.problem == "deconv_besov") {
    setup.prior =
        priors::make_prior(priors::PriorKind::Besov1D, config.n, config.lambda, config.s);
    setup.model = std::make_unique<models::ConvolutionModel>(
        models::build_convolution(config.n, config.m, config.sigma_obs));
  } else {
    setup.prior =
        priors::make_prior(priors::PriorKind::Besov2D, config.n, config.lambda, config.s);
    const long root = config.grid_root();
    setup.model = std::make_unique<models::EllipticModel>(models::EllipticModel::with_bump_forcing(
        root, root, config.sigma_obs, config.bump_width));
  }
  setup.transform =
      std::make_shared<transforms::L1PriorTransform>(setup.prior.d, setup.prior.lambda);
  return setup;
}

std::unique_ptr<models::ForwardModel> build_data_model(const ExperimentConfig& config) {
  if (config.is_elliptic()) {
    return std::make_unique<models::EllipticModel>(models::EllipticModel::with_bump_forcing(
        config.grid_root(), config.data_mesh_div, config.sigma_obs, config.bump_width));
  }
  return std::make_unique<models::ConvolutionModel>(
      models::build_convolution(config.n, config.m, config.sigma_obs));
}

Vector build_truth(const ExperimentConfig& config) {
  if (!config.truth_path.empty()) {
    if (config.is_elliptic()) {
      const Matrix grid = io::read_grid_csv(config.truth_path);
      if (grid.rows() != config.grid_root() || grid.cols() != config.grid_root()) {
        throw ConfigError("truth grid must be sqrt(n) x sqrt(n)");
      }
      Vector theta(config.n);
      for (Index b = 0; b < grid.rows(); ++b) {
        for (Index a = 0; a < grid.cols(); ++a) theta[b * grid.cols() + a] = grid(b, a);
      }
      return theta;
    }
    return models::make_truth_from_file(config.truth_path, config.n);
  }
  if (config.problem == "deconv_tv") return models::make_truth(models::TruthKind::SquarePulse, config.n);
  if (config.problem == "deconv_besov") return models::make_truth(models::TruthKind::TwoLevel, config.n);
  return models::default_log_conductivity(config.grid_root());
}

namespace {

void write_truth_file(const ExperimentConfig& config, const Vector& truth,
                      const std::filesystem::path& dir) {
  if (config.is_elliptic()) {
    const long root = config.grid_root();
    Matrix grid(root, root);
    for (long b = 0; b < root; ++b) {
      for (long a = 0; a < root; ++a) grid(b, a) = truth[b * root + a];
    }
    io::write_grid_csv(dir / "truth.csv", grid);
  } else {
    Matrix rows(config.n, 2);
    for (long i = 0; i < config.n; ++i) {
      rows(i, 0) = (2.0 * i + 1.0) / (2.0 * config.n);
      rows(i, 1) = truth[i];
    }
    io::write_csv(dir / "truth.csv", {"x", "theta"}, rows);
  }
}

void write_data_file(const ExperimentConfig& config, const Vector& y,
                     const std::filesystem::path& dir) {
  if (config.is_elliptic()) {
    const auto centers = models::cell_centers(config.grid_root());
    Matrix rows(y.size(), 3);
    for (Index k = 0; k < y.size(); ++k) {
      rows(k, 0) = centers[static_cast<std::size_t>(k)].first;
      rows(k, 1) = centers[static_cast<std::size_t>(k)].second;
      rows(k, 2) = y[k];
    }
    io::write_csv(dir / "data.csv", {"x", "y", "value"}, rows);
  } else {
    Matrix rows(y.size(), 2);
    for (Index k = 0; k < y.size(); ++k) {
      rows(k, 0) = static_cast<double>(k + 1) / static_cast<double>(config.m + 1);
      rows(k, 1) = y[k];
    }
    io::write_csv(dir / "data.csv", {"t", "y"}, rows);
  }
}

}  // namespace

void cmd_generate(const ExperimentConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  const Vector truth = build_truth(config);
  const auto data_model = build_data_model(config);
  const Vector y = models::generate_data(*data_model, truth, config.seed);

  io::write_json(out_dir / "config.json", config.to_json());
  write_truth_file(config, truth, out_dir);
  write_data_file(config, y, out_dir);
}

void cmd_sample(const ExperimentConfig& config, const std::filesystem::path& run_dir) {
  config.validate();
  if (!(config.sigma_obs > 0.0)) {
    throw ConfigError("cmd_sample: sigma_obs must be positive for sampling");
  }
  const auto data_path = run_dir / "data.csv";
  if (!std::filesystem::exists(data_path)) {
    throw ConfigError("cmd_sample: missing " + data_path.string() + " (run generate first)");
  }
  const Matrix data = io::read_csv(data_path);
  const Vector y = data.col(data.cols() - 1);

  ProblemSetup setup = build_problem(config);
  if (y.size() != setup.model->dim_obs()) {
    throw ConfigError("cmd_sample: data length does not match the configured model");
  }

  const Matrix gamma =
      (config.sigma_obs * config.sigma_obs) * Matrix::Identity(y.size(), y.size());
  sampler::RtoOptions options;
  options.solver = config.solver;

  const sampler::RunResult result =
      sampler::run_rto_mh(*setup.model, *setup.transform, y, gamma, config.n_samps, config.seed,
                          config.parallelism, options);

  io::write_chain_csv(run_dir / "chain_u.csv", result.chain);
  io::write_theta_csv(run_dir / "chain_theta.csv", result.theta_samples);

  nlohmann::json run{
      {"seed", result.chain.seed},
      {"n_samps", config.n_samps},
      {"acceptance_rate", result.chain.acceptance_rate()},
      {"n_function_evals", result.chain.n_function_evals},
      {"n_jacobian_evals", result.chain.n_jacobian_evals},
      {"n_invalid_proposals", result.n_invalid_proposals},
      {"assumption_audit",
       {{"min_sv_stacked", result.audit.min_sv_stacked},
        {"min_sv_projected", result.audit.min_sv_projected},
        {"n_states_checked", result.audit.n_states_checked},
        {"n_flagged", result.audit.n_flagged},
        {"threshold", result.audit.threshold}}},
      {"config", config.to_json()},
  };
  io::write_json(run_dir / "run.json", run);
}

nlohmann::json summary_schema() {
  return nlohmann::json{
      {"type", "object"},
      {"required",
       {"mean", "std", "ess", "ess_per_evaluation", "acceptance_rate", "evaluations"}},
      {"properties",
       {
           {"mean", {{"type", "array"}, {"items", {{"type", "number"}}}}},
           {"std", {{"type", "array"}, {"items", {{"type", "number"}}}}},
           {"ess",
            {{"type", "object"},
             {"required", {"min", "median", "max"}},
             {"properties",
              {{"min", {{"type", "number"}}},
               {"median", {{"type", "number"}}},
               {"max", {{"type", "number"}}}}}}},
           {"ess_per_evaluation",
            {{"type", "object"},
             {"required", {"min", "median", "max"}},
             {"properties",
              {{"min", {{"type", "number"}}},
               {"median", {{"type", "number"}}},
               {"max", {{"type", "number"}}}}}}},
           {"acceptance_rate", {{"type", "number"}}},
           {"evaluations",
            {{"type", "object"},
             {"required", {"function", "jacobian"}},
             {"properties",
              {{"function", {{"type", "integer"}}}, {"jacobian", {{"type", "integer"}}}}}}},
       }},
  };
}

void cmd_diagnose(const std::filesystem::path& run_dir) {
  const auto theta_path = run_dir / "chain_theta.csv";
  const auto run_path = run_dir / "run.json";
  if (!std::filesystem::exists(theta_path) || !std::filesystem::exists(run_path)) {
    throw ConfigError("cmd_diagnose: missing chain files in " + run_dir.string());
  }
  const Matrix theta = io::read_csv(theta_path);
  const nlohmann::json run = io::read_json(run_path);
  const ExperimentConfig config = ExperimentConfig::from_json(run.at("config"));

  const diagnostics::ChainSummary summary = diagnostics::chain_summary(theta);
  const double total_evals = static_cast<double>(run.at("n_function_evals").get<long>() +
                                                 run.at("n_jacobian_evals").get<long>());

  nlohmann::json out{
      {"mean", std::vector<double>(summary.mean.begin(), summary.mean.end())},
      {"std", std::vector<double>(summary.std_dev.begin(), summary.std_dev.end())},
      {"ess",
       {{"min", summary.ess.min_ess},
        {"median", summary.ess.median_ess},
        {"max", summary.ess.max_ess}}},
      {"ess_per_evaluation",
       {{"min", summary.ess.min_ess / total_evals},
        {"median", summary.ess.median_ess / total_evals},
        {"max", summary.ess.max_ess / total_evals}}},
      {"acceptance_rate", run.at("acceptance_rate")},
      {"evaluations",
       {{"function", run.at("n_function_evals")}, {"jacobian", run.at("n_jacobian_evals")}}},
  };
  io::write_json(run_dir / "summary.json", out);

  if (config.is_elliptic()) {
    const auto centers = models::cell_centers(config.grid_root());
    Matrix rows(theta.cols(), 4);
    for (Index i = 0; i < theta.cols(); ++i) {
      rows(i, 0) = centers[static_cast<std::size_t>(i)].first;
      rows(i, 1) = centers[static_cast<std::size_t>(i)].second;
      rows(i, 2) = summary.mean[i];
      rows(i, 3) = summary.std_dev[i];
    }
    io::write_csv(run_dir / "posterior_mean.csv", {"x", "y", "mean", "std"}, rows);
  } else {
    Matrix rows(theta.cols(), 3);
    for (Index i = 0; i < theta.cols(); ++i) {
      rows(i, 0) = (2.0 * i + 1.0) / (2.0 * theta.cols());
      rows(i, 1) = summary.mean[i];
      rows(i, 2) = summary.std_dev[i];
    }
    io::write_csv(run_dir / "posterior_mean.csv", {"x", "mean", "std"}, rows);
  }
}

}  // namespace rto::cli
