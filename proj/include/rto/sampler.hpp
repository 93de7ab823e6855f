#pragma once

#include "rto/lsq.hpp"
#include "rto/models.hpp"
#include "rto/transforms.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

// The RTO-MH engine: whitened stacked residual, mode finding, reference
// basis, parallel proposal optimizations, log weights, and the serial
// Metropolis pass. Proposal i always draws from RNG stream id i (the
// Metropolis pass owns stream id 0), so chains are bit-identical for a fixed
// seed at any parallelism level.
namespace rto::sampler {

using numkit::Index;
using numkit::Matrix;
using numkit::Vector;

// Frozen sampling context. The residual closures capture the model and
// transform by pointer; both must outlive the context.
struct RtoContext {
  Index n_params = 0;
  Index n_obs = 0;
  std::function<Vector(const Vector&)> whitened_residual;  // [u; W(f(T(u)) - y)]
  std::function<Matrix(const Vector&)> residual_jacobian;  // [I; W J_f J_T]
  Vector mode;
  Matrix reference_basis;  // orthonormal columns spanning col J(mode)
  bool has_mode = false;
  bool has_basis = false;
  lsq::LsqReport mode_report;
};

// Wires the stacked residual and its Jacobian. Gamma_obs must be symmetric
// positive definite; whitening uses its symmetric inverse square root
// (componentwise when diagonal). Linear models with the l1 transform get a
// precomputed W A D^{-1} fast path.
RtoContext build_context(const models::ForwardModel& model,
                         const transforms::PriorTransform& transform, const Vector& y,
                         const Matrix& gamma_obs);

// Solver profiles for the two optimization roles. Both stop on the 1e-8
// projected-gradient optimality the proposal density requires; the step
// tolerance is kept far below the solver defaults because the whitened
// problems have curvatures around 1/sigma^2, where a lax step test would
// fire long before the gradient target.
lsq::LsqOptions mode_solver_defaults();
lsq::LsqOptions proposal_solver_defaults();

// Minimizes |F(u)|^2/2 from u = 0 and stores the mode and its solver report
// in the context. Throws NumericError when the optimizer cannot reach the
// required first-order optimality.
void find_mode(RtoContext& ctx, const lsq::LsqOptions& opts = mode_solver_defaults());

/// Thin QR basis of the residual Jacobian at the mode (reuses the mode
/// report's final Jacobian, so it costs no extra evaluations).
void compute_reference_basis(RtoContext& ctx);

struct WeightTerms {
  double logdet_projected_jacobian = 0.0;  // log |Qbar^T J(u)|
  double full_norm_sq = 0.0;               // |F(u)|^2
  double projected_norm_sq = 0.0;          // |Qbar^T F(u)|^2
  double data_misfit_sq = 0.0;             // |F(u) tail block|^2
  double min_singular_value = 0.0;         // sigma_min(Qbar^T J(u))
};

/// Fresh evaluation of every quantity entering a weight at u.
WeightTerms weight_terms(const RtoContext& ctx, const Vector& u);

// log w(u) = -log|Qbar^T J(u)| - |F(u)|^2/2 + |Qbar^T F(u)|^2/2. Throws
// SingularMatrixError when Qbar^T J(u) is singular (a violated proposal
// density assumption). Optionally reports sigma_min(Qbar^T J(u)).
double rto_log_weight(const RtoContext& ctx, const Vector& u, double* min_sv = nullptr);

struct Proposal {
  Vector u;
  double log_weight = -std::numeric_limits<double>::infinity();
  bool valid = false;
  lsq::LsqReport report;
  double min_singular_value = std::numeric_limits<double>::quiet_NaN();
};

// Solves argmin_u |Qbar^T F(u) - xi|^2 started at the mode. The proposal is
// valid when the projected gradient at the solution is below
// `optimality_tol`; anything else is flagged for auto-rejection, never
// retried.
Proposal rto_propose(const RtoContext& ctx, const Vector& xi,
                     const lsq::LsqOptions& opts = proposal_solver_defaults(),
                     double optimality_tol = 1e-8);

struct Chain {
  std::vector<Vector> states;       // u^{(i)}, i = 1..n_samps
  std::vector<double> log_weights;  // log w of the current state
  std::vector<char> accepted;
  long n_function_evals = 0;
  long n_jacobian_evals = 0;
  std::uint64_t seed = 0;

  double acceptance_rate() const;
};

// Serial independence-MH pass over precomputed proposals, started from
// `start` (the mode). Invalid proposals are auto-rejected. One uniform is
// consumed per proposal regardless of the outcome. Throws if no proposal is
// valid.
Chain metropolize(const std::vector<Vector>& proposals, const std::vector<double>& log_weights,
                  const std::vector<char>& valid, const Vector& start, double start_log_weight,
                  numkit::RngStream& stream);

struct AssumptionAudit {
  double min_sv_stacked = std::numeric_limits<double>::infinity();    // J(u), rank condition
  double min_sv_projected = std::numeric_limits<double>::infinity();  // Qbar^T J(u)
  long n_states_checked = 0;
  long n_flagged = 0;  // states with either value below the threshold
  double threshold = 1e-10;
};

/// Re-evaluates the Jacobian at every distinct visited state and reports the
/// minimum singular values backing the proposal-density conditions.
AssumptionAudit verify_assumptions(const RtoContext& ctx, const Chain& chain);

struct ProposalStats {
  int iterations = 0;
  long n_residual_evals = 0;
  long n_jacobian_evals = 0;
  bool valid = false;
  double final_gradient_norm = 0.0;
};

struct RtoOptions {
  lsq::LsqOptions solver = proposal_solver_defaults();
  lsq::LsqOptions mode_solver = mode_solver_defaults();
  double proposal_optimality_tol = 1e-8;
  bool audit_assumptions = true;
};

struct RunResult {
  Chain chain;           // reference-space states
  Matrix theta_samples;  // n_samps x n, pushforward through the transform
  std::vector<ProposalStats> proposal_stats;
  long n_invalid_proposals = 0;
  double min_proposal_sv = std::numeric_limits<double>::infinity();
  AssumptionAudit audit;
  RtoContext context;
};

// Full pipeline: context -> mode -> basis -> parallel proposals -> serial
// Metropolis -> theta pushforward. Chain counters are exactly the mode
// report's counters plus the per-proposal solver counters.
RunResult run_rto_mh(const models::ForwardModel& model,
                     const transforms::PriorTransform& transform, const Vector& y,
                     const Matrix& gamma_obs, long n_samps, std::uint64_t seed,
                     int parallelism, const RtoOptions& options = {});

// Same pipeline for an approximate prior transformation. With
// `pullback_correction` the Metropolis weights pull the true prior back
// through the map (exact sampling for any invertible C^1 map); without it the
// exact-transform formula is applied verbatim, which is biased unless the map
// is exact.
RunResult run_rto_mh_approx(const models::ForwardModel& model,
                            const transforms::ApproximateTransform& transform, const Vector& y,
                            const Matrix& gamma_obs, long n_samps, std::uint64_t seed,
                            int parallelism, bool pullback_correction,
                            const RtoOptions& options = {});

// Gaussian random-walk Metropolis with isotropic steps; the cross-validation
// baseline. Stores every `thin`-th state. Function-evaluation counter equals
// the number of log-density calls.
Chain rwm_baseline(const std::function<double(const Vector&)>& log_density, const Vector& x0,
                   double step_scale, long n_steps, std::uint64_t seed, long thin = 1);

}  // namespace rto::sampler
