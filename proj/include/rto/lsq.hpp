#pragma once

#include "rto/numkit.hpp"

#include <functional>

// Damped nonlinear least squares. Every mode search and every proposal
// optimization in the sampler runs through solve_lsq, so the evaluation
// counters here are the ground truth for the cost accounting.
namespace rto::lsq {

using numkit::Index;
using numkit::Matrix;
using numkit::Vector;

struct LsqProblem {
  std::function<Vector(const Vector&)> residual;  // r: R^n -> R^k, k >= n
  std::function<Matrix(const Vector&)> jacobian;  // J_r: R^n -> R^{k x n}
};

struct LsqOptions {
  int max_iterations = 400;
  double gradient_tol = 1e-10;   // on |J^T r|_inf
  double step_tol = 1e-10;       // on |dx| relative to 1 + |x|
  double residual_tol = 1e-12;   // on |r|
  double initial_damping = 1e-3;
};

enum class LsqStatus { Converged, MaxIter, Stalled };

struct LsqReport {
  Vector solution;
  LsqStatus status = LsqStatus::MaxIter;
  int iterations = 0;
  double final_residual_norm = 0.0;
  double final_gradient_norm = 0.0;
  // Set when the gradient-polish phase exhausted every damping level without
  // a measurable gradient decrease: final_gradient_norm is then the
  // attainable first-order optimality of this problem in double precision
  // (residuals evaluated through inner solves land here well above any fixed
  // tolerance). Callers treating the tolerance as an optimality certificate
  // should accept floor exits as converged-to-arithmetic.
  bool at_gradient_floor = false;
  /// a-priori estimate sqrt(eps (1+|r|^2) |J^T J|_inf) of the function-
  /// comparison floor at the solution; diagnostic only.
  double final_gradient_floor = 0.0;
  long n_residual_evals = 0;
  long n_jacobian_evals = 0;
  // Jacobian at the solution; kept because callers reuse it for the weight
  // determinant and the reference basis without re-evaluating.
  Matrix final_jacobian;
};

// Levenberg-Marquardt with the damped step taken from a QR factorization of
// the stacked system [J; sqrt(mu) I]. Damping adapts by factors of 10.
// Deterministic given its inputs. Throws NumericError if the residual is not
// finite at x0; MaxIter and Stalled are statuses, not failures.
LsqReport solve_lsq(const LsqProblem& problem, const Vector& x0, const LsqOptions& opts = {});

}  // namespace rto::lsq
