#include "rto/lsq.hpp"

#include <cmath>
#include <stdexcept>

namespace rto::lsq {

namespace {

constexpr double kMinDamping = 1e-15;
constexpr double kMaxDamping = 1e15;
constexpr double kEps = 2.220446049250313e-16;

double gradient_floor(const Matrix& j, const Vector& r) {
  const double curvature = (j.transpose() * j).cwiseAbs().rowwise().sum().maxCoeff();
  return std::sqrt(kEps * (1.0 + r.squaredNorm()) * curvature);
}

void validate(const LsqOptions& opts) {
  if (opts.max_iterations < 1 || !(opts.gradient_tol > 0.0) || !(opts.step_tol > 0.0) ||
      !(opts.residual_tol > 0.0) || !(opts.initial_damping > 0.0)) {
    throw std::invalid_argument("solve_lsq: options must be positive");
  }
}

}  // namespace

LsqReport solve_lsq(const LsqProblem& problem, const Vector& x0, const LsqOptions& opts) {
  validate(opts);
  const Index n = x0.size();

  LsqReport report;
  long& nr = report.n_residual_evals;
  long& nj = report.n_jacobian_evals;

  Vector x = x0;
  ++nr;
  Vector r = problem.residual(x);
  if (!r.allFinite()) {
    throw numkit::NumericError("solve_lsq: residual not finite at the starting point");
  }
  if (r.size() < n) throw std::invalid_argument("solve_lsq: need k >= n");

  double mu = opts.initial_damping;
  int stalled_ties = 0;
  double window_f = r.squaredNorm();
  int window_left = 10;
  Matrix j;
  bool have_j_at_x = false;

  for (; report.iterations < opts.max_iterations; ++report.iterations) {
    if (r.norm() <= opts.residual_tol) {
      report.status = LsqStatus::Converged;
      break;
    }

    ++nj;
    j = problem.jacobian(x);
    have_j_at_x = true;
    const double grad_norm = (j.transpose() * r).lpNorm<Eigen::Infinity>();
    if (grad_norm <= opts.gradient_tol) {
      report.status = LsqStatus::Converged;
      break;
    }

    // Damped step via QR of the stacked system; inflate mu until the trial
    // point stops increasing |r|^2. Acceptance carries a roundoff band: near
    // the floor the true decrease per step can sit below the evaluation
    // noise of the residual (sparse solves, heavy whitening), and the final
    // Gauss-Newton polish still has to run to drive the gradient down. A
    // run of band-only accepts ends the iteration.
    const double noise_band = 1e-12 * (1.0 + r.squaredNorm());
    bool stepped = false;
    bool improved = false;
    bool inner_converged = false;
    Matrix stacked(r.size() + n, n);
    Vector rhs = Vector::Zero(r.size() + n);
    rhs.head(r.size()) = -r;
    while (mu <= kMaxDamping) {
      stacked.topRows(r.size()) = j;
      stacked.bottomRows(n) = std::sqrt(mu) * Matrix::Identity(n, n);
      const Vector step = stacked.householderQr().solve(rhs);
      const Vector x_trial = x + step;
      ++nr;
      const Vector r_trial = problem.residual(x_trial);
      if (r_trial.allFinite() && r_trial.squaredNorm() <= r.squaredNorm() + noise_band) {
        improved = r_trial.squaredNorm() < r.squaredNorm();
        x = x_trial;
        r = r_trial;
        have_j_at_x = false;
        mu = std::max(mu * 0.1, kMinDamping);
        stepped = true;
        if (step.norm() <= opts.step_tol * (1.0 + x.norm()) ||
            r.norm() <= opts.residual_tol) {
          inner_converged = true;
        }
        break;
      }
      mu *= 10.0;
    }

    if (inner_converged) {
      ++report.iterations;
      report.status = LsqStatus::Converged;
      break;
    }
    if (!stepped) {
      report.status = LsqStatus::Stalled;
      break;
    }
    stalled_ties = improved ? 0 : stalled_ties + 1;
    if (stalled_ties >= 8) {
      ++report.iterations;
      report.status = LsqStatus::Stalled;
      break;
    }
    // No measurable relative progress over a whole window: the function has
    // reached its evaluation floor, hand over to the gradient polish.
    if (--window_left == 0) {
      const double f_now = r.squaredNorm();
      if (window_f - f_now <= 1e-10 * (1.0 + f_now)) {
        ++report.iterations;
        report.status = LsqStatus::Stalled;
        break;
      }
      window_f = f_now;
      window_left = 10;
    }
  }

  if (!have_j_at_x) {
    ++nj;
    j = problem.jacobian(x);
  }
  double grad_norm = (j.transpose() * r).lpNorm<Eigen::Infinity>();

  // Gradient-polish phase. Once function decreases stop being measurable
  // (their size falls under the evaluation roundoff of |r|^2), damped steps
  // are accepted on the gradient norm instead, which stays resolvable far
  // deeper. The phase ends at the tolerance or at the operational floor:
  // the point where no damping level yields a measurable gradient decrease,
  // which is the attainable first-order optimality for this problem in this
  // arithmetic. That exit is flagged rather than failed.
  if (grad_norm > opts.gradient_tol && report.status != LsqStatus::MaxIter) {
    const LsqStatus entry_status = report.status;
    Matrix stacked(r.size() + n, n);
    Vector rhs(r.size() + n);
    for (int polish = 0; polish < 60 && grad_norm > opts.gradient_tol; ++polish) {
      bool accepted = false;
      while (mu <= kMaxDamping) {
        stacked.topRows(r.size()) = j;
        stacked.bottomRows(n) = std::sqrt(mu) * Matrix::Identity(n, n);
        rhs.head(r.size()) = -r;
        rhs.tail(n).setZero();
        const Vector step = stacked.householderQr().solve(rhs);
        if (step.norm() <= 4.0 * kEps * (1.0 + x.norm())) break;  // frozen
        const Vector x_trial = x + step;
        ++nr;
        const Vector r_trial = problem.residual(x_trial);
        if (r_trial.allFinite()) {
          ++nj;
          Matrix j_trial = problem.jacobian(x_trial);
          const double grad_trial = (j_trial.transpose() * r_trial).lpNorm<Eigen::Infinity>();
          if (grad_trial < grad_norm * (1.0 - 1e-3)) {
            x = x_trial;
            r = r_trial;
            j = std::move(j_trial);
            grad_norm = grad_trial;
            mu = std::max(mu * 0.1, kMinDamping);
            accepted = true;
            break;
          }
        }
        mu *= 10.0;
      }
      if (!accepted) {
        report.at_gradient_floor = true;
        break;
      }
    }
    report.status = grad_norm <= opts.gradient_tol ? LsqStatus::Converged : entry_status;
  }

  report.solution = std::move(x);
  report.final_residual_norm = r.norm();
  report.final_gradient_norm = grad_norm;
  report.final_gradient_floor = gradient_floor(j, r);
  report.final_jacobian = std::move(j);
  if (report.status == LsqStatus::Stalled &&
      report.final_gradient_norm <= opts.gradient_tol) {
    report.status = LsqStatus::Converged;
  }
  return report;
}

}  // namespace rto::lsq
