#include "rto/sampler.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <exception>
#include <stdexcept>
#include <thread>

namespace rto::sampler {

namespace {

constexpr std::uint64_t kMetropolisStream = 0;

Matrix symmetric_inverse_sqrt(const Matrix& gamma) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gamma);
  if (eig.info() != Eigen::Success) {
    throw numkit::NumericError("build_context: eigendecomposition of Gamma_obs failed");
  }
  if (eig.eigenvalues().minCoeff() <= 0.0) {
    throw numkit::NumericError("build_context: Gamma_obs is not positive definite");
  }
  return eig.eigenvectors() *
         eig.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal() *
         eig.eigenvectors().transpose();
}

bool is_diagonal(const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (i != j && m(i, j) != 0.0) return false;
    }
  }
  return true;
}

}  // namespace

RtoContext build_context(const models::ForwardModel& model,
                         const transforms::PriorTransform& transform, const Vector& y,
                         const Matrix& gamma_obs) {
  const Index n = model.dim_theta();
  const Index m = model.dim_obs();
  if (transform.dim() != n) {
    throw std::invalid_argument("build_context: transform/model dimension mismatch");
  }
  if (y.size() != m) throw std::invalid_argument("build_context: data dimension mismatch");
  if (gamma_obs.rows() != m || gamma_obs.cols() != m) {
    throw std::invalid_argument("build_context: Gamma_obs must be m x m");
  }
  if (!gamma_obs.isApprox(gamma_obs.transpose())) {
    throw numkit::NumericError("build_context: Gamma_obs must be symmetric");
  }

  // Whitening: componentwise for diagonal covariances, symmetric inverse
  // square root otherwise.
  Vector diag_whitener;
  Matrix dense_whitener;
  const bool diagonal = is_diagonal(gamma_obs);
  if (diagonal) {
    if (m > 0 && gamma_obs.diagonal().minCoeff() <= 0.0) {
      throw numkit::NumericError("build_context: Gamma_obs is not positive definite");
    }
    diag_whitener = gamma_obs.diagonal().cwiseSqrt().cwiseInverse();
  } else {
    dense_whitener = symmetric_inverse_sqrt(gamma_obs);
  }
  auto whiten_vec = [diagonal, diag_whitener, dense_whitener](const Vector& v) -> Vector {
    return diagonal ? Vector(diag_whitener.asDiagonal() * v) : Vector(dense_whitener * v);
  };
  auto whiten_mat = [diagonal, diag_whitener, dense_whitener](const Matrix& v) -> Matrix {
    return diagonal ? Matrix(diag_whitener.asDiagonal() * v) : Matrix(dense_whitener * v);
  };
  const Vector y_white = m > 0 ? whiten_vec(y) : Vector(0);

  RtoContext ctx;
  ctx.n_params = n;
  ctx.n_obs = m;

  const auto* l1 = dynamic_cast<const transforms::L1PriorTransform*>(&transform);
  if (model.is_linear() && l1 != nullptr) {
    // Linear model + l1 transform: F(u) = [u; G g(u) - y~] with the constant
    // factor G = W A D^{-1} assembled once.
    const Matrix g_mat = whiten_mat(l1->right_solve_d(model.jacobian(Vector::Zero(n))));
    ctx.whitened_residual = [n, m, g_mat, y_white, l1](const Vector& u) {
      Vector out(n + m);
      out.head(n) = u;
      out.tail(m) = g_mat * l1->g_of(u) - y_white;
      return out;
    };
    ctx.residual_jacobian = [n, m, g_mat, l1](const Vector& u) {
      Matrix out(n + m, n);
      out.topRows(n) = Matrix::Identity(n, n);
      out.bottomRows(m) = g_mat * l1->g_derivative_of(u).asDiagonal();
      return out;
    };
    return ctx;
  }

  const auto* model_ptr = &model;
  const auto* transform_ptr = &transform;
  ctx.whitened_residual = [n, m, model_ptr, transform_ptr, whiten_vec, y_white](const Vector& u) {
    Vector out(n + m);
    out.head(n) = u;
    if (m > 0) {
      out.tail(m) = whiten_vec(model_ptr->evaluate(transform_ptr->forward(u))) - y_white;
    }
    return out;
  };
  ctx.residual_jacobian = [n, m, model_ptr, transform_ptr, whiten_mat](const Vector& u) {
    Matrix out(n + m, n);
    out.topRows(n) = Matrix::Identity(n, n);
    if (m > 0) {
      const Vector theta = transform_ptr->forward(u);
      out.bottomRows(m) =
          whiten_mat(model_ptr->jacobian(theta) * transform_ptr->jacobian(u));
    }
    return out;
  };
  return ctx;
}

lsq::LsqOptions mode_solver_defaults() {
  lsq::LsqOptions opts;
  opts.gradient_tol = 1e-8;
  opts.step_tol = 1e-14;
  opts.residual_tol = 1e-15;
  opts.max_iterations = 800;
  return opts;
}

lsq::LsqOptions proposal_solver_defaults() {
  lsq::LsqOptions opts;
  opts.gradient_tol = 1e-8;
  opts.step_tol = 1e-14;
  return opts;
}

void find_mode(RtoContext& ctx, const lsq::LsqOptions& opts) {
  if (!ctx.whitened_residual) throw std::logic_error("find_mode: context not built");
  lsq::LsqProblem problem{ctx.whitened_residual, ctx.residual_jacobian};
  lsq::LsqReport report = lsq::solve_lsq(problem, Vector::Zero(ctx.n_params), opts);
  if (report.final_gradient_norm > 1e-8 && !report.at_gradient_floor) {
    throw numkit::NumericError(
        "find_mode: optimizer did not reach first-order optimality (status " +
        std::to_string(static_cast<int>(report.status)) + ", iterations " +
        std::to_string(report.iterations) + ", |grad| = " +
        std::to_string(report.final_gradient_norm) + ")");
  }
  ctx.mode = report.solution;
  ctx.mode_report = std::move(report);
  ctx.has_mode = true;
}

void compute_reference_basis(RtoContext& ctx) {
  if (!ctx.has_mode) throw std::logic_error("compute_reference_basis: mode not set");
  numkit::ThinQr qr = numkit::thin_qr(ctx.mode_report.final_jacobian);
  ctx.reference_basis = std::move(qr.q);
  ctx.has_basis = true;
}

WeightTerms weight_terms(const RtoContext& ctx, const Vector& u) {
  if (!ctx.has_basis) throw std::logic_error("weight_terms: reference basis not set");
  const Vector full = ctx.whitened_residual(u);
  const Matrix projected_jacobian = ctx.reference_basis.transpose() * ctx.residual_jacobian(u);
  WeightTerms terms;
  terms.logdet_projected_jacobian = numkit::log_abs_det_qr(projected_jacobian);
  terms.full_norm_sq = full.squaredNorm();
  terms.projected_norm_sq = (ctx.reference_basis.transpose() * full).squaredNorm();
  terms.data_misfit_sq = full.tail(ctx.n_obs).squaredNorm();
  terms.min_singular_value = numkit::smallest_singular_value(projected_jacobian);
  return terms;
}

double rto_log_weight(const RtoContext& ctx, const Vector& u, double* min_sv) {
  const WeightTerms terms = weight_terms(ctx, u);
  if (min_sv != nullptr) *min_sv = terms.min_singular_value;
  return -terms.logdet_projected_jacobian - 0.5 * terms.full_norm_sq +
         0.5 * terms.projected_norm_sq;
}

Proposal rto_propose(const RtoContext& ctx, const Vector& xi, const lsq::LsqOptions& opts,
                     double optimality_tol) {
  if (!ctx.has_basis) throw std::logic_error("rto_propose: reference basis not set");
  if (xi.size() != ctx.n_params) throw std::invalid_argument("rto_propose: xi must have length n");

  lsq::LsqProblem projected;
  projected.residual = [&ctx, &xi](const Vector& u) -> Vector {
    return ctx.reference_basis.transpose() * ctx.whitened_residual(u) - xi;
  };
  projected.jacobian = [&ctx](const Vector& u) -> Matrix {
    return ctx.reference_basis.transpose() * ctx.residual_jacobian(u);
  };

  Proposal prop;
  prop.report = lsq::solve_lsq(projected, ctx.mode, opts);
  prop.u = prop.report.solution;
  prop.valid = (prop.report.final_gradient_norm <= optimality_tol ||
                prop.report.at_gradient_floor) &&
               prop.u.allFinite();
  return prop;
}

double Chain::acceptance_rate() const {
  if (accepted.empty()) return 0.0;
  long n_acc = 0;
  for (char a : accepted) n_acc += a ? 1 : 0;
  return static_cast<double>(n_acc) / static_cast<double>(accepted.size());
}

Chain metropolize(const std::vector<Vector>& proposals, const std::vector<double>& log_weights,
                  const std::vector<char>& valid, const Vector& start, double start_log_weight,
                  numkit::RngStream& stream) {
  const std::size_t n = proposals.size();
  if (log_weights.size() != n || valid.size() != n) {
    throw std::invalid_argument("metropolize: input lengths differ");
  }
  bool any_valid = false;
  for (char v : valid) any_valid |= (v != 0);
  if (!any_valid) {
    throw numkit::NumericError("metropolize: every proposal failed its optimization");
  }

  Chain chain;
  chain.states.reserve(n);
  chain.log_weights.reserve(n);
  chain.accepted.reserve(n);

  Vector current = start;
  double current_lw = start_log_weight;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = stream.uniform();  // consumed even for auto-rejections
    bool accept = false;
    if (valid[i]) {
      accept = std::log(v) < log_weights[i] - current_lw;
    }
    if (accept) {
      current = proposals[i];
      current_lw = log_weights[i];
    }
    chain.states.push_back(current);
    chain.log_weights.push_back(current_lw);
    chain.accepted.push_back(accept ? 1 : 0);
  }
  return chain;
}

AssumptionAudit verify_assumptions(const RtoContext& ctx, const Chain& chain) {
  AssumptionAudit audit;
  const Vector* prev = nullptr;
  for (const Vector& u : chain.states) {
    if (prev != nullptr && u == *prev) continue;
    prev = &u;
    const Matrix j = ctx.residual_jacobian(u);
    const double sv_stacked = numkit::smallest_singular_value(j);
    const double sv_projected =
        numkit::smallest_singular_value(Matrix(ctx.reference_basis.transpose() * j));
    audit.min_sv_stacked = std::min(audit.min_sv_stacked, sv_stacked);
    audit.min_sv_projected = std::min(audit.min_sv_projected, sv_projected);
    if (sv_stacked < audit.threshold || sv_projected < audit.threshold) ++audit.n_flagged;
    ++audit.n_states_checked;
  }
  return audit;
}

namespace {

enum class WeightMode { Exact, PullbackCorrected };

Proposal propose_and_weigh(const RtoContext& ctx, const Vector& xi, const RtoOptions& options,
                           WeightMode mode, const transforms::ApproximateTransform* approx) {
  // The solver's last accepted evaluation is the proposal point, so its full
  // residual can be reused for the weight; a cache on the projection closure
  // avoids a second model evaluation.
  Vector cached_u;
  Vector cached_full;

  lsq::LsqProblem projected;
  projected.residual = [&ctx, &xi, &cached_u, &cached_full](const Vector& u) -> Vector {
    cached_full = ctx.whitened_residual(u);
    cached_u = u;
    return ctx.reference_basis.transpose() * cached_full - xi;
  };
  projected.jacobian = [&ctx](const Vector& u) -> Matrix {
    return ctx.reference_basis.transpose() * ctx.residual_jacobian(u);
  };

  Proposal prop;
  prop.report = lsq::solve_lsq(projected, ctx.mode, options.solver);
  prop.u = prop.report.solution;
  prop.valid = (prop.report.final_gradient_norm <= options.proposal_optimality_tol ||
                prop.report.at_gradient_floor) &&
               prop.u.allFinite();
  if (!prop.valid) return prop;

  const Vector full =
      (cached_u.size() == prop.u.size() && cached_u == prop.u) ? cached_full
                                                               : ctx.whitened_residual(prop.u);
  const Matrix& projected_jacobian = prop.report.final_jacobian;
  try {
    const double logdet = numkit::log_abs_det_qr(projected_jacobian);
    const double projected_sq = (ctx.reference_basis.transpose() * full).squaredNorm();
    prop.min_singular_value = numkit::smallest_singular_value(projected_jacobian);
    if (mode == WeightMode::Exact) {
      prop.log_weight = -logdet - 0.5 * full.squaredNorm() + 0.5 * projected_sq;
    } else {
      prop.log_weight = transforms::approx_pullback_log_weight(
          *approx, prop.u, full.tail(ctx.n_obs).squaredNorm(), projected_sq, logdet);
    }
    prop.valid = std::isfinite(prop.log_weight);
  } catch (const numkit::SingularMatrixError&) {
    prop.valid = false;  // violated proposal-density assumption; auto-reject
  }
  return prop;
}

RunResult run_pipeline(const models::ForwardModel& model,
                       const transforms::PriorTransform& transform, const Vector& y,
                       const Matrix& gamma_obs, long n_samps, std::uint64_t seed,
                       int parallelism, const RtoOptions& options, WeightMode mode,
                       const transforms::ApproximateTransform* approx) {
  if (n_samps < 1) throw std::invalid_argument("run_rto_mh: n_samps must be >= 1");

  RunResult result;
  result.context = build_context(model, transform, y, gamma_obs);
  RtoContext& ctx = result.context;
  find_mode(ctx, options.mode_solver);
  compute_reference_basis(ctx);

  double start_lw;
  if (mode == WeightMode::Exact) {
    start_lw = rto_log_weight(ctx, ctx.mode);
  } else {
    const WeightTerms terms = weight_terms(ctx, ctx.mode);
    start_lw = transforms::approx_pullback_log_weight(*approx, ctx.mode, terms.data_misfit_sq,
                                                      terms.projected_norm_sq,
                                                      terms.logdet_projected_jacobian);
  }

  std::vector<Proposal> proposals(static_cast<std::size_t>(n_samps));
  const int n_workers = static_cast<int>(
      std::min<long>(std::max(parallelism, 1), n_samps));
  auto worker = [&](long first, long past) {
    for (long i = first; i < past; ++i) {
      numkit::RngStream stream(seed, static_cast<std::uint64_t>(i) + 1);
      const Vector xi = numkit::standard_normal(stream, ctx.n_params);
      proposals[static_cast<std::size_t>(i)] =
          propose_and_weigh(ctx, xi, options, mode, approx);
    }
  };
  if (n_workers <= 1) {
    worker(0, n_samps);
  } else {
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_workers));
    const long block = (n_samps + n_workers - 1) / n_workers;
    for (int w = 0; w < n_workers; ++w) {
      threads.emplace_back([&, w]() {
        try {
          worker(w * block, std::min<long>((w + 1) * block, n_samps));
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (const auto& err : errors) {
      if (err) std::rethrow_exception(err);
    }
  }

  std::vector<Vector> points;
  std::vector<double> weights;
  std::vector<char> valid;
  points.reserve(proposals.size());
  for (const Proposal& p : proposals) {
    points.push_back(p.u);
    weights.push_back(p.log_weight);
    valid.push_back(p.valid ? 1 : 0);
    result.proposal_stats.push_back({p.report.iterations, p.report.n_residual_evals,
                                     p.report.n_jacobian_evals, p.valid,
                                     p.report.final_gradient_norm});
    if (!p.valid) ++result.n_invalid_proposals;
    if (p.valid) result.min_proposal_sv = std::min(result.min_proposal_sv, p.min_singular_value);
  }

  numkit::RngStream metro_stream(seed, kMetropolisStream);
  result.chain = metropolize(points, weights, valid, ctx.mode, start_lw, metro_stream);
  result.chain.seed = seed;
  result.chain.n_function_evals = ctx.mode_report.n_residual_evals;
  result.chain.n_jacobian_evals = ctx.mode_report.n_jacobian_evals;
  for (const ProposalStats& s : result.proposal_stats) {
    result.chain.n_function_evals += s.n_residual_evals;
    result.chain.n_jacobian_evals += s.n_jacobian_evals;
  }

  result.theta_samples.resize(n_samps, ctx.n_params);
  for (long i = 0; i < n_samps; ++i) {
    if (i > 0 && !result.chain.accepted[static_cast<std::size_t>(i)]) {
      result.theta_samples.row(i) = result.theta_samples.row(i - 1);
    } else {
      result.theta_samples.row(i) =
          transform.forward(result.chain.states[static_cast<std::size_t>(i)]).transpose();
    }
  }

  if (options.audit_assumptions) {
    result.audit = verify_assumptions(ctx, result.chain);
  }
  return result;
}

}  // namespace

RunResult run_rto_mh(const models::ForwardModel& model,
                     const transforms::PriorTransform& transform, const Vector& y,
                     const Matrix& gamma_obs, long n_samps, std::uint64_t seed,
                     int parallelism, const RtoOptions& options) {
  return run_pipeline(model, transform, y, gamma_obs, n_samps, seed, parallelism, options,
                      WeightMode::Exact, nullptr);
}

RunResult run_rto_mh_approx(const models::ForwardModel& model,
                            const transforms::ApproximateTransform& transform, const Vector& y,
                            const Matrix& gamma_obs, long n_samps, std::uint64_t seed,
                            int parallelism, bool pullback_correction, const RtoOptions& options) {
  return run_pipeline(model, transform, y, gamma_obs, n_samps, seed, parallelism, options,
                      pullback_correction ? WeightMode::PullbackCorrected : WeightMode::Exact,
                      &transform);
}

Chain rwm_baseline(const std::function<double(const Vector&)>& log_density, const Vector& x0,
                   double step_scale, long n_steps, std::uint64_t seed, long thin) {
  if (n_steps < 1 || thin < 1) {
    throw std::invalid_argument("rwm_baseline: n_steps and thin must be >= 1");
  }
  double lp = log_density(x0);
  if (!std::isfinite(lp)) {
    throw numkit::NumericError("rwm_baseline: log density not finite at the start");
  }

  Chain chain;
  chain.seed = seed;
  chain.n_function_evals = 1;
  chain.states.reserve(static_cast<std::size_t>(n_steps / thin));

  numkit::RngStream noise(seed, 1);
  numkit::RngStream accept_stream(seed, kMetropolisStream);
  Vector x = x0;
  for (long step = 1; step <= n_steps; ++step) {
    const Vector prop = x + step_scale * numkit::standard_normal(noise, x.size());
    const double lp_prop = log_density(prop);
    ++chain.n_function_evals;
    const bool accept = std::log(accept_stream.uniform()) < lp_prop - lp;
    if (accept) {
      x = prop;
      lp = lp_prop;
    }
    if (step % thin == 0) {
      chain.states.push_back(x);
      chain.log_weights.push_back(lp);
      chain.accepted.push_back(accept ? 1 : 0);
    }
  }
  return chain;
}

}  // namespace rto::sampler
