#pragma once

#include "rto/numkit.hpp"

#include <Eigen/LU>

#include <memory>

// Deterministic couplings between a standard-Gaussian reference variable u
// and a prior-distributed physical parameter theta. The scalar map g sends
// N(0,1) to Laplace(0, 1/lambda); the multivariate map composes it with the
// inverse of the prior operator D.
namespace rto::transforms {

using numkit::Index;
using numkit::Matrix;
using numkit::Vector;

// Scalar Gaussian-to-Laplace map, theta = -(1/lambda) sign(u) log(2 Phi(-|u|)).
// Odd, strictly increasing, finite and accurate for |u| up to ~37.
double g1d_forward(double u, double lambda);

// d/du of g1d_forward: phi(u) / (lambda Phi(-|u|)). Even, strictly positive.
// Uses the scaled-erfc (Mills ratio) form beyond |u| = 8.
double g1d_derivative(double u, double lambda);

// Inverse map u = Phi^{-1}(Laplace cdf(theta)), evaluated through the lower
// tail mass so the round trip stays accurate far into the tails.
double g1d_inverse(double theta, double lambda);

/// Invertible coupling of reference and physical variables with Jacobian
/// access. Immutable after construction; evaluations are pure.
class PriorTransform {
 public:
  virtual ~PriorTransform() = default;
  virtual Index dim() const = 0;
  virtual Vector forward(const Vector& u) const = 0;
  virtual Vector inverse(const Vector& theta) const = 0;
  virtual Matrix jacobian(const Vector& u) const = 0;
};

/// theta = u. Recovers plain RTO with a standard Gaussian prior.
class IdentityTransform final : public PriorTransform {
 public:
  explicit IdentityTransform(Index n) : n_(n) {}
  Index dim() const override { return n_; }
  Vector forward(const Vector& u) const override { return u; }
  Vector inverse(const Vector& theta) const override { return theta; }
  Matrix jacobian(const Vector& u) const override;

 private:
  Index n_;
};

// theta = D^{-1} g(u) with g applied componentwise. D must be invertible;
// its LU factorization is stored once and reused for every solve.
class L1PriorTransform final : public PriorTransform {
 public:
  L1PriorTransform(Matrix d, double lambda);

  Index dim() const override { return d_.rows(); }
  Vector forward(const Vector& u) const override;
  Vector inverse(const Vector& theta) const override;
  Matrix jacobian(const Vector& u) const override;

  /// Componentwise g(u) and g'(u) (the diagonal of J_g).
  Vector g_of(const Vector& u) const;
  Vector g_derivative_of(const Vector& u) const;

  /// D^{-1} b and A D^{-1} through the stored factorization.
  Vector solve_d(const Vector& b) const { return lu_.solve(b); }
  Matrix solve_d(const Matrix& b) const { return lu_.solve(b); }
  Matrix right_solve_d(const Matrix& a) const;

  const Matrix& d_matrix() const noexcept { return d_; }
  double lambda() const noexcept { return lambda_; }
  double log_abs_det_d() const noexcept { return log_abs_det_d_; }

 private:
  Matrix d_;
  double lambda_;
  Eigen::PartialPivLU<Matrix> lu_;
  double log_abs_det_d_;
};

Vector l1_map_forward(const L1PriorTransform& t, const Vector& u);
Matrix l1_map_jacobian(const L1PriorTransform& t, const Vector& u);
Vector l1_map_inverse(const L1PriorTransform& t, const Vector& theta);

// A coupling that only approximately Gaussianizes the prior. Sampling with
// such a map stays exact as long as the Metropolis weights pull back the true
// prior density through the map, which requires the extra evaluators below.
class ApproximateTransform : public PriorTransform {
 public:
  virtual double log_jacobian_det(const Vector& u) const = 0;
  /// log prior density of theta, up to an additive constant.
  virtual double prior_log_density(const Vector& theta) const = 0;
};

/// The exact l1 map wrapped as an approximate transform. Useful as a
/// reference point: the corrected weights must reproduce the exact-weight
/// chain up to an additive constant in the log weights.
class L1ExactApproximation final : public ApproximateTransform {
 public:
  explicit L1ExactApproximation(std::shared_ptr<const L1PriorTransform> base);
  Index dim() const override { return base_->dim(); }
  Vector forward(const Vector& u) const override { return base_->forward(u); }
  Vector inverse(const Vector& theta) const override { return base_->inverse(theta); }
  Matrix jacobian(const Vector& u) const override { return base_->jacobian(u); }
  double log_jacobian_det(const Vector& u) const override;
  double prior_log_density(const Vector& theta) const override;

 private:
  std::shared_ptr<const L1PriorTransform> base_;
};

/// Deliberately perturbed map T_hat(u) = T(scale * u). Ships as the stock
/// test instance for the corrected-weight machinery.
class ScaledInputTransform final : public ApproximateTransform {
 public:
  ScaledInputTransform(std::shared_ptr<const L1PriorTransform> base, double input_scale);
  Index dim() const override { return base_->dim(); }
  Vector forward(const Vector& u) const override;
  Vector inverse(const Vector& theta) const override;
  Matrix jacobian(const Vector& u) const override;
  double log_jacobian_det(const Vector& u) const override;
  double prior_log_density(const Vector& theta) const override;

 private:
  std::shared_ptr<const L1PriorTransform> base_;
  double scale_;
};

// Log Metropolis weight for RTO with an approximate prior transformation:
//   log w = -logdet_qtjf - residual_norm_sq/2 + projected_norm_sq/2
//           + log|J_That(u)| + log p_theta(That(u)),
// where residual_norm_sq = |f_hat(u) - y_tilde|^2 (whitened data misfit only)
// and projected_norm_sq = |Qbar^T F_hat(u)|^2. Throws if the prior density is
// not finite at That(u).
double approx_pullback_log_weight(const ApproximateTransform& a, const Vector& u,
                                  double residual_norm_sq, double projected_norm_sq,
                                  double logdet_qtjf);

}  // namespace rto::transforms
