#include "rto/transforms.hpp"

#include <cmath>

namespace rto::transforms {

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kSqrt2OverPi = 0.79788456080286535588;
constexpr double kTailSwitch = 8.0;

void require_positive_lambda(double lambda) {
  if (!(lambda > 0.0)) {
    throw std::invalid_argument("prior transform: lambda must be positive");
  }
}

// log(2 Phi(-a)) = log erfc(a / sqrt 2) for a >= 0, stable over the whole
// double range: log1p form near zero, direct erfc in the bulk, and the
// scaled-erfc log-space form past the switch point where erfc would start
// losing headroom.
double log_two_phi_neg(double a) {
  const double x = a * kInvSqrt2;
  if (a <= 0.5) return std::log1p(-std::erf(x));
  if (a <= kTailSwitch) return std::log(std::erfc(x));
  return std::log(numkit::erfcx(x)) - x * x;
}

}  // namespace

double g1d_forward(double u, double lambda) {
  require_positive_lambda(lambda);
  if (!std::isfinite(u)) throw numkit::NumericError("g1d_forward: non-finite input");
  if (u == 0.0) return 0.0;
  const double sign = u > 0.0 ? 1.0 : -1.0;
  return -(sign / lambda) * log_two_phi_neg(std::abs(u));
}

double g1d_derivative(double u, double lambda) {
  require_positive_lambda(lambda);
  if (!std::isfinite(u)) throw numkit::NumericError("g1d_derivative: non-finite input");
  const double a = std::abs(u);
  if (a <= kTailSwitch) {
    return numkit::normal_pdf(u) / (lambda * 0.5 * std::erfc(a * kInvSqrt2));
  }
  return kSqrt2OverPi / (lambda * numkit::erfcx(a * kInvSqrt2));
}

double g1d_inverse(double theta, double lambda) {
  require_positive_lambda(lambda);
  if (!std::isfinite(theta)) throw numkit::NumericError("g1d_inverse: non-finite input");
  if (theta == 0.0) return 0.0;
  // Lower-tail mass of the Laplace law at -|theta|; always in (0, 1/2).
  const double q = 0.5 * std::exp(-lambda * std::abs(theta));
  const double sign = theta > 0.0 ? 1.0 : -1.0;
  return -sign * numkit::inverse_normal_cdf(q);
}

Matrix IdentityTransform::jacobian(const Vector& u) const {
  return Matrix::Identity(u.size(), u.size());
}

L1PriorTransform::L1PriorTransform(Matrix d, double lambda)
    : d_(std::move(d)), lambda_(lambda) {
  require_positive_lambda(lambda_);
  if (d_.rows() != d_.cols() || d_.rows() < 1) {
    throw std::invalid_argument("L1PriorTransform: D must be square");
  }
  if (numkit::smallest_singular_value(d_) <= 1e-14 * d_.cwiseAbs().maxCoeff()) {
    throw numkit::SingularMatrixError("L1PriorTransform: D is singular");
  }
  lu_.compute(d_);
  log_abs_det_d_ = numkit::log_abs_det_qr(d_);
}

Vector L1PriorTransform::g_of(const Vector& u) const {
  Vector g(u.size());
  for (Index i = 0; i < u.size(); ++i) g[i] = g1d_forward(u[i], lambda_);
  return g;
}

Vector L1PriorTransform::g_derivative_of(const Vector& u) const {
  Vector g(u.size());
  for (Index i = 0; i < u.size(); ++i) g[i] = g1d_derivative(u[i], lambda_);
  return g;
}

Vector L1PriorTransform::forward(const Vector& u) const { return lu_.solve(g_of(u)); }

Vector L1PriorTransform::inverse(const Vector& theta) const {
  const Vector dtheta = d_ * theta;
  Vector u(theta.size());
  for (Index i = 0; i < theta.size(); ++i) u[i] = g1d_inverse(dtheta[i], lambda_);
  return u;
}

Matrix L1PriorTransform::jacobian(const Vector& u) const {
  Matrix jg = Matrix::Zero(u.size(), u.size());
  jg.diagonal() = g_derivative_of(u);
  return lu_.solve(jg);
}

Matrix L1PriorTransform::right_solve_d(const Matrix& a) const {
  // A D^{-1} = (D^{-T} A^T)^T
  const Matrix solved = lu_.transpose().solve(Matrix(a.transpose()));
  return solved.transpose();
}

Vector l1_map_forward(const L1PriorTransform& t, const Vector& u) { return t.forward(u); }
Matrix l1_map_jacobian(const L1PriorTransform& t, const Vector& u) { return t.jacobian(u); }
Vector l1_map_inverse(const L1PriorTransform& t, const Vector& theta) { return t.inverse(theta); }

L1ExactApproximation::L1ExactApproximation(std::shared_ptr<const L1PriorTransform> base)
    : base_(std::move(base)) {}

double L1ExactApproximation::log_jacobian_det(const Vector& u) const {
  return base_->g_derivative_of(u).array().log().sum() - base_->log_abs_det_d();
}

double L1ExactApproximation::prior_log_density(const Vector& theta) const {
  return -base_->lambda() * (base_->d_matrix() * theta).lpNorm<1>();
}

ScaledInputTransform::ScaledInputTransform(std::shared_ptr<const L1PriorTransform> base,
                                           double input_scale)
    : base_(std::move(base)), scale_(input_scale) {
  if (!(scale_ > 0.0)) {
    throw std::invalid_argument("ScaledInputTransform: scale must be positive");
  }
}

Vector ScaledInputTransform::forward(const Vector& u) const {
  return base_->forward(scale_ * u);
}

Vector ScaledInputTransform::inverse(const Vector& theta) const {
  return base_->inverse(theta) / scale_;
}

Matrix ScaledInputTransform::jacobian(const Vector& u) const {
  return scale_ * base_->jacobian(scale_ * u);
}

double ScaledInputTransform::log_jacobian_det(const Vector& u) const {
  const Vector v = scale_ * u;
  return static_cast<double>(u.size()) * std::log(scale_) +
         base_->g_derivative_of(v).array().log().sum() - base_->log_abs_det_d();
}

double ScaledInputTransform::prior_log_density(const Vector& theta) const {
  return -base_->lambda() * (base_->d_matrix() * theta).lpNorm<1>();
}

double approx_pullback_log_weight(const ApproximateTransform& a, const Vector& u,
                                  double residual_norm_sq, double projected_norm_sq,
                                  double logdet_qtjf) {
  const double log_prior = a.prior_log_density(a.forward(u));
  if (!std::isfinite(log_prior)) {
    throw numkit::NumericError("approx_pullback_log_weight: prior density not finite");
  }
  return -logdet_qtjf - 0.5 * residual_norm_sq + 0.5 * projected_norm_sq +
         a.log_jacobian_det(u) + log_prior;
}

}  // namespace rto::transforms
