#include "rto/numkit.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>

namespace rto::numkit {

namespace {

constexpr double kSqrt2Pi = 2.5066282746310005024;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr std::uint64_t kWeyl = 0x9e3779b97f4a7c15ULL;

void require_finite(const Matrix& m, const char* who) {
  if (!m.allFinite()) {
    throw NumericError(std::string(who) + ": matrix has non-finite entries");
  }
}

}  // namespace

RankDeficiencyError::RankDeficiencyError(Index column, double pivot, double tolerance)
    : NumericError("thin_qr: column " + std::to_string(column) +
                   " is rank deficient (|R_ii| = " + std::to_string(pivot) +
                   " < tol = " + std::to_string(tolerance) + ")"),
      column_(column),
      pivot_(pivot) {}

ThinQr thin_qr(const Matrix& m) {
  if (m.cols() < 1 || m.rows() < m.cols()) {
    throw NumericError("thin_qr: need k x n input with k >= n >= 1");
  }
  require_finite(m, "thin_qr");

  Eigen::HouseholderQR<Matrix> qr(m);
  const Index n = m.cols();
  Matrix r = qr.matrixQR().topRows(n).triangularView<Eigen::Upper>();

  const double tol = 1e-14 * m.cwiseAbs().maxCoeff();
  for (Index i = 0; i < n; ++i) {
    if (std::abs(r(i, i)) < tol) {
      throw RankDeficiencyError(i, std::abs(r(i, i)), tol);
    }
  }

  Matrix q = qr.householderQ() * Matrix::Identity(m.rows(), n);
  return {std::move(q), std::move(r)};
}

double log_abs_det_qr(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw NumericError("log_abs_det_qr: matrix must be square");
  }
  require_finite(m, "log_abs_det_qr");

  Eigen::HouseholderQR<Matrix> qr(m);
  const double tol = 1e-14 * m.cwiseAbs().maxCoeff();
  double acc = 0.0;
  for (Index i = 0; i < m.rows(); ++i) {
    const double rii = std::abs(qr.matrixQR()(i, i));
    if (rii <= tol) {
      throw SingularMatrixError("log_abs_det_qr: singular matrix (|R_" +
                                std::to_string(i) + std::to_string(i) +
                                "| = " + std::to_string(rii) + ")");
    }
    acc += std::log(rii);
  }
  return acc;
}

double smallest_singular_value(const Matrix& m) {
  if (m.size() == 0) {
    throw NumericError("smallest_singular_value: empty matrix");
  }
  require_finite(m, "smallest_singular_value");
  Eigen::BDCSVD<Matrix> svd(m);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }

double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

double erfcx(double x) {
  if (x < 0.0) {
    throw NumericError("erfcx: negative argument unsupported");
  }
  if (x < 5.66) {
    return std::exp(x * x) * std::erfc(x);
  }
  // Asymptotic series erfcx(x) ~ (x sqrt(pi))^-1 sum_k (-1)^k (2k-1)!! / (2x^2)^k.
  // Terms decay fast for x > 5.66; truncation error is below double epsilon
  // long before the divergent regime starts near k ~ x^2.
  const double inv2x2 = 1.0 / (2.0 * x * x);
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k <= 24; ++k) {
    term *= -static_cast<double>(2 * k - 1) * inv2x2;
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum)) break;
  }
  return sum / (x * 1.7724538509055160273);  // sqrt(pi)
}

namespace {

// Acklam's rational initial guess for the standard-normal quantile of
// q in (0, 0.5], followed by one Halley step against the erfc-based CDF.
double lower_tail_quantile(double q) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double plow = 0.02425;

  double x;
  if (q < plow) {
    const double r = std::sqrt(-2.0 * std::log(q));
    x = (((((c[0] * r + c[1]) * r + c[2]) * r + c[3]) * r + c[4]) * r + c[5]) /
        ((((d[0] * r + d[1]) * r + d[2]) * r + d[3]) * r + 1.0);
  } else {
    const double r = q - 0.5;
    const double t = r * r;
    x = (((((a[0] * t + a[1]) * t + a[2]) * t + a[3]) * t + a[4]) * t + a[5]) * r /
        (((((b[0] * t + b[1]) * t + b[2]) * t + b[3]) * t + b[4]) * t + 1.0);
  }

  // One Halley iteration on Phi(x) - q = 0; x <= 0 here so normal_cdf keeps
  // full relative accuracy.
  const double err = normal_cdf(x) - q;
  const double u = err * kSqrt2Pi * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

}  // namespace

double inverse_normal_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw NumericError("inverse_normal_cdf: p must lie in (0, 1)");
  }
  if (p > 0.5) return -lower_tail_quantile(1.0 - p);
  return lower_tail_quantile(p);
}

namespace {

std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed),
      stream_id_(stream_id),
      base_(mix64(mix64(seed + kWeyl) ^ mix64(stream_id * kWeyl + 0x6a09e667f3bcc909ULL))) {}

std::uint64_t RngStream::next_bits() {
  counter_ += 1;
  return mix64(base_ + counter_ * kWeyl);
}

double RngStream::uniform() {
  return static_cast<double>(next_bits() >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

double RngStream::normal() { return inverse_normal_cdf(uniform()); }

Vector standard_normal(RngStream& stream, Index count) {
  Vector out(count);
  for (Index i = 0; i < count; ++i) out[i] = stream.normal();
  return out;
}

}  // namespace rto::numkit
