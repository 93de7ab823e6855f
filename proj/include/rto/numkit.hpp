#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

// Dense linear-algebra and reproducible-randomness kernels shared by the
// whole library. Everything here is pure and reentrant; Matrix/Vector values
// are plain Eigen types treated as immutable once built.
namespace rto::numkit {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Base class for numerical failures that should abort the computation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown by thin_qr when a column pivot falls below tolerance.
class RankDeficiencyError : public NumericError {
 public:
  RankDeficiencyError(Index column, double pivot, double tolerance);
  Index column() const noexcept { return column_; }
  double pivot() const noexcept { return pivot_; }

 private:
  Index column_;
  double pivot_;
};

/// Thrown when a square matrix is singular to working precision.
class SingularMatrixError : public NumericError {
 public:
  using NumericError::NumericError;
};

struct ThinQr {
  Matrix q;  // k x n, orthonormal columns
  Matrix r;  // n x n, upper triangular
};

// Householder thin QR of a k x n matrix (k >= n). Deterministic sign
// convention (whatever the Householder sweep produces). Throws
// RankDeficiencyError if any |R_ii| < 1e-14 * max|M|.
ThinQr thin_qr(const Matrix& m);

// log|det M| for square nonsingular M, evaluated as sum_i log|R_ii| of the
// QR factors. Throws SingularMatrixError when a diagonal entry vanishes to
// working precision.
double log_abs_det_qr(const Matrix& m);

// Smallest singular value of an arbitrary finite matrix.
double smallest_singular_value(const Matrix& m);

// --- Gaussian special functions -------------------------------------------
// Tail-stable building blocks used by the prior transformation layer and the
// inverse-CDF normal sampler.

double normal_pdf(double x);
double normal_cdf(double x);

/// Scaled complementary error function exp(x^2) erfc(x), x >= 0.
double erfcx(double x);

/// Inverse standard-normal CDF, accurate to ~1 ulp of the true quantile for
/// p in (0,1) including subnormal-adjacent tails. Throws NumericError outside
/// the open interval.
double inverse_normal_cdf(double p);

// --- Reproducible randomness ------------------------------------------------

// Counter-based stream: output k depends only on (seed, stream_id, k), so any
// consumer that owns a stream id gets the same numbers no matter which thread
// runs it or in what order streams are drawn from.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t next_bits();
  /// Uniform draw on the open interval (0, 1).
  double uniform();
  /// Standard normal draw via the inverse CDF.
  double normal();

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

/// `count` i.i.d. standard normal draws from the stream.
Vector standard_normal(RngStream& stream, Index count);

}  // namespace rto::numkit
