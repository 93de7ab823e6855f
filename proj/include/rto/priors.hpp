#pragma once

#include "rto/numkit.hpp"

#include <string>

// Construction of the l1-type prior operators: the density is
// p(theta) ~ exp(-lambda |D theta|_1) with D invertible. TV takes D to be the
// first-difference matrix closed by a boundary-sum row; Besov B^s_{1,1} takes
// D = W B with B the orthonormal Haar transform at midpoint samples and W the
// level weights 2^{j(s-1/2)} / sqrt(n).
namespace rto::priors {

using numkit::Index;
using numkit::Matrix;
using numkit::Vector;

enum class PriorKind { TV1D, Besov1D, Besov2D };

struct L1Prior {
  Matrix d;
  double lambda = 0.0;
  PriorKind kind = PriorKind::TV1D;
  double s = 1.0;  // Besov smoothness order; unused for TV
};

// First row e_1^T + e_n^T (sum of boundary values), rows i >= 2 the increments
// -e_{i-1}^T + e_i^T. Invertible for every n >= 2.
Matrix build_tv_operator(Index n);

// D = W B for n = 2^l; throws std::invalid_argument otherwise.
Matrix build_besov_1d(Index n, double s);

// 2-D operator on a sqrt(n) x sqrt(n) grid, columns the pairwise Kronecker
// products of the 1-D operator's columns (column-major vec convention).
// Requires sqrt(n) to be a power of two.
Matrix build_besov_2d(Index n, double s);

L1Prior make_prior(PriorKind kind, Index n, double lambda, double s);

/// -lambda |D theta|_1 (unnormalized log density).
double l1_log_prior(const L1Prior& prior, const Vector& theta);

// Pointwise prior variance of a Besov B^s_{1,1} field with Haar wavelets,
// truncated after wavelet level `levels`: 2 (1 + sum_{j=0}^{levels} 2^{-2j(s-1)}).
double besov_pointwise_variance(double s, int levels);

// The infinite-level limit 2 (1 + 1/(1 - 2^{-2(s-1)})); diverges for s <= 1,
// which is reported as a NumericError.
double besov_pointwise_variance_limit(double s);

/// Writes the operator to CSV (one row per line) for golden-file regression.
void export_operator_csv(const Matrix& d, const std::string& path);

}  // namespace rto::priors
