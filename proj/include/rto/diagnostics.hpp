#pragma once

#include "rto/numkit.hpp"

#include <functional>
#include <vector>

// Chain quality diagnostics: integrated autocorrelation time with the
// self-consistent window rule, posterior moments, and distribution-distance
// statistics. All pure functions.
namespace rto::diagnostics {

using numkit::Index;
using numkit::Matrix;
using numkit::Vector;

struct EssResult {
  double ess = 0.0;
  double iact = 0.0;
};

// IACT = 1 + 2 sum_{t<=W} rho(t) with W the smallest window satisfying
// W >= c * IACT(W); ESS = N / IACT. IACT is clamped below at 1. Requires
// N >= 100 and a non-constant series.
EssResult ess_iact(const std::vector<double>& series, double window_factor = 6.0);

struct EssReport {
  Vector ess;   // per component; NaN for constant components
  Vector iact;
  double min_ess = 0.0;
  double median_ess = 0.0;
  double max_ess = 0.0;
};

struct ChainSummary {
  Vector mean;
  Vector std_dev;     // unbiased
  Matrix covariance;  // unbiased, symmetric
  EssReport ess;
};

/// Moments and per-component ESS of an N x n sample matrix (N >= 2).
ChainSummary chain_summary(const Matrix& samples);

/// Kolmogorov-Smirnov sup distance between the empirical CDF of the samples
/// and the given CDF. Requires N >= 10.
double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf);

}  // namespace rto::diagnostics
