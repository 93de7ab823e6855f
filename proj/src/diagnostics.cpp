#include "rto/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rto::diagnostics {

EssResult ess_iact(const std::vector<double>& series, double window_factor) {
  const std::size_t n = series.size();
  if (n < 100) throw std::invalid_argument("ess_iact: need at least 100 samples");

  double lo = series.front();
  double hi = series.front();
  double mean = 0.0;
  for (double x : series) {
    mean += x;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  mean /= static_cast<double>(n);
  if (lo == hi) {
    throw numkit::NumericError("ess_iact: constant series has undefined autocorrelation");
  }

  double var0 = 0.0;
  for (double x : series) var0 += (x - mean) * (x - mean);
  var0 /= static_cast<double>(n);

  // Grow the window lag by lag until the self-consistency rule W >= c * tau(W)
  // fires; direct summation, no FFT.
  const std::size_t max_lag = n - 1;
  double tau = 1.0;
  double running = 1.0;
  for (std::size_t t = 1; t <= max_lag; ++t) {
    double cov = 0.0;
    for (std::size_t i = 0; i + t < n; ++i) {
      cov += (series[i] - mean) * (series[i + t] - mean);
    }
    cov /= static_cast<double>(n);
    running += 2.0 * cov / var0;
    tau = std::max(running, 1.0);
    if (static_cast<double>(t) >= window_factor * tau) break;
  }

  EssResult out;
  out.iact = tau;
  out.ess = static_cast<double>(n) / tau;
  return out;
}

ChainSummary chain_summary(const Matrix& samples) {
  const Index n_rows = samples.rows();
  const Index n_cols = samples.cols();
  if (n_rows < 2) throw std::invalid_argument("chain_summary: need at least two samples");

  ChainSummary summary;
  summary.mean = samples.colwise().mean();
  Matrix centered = samples.rowwise() - summary.mean.transpose();
  // Exactly constant columns carry no spread; zero them so mean roundoff
  // cannot leak into the moments.
  for (Index j = 0; j < n_cols; ++j) {
    if (samples.col(j).minCoeff() == samples.col(j).maxCoeff()) {
      centered.col(j).setZero();
      summary.mean[j] = samples(0, j);
    }
  }
  summary.covariance =
      (centered.transpose() * centered) / static_cast<double>(n_rows - 1);
  summary.covariance = 0.5 * (summary.covariance + summary.covariance.transpose()).eval();
  summary.std_dev = summary.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();

  summary.ess.ess.resize(n_cols);
  summary.ess.iact.resize(n_cols);
  std::vector<double> finite_ess;
  std::vector<double> column(static_cast<std::size_t>(n_rows));
  for (Index j = 0; j < n_cols; ++j) {
    for (Index i = 0; i < n_rows; ++i) column[static_cast<std::size_t>(i)] = samples(i, j);
    try {
      const EssResult r = ess_iact(column);
      summary.ess.ess[j] = r.ess;
      summary.ess.iact[j] = r.iact;
      finite_ess.push_back(r.ess);
    } catch (const std::exception&) {
      // Constant or too-short component: moments are still defined.
      summary.ess.ess[j] = std::numeric_limits<double>::quiet_NaN();
      summary.ess.iact[j] = std::numeric_limits<double>::quiet_NaN();
    }
  }
  if (!finite_ess.empty()) {
    std::sort(finite_ess.begin(), finite_ess.end());
    summary.ess.min_ess = finite_ess.front();
    summary.ess.max_ess = finite_ess.back();
    const std::size_t mid = finite_ess.size() / 2;
    summary.ess.median_ess = finite_ess.size() % 2 == 1
                                 ? finite_ess[mid]
                                 : 0.5 * (finite_ess[mid - 1] + finite_ess[mid]);
  } else {
    summary.ess.min_ess = summary.ess.median_ess = summary.ess.max_ess =
        std::numeric_limits<double>::quiet_NaN();
  }
  return summary;
}

double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  if (samples.size() < 10) throw std::invalid_argument("ks_statistic: need at least 10 samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    const double above = static_cast<double>(i + 1) / n - f;
    const double below = f - static_cast<double>(i) / n;
    sup = std::max({sup, above, below});
  }
  return sup;
}

}  // namespace rto::diagnostics
