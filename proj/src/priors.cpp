#include "rto/priors.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace rto::priors {

namespace {

bool is_power_of_two(Index n) { return n >= 1 && (n & (n - 1)) == 0; }

// Haar mother wavelet, +1 on (0, 1/2), -1 on (1/2, 1). The midpoint sampling
// grid never lands on the discontinuities for the levels used here.
double haar(double t) {
  if (t > 0.0 && t < 0.5) return 1.0;
  if (t > 0.5 && t < 1.0) return -1.0;
  return 0.0;
}

}  // namespace

Matrix build_tv_operator(Index n) {
  if (n < 2) throw std::invalid_argument("build_tv_operator: n must be >= 2");
  Matrix d = Matrix::Zero(n, n);
  d(0, 0) = 1.0;
  d(0, n - 1) += 1.0;
  for (Index i = 1; i < n; ++i) {
    d(i, i - 1) = -1.0;
    d(i, i) = 1.0;
  }
  return d;
}

Matrix build_besov_1d(Index n, double s) {
  if (!is_power_of_two(n) || n < 2) {
    throw std::invalid_argument("build_besov_1d: n must be a power of 2, n >= 2");
  }
  const double inv_sqrt_n = 1.0 / std::sqrt(static_cast<double>(n));
  const Index levels = static_cast<Index>(std::lround(std::log2(static_cast<double>(n))));

  Matrix b(n, n);
  b.row(0).setConstant(inv_sqrt_n);
  Index row = 1;
  for (Index j = 0; j < levels; ++j) {
    const double amp = std::pow(2.0, 0.5 * static_cast<double>(j));
    for (Index k = 0; k < (Index{1} << j); ++k, ++row) {
      for (Index i = 0; i < n; ++i) {
        const double x = (2.0 * static_cast<double>(i) + 1.0) / (2.0 * static_cast<double>(n));
        b(row, i) = inv_sqrt_n * amp *
                    haar(std::ldexp(x, static_cast<int>(j)) - static_cast<double>(k));
      }
    }
  }

  Vector w(n);
  w[0] = inv_sqrt_n;
  row = 1;
  for (Index j = 0; j < levels; ++j) {
    const double weight = inv_sqrt_n * std::pow(2.0, static_cast<double>(j) * (s - 0.5));
    for (Index k = 0; k < (Index{1} << j); ++k, ++row) w[row] = weight;
  }

  return w.asDiagonal() * b;
}

Matrix build_besov_2d(Index n, double s) {
  const Index root = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(n))));
  if (root * root != n || !is_power_of_two(root) || root < 2) {
    throw std::invalid_argument(
        "build_besov_2d: n must be a perfect square whose root is a power of 2");
  }
  const Matrix d1 = build_besov_1d(root, s);
  Matrix d(n, n);
  for (Index i1 = 0; i1 < root; ++i1) {
    for (Index j1 = 0; j1 < root; ++j1) {
      d.block(i1 * root, j1 * root, root, root) = d1(i1, j1) * d1;
    }
  }
  return d;
}

L1Prior make_prior(PriorKind kind, Index n, double lambda, double s) {
  if (!(lambda > 0.0)) throw std::invalid_argument("make_prior: lambda must be positive");
  switch (kind) {
    case PriorKind::TV1D:
      return {build_tv_operator(n), lambda, kind, s};
    case PriorKind::Besov1D:
      return {build_besov_1d(n, s), lambda, kind, s};
    case PriorKind::Besov2D:
      return {build_besov_2d(n, s), lambda, kind, s};
  }
  throw std::invalid_argument("make_prior: unknown kind");
}

double l1_log_prior(const L1Prior& prior, const Vector& theta) {
  return -prior.lambda * (prior.d * theta).lpNorm<1>();
}

double besov_pointwise_variance(double s, int levels) {
  if (levels < 0) throw std::invalid_argument("besov_pointwise_variance: levels must be >= 0");
  double sum = 0.0;
  for (int j = 0; j <= levels; ++j) {
    sum += std::pow(2.0, -2.0 * j * (s - 1.0));
  }
  return 2.0 * (1.0 + sum);
}

double besov_pointwise_variance_limit(double s) {
  if (!(s > 1.0)) {
    throw numkit::NumericError(
        "besov_pointwise_variance_limit: series diverges for s <= 1");
  }
  return 2.0 * (1.0 + 1.0 / (1.0 - std::pow(2.0, -2.0 * (s - 1.0))));
}

void export_operator_csv(const Matrix& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_operator_csv: cannot open " + path);
  out.precision(17);
  for (Index i = 0; i < d.rows(); ++i) {
    for (Index j = 0; j < d.cols(); ++j) {
      if (j) out << ',';
      out << d(i, j);
    }
    out << '\n';
  }
}

}  // namespace rto::priors
