#include "rto/models.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rto::models {

namespace {

constexpr double kKernelHalfWidth = 1.0 / 64.0;
// Stream id reserved for observation noise so data generation never collides
// with the sampler's per-proposal streams.
constexpr std::uint64_t kNoiseStream = 0xDA7Aull;

double midpoint(Index i, Index n) {
  return (2.0 * static_cast<double>(i) + 1.0) / (2.0 * static_cast<double>(n));
}

}  // namespace

ConvolutionModel::ConvolutionModel(Matrix a, double sigma_obs)
    : a_(std::move(a)), sigma_obs_(sigma_obs) {
  if (sigma_obs_ < 0.0) {
    throw std::invalid_argument("ConvolutionModel: sigma_obs must be >= 0");
  }
}

ConvolutionModel build_convolution(Index n, Index m, double sigma_obs) {
  if (n < 2 || m < 1) throw std::invalid_argument("build_convolution: need n >= 2, m >= 1");
  Matrix a = Matrix::Zero(m, n);
  for (Index k = 0; k < m; ++k) {
    const double t = static_cast<double>(k + 1) / static_cast<double>(m + 1);
    for (Index i = 0; i < n; ++i) {
      if (std::abs(midpoint(i, n) - t) < kKernelHalfWidth) {
        a(k, i) = 1.0 / static_cast<double>(n);
      }
    }
  }
  return ConvolutionModel(std::move(a), sigma_obs);
}

Vector make_truth(TruthKind kind, Index n) {
  if (n < 1) throw std::invalid_argument("make_truth: n must be >= 1");
  Vector theta = Vector::Zero(n);
  for (Index i = 0; i < n; ++i) {
    const double x = midpoint(i, n);
    switch (kind) {
      case TruthKind::SquarePulse:
        theta[i] = (x > 1.0 / 3.0 && x < 2.0 / 3.0) ? 1.0 : 0.0;
        break;
      case TruthKind::TwoLevel:
        if (x > 2.0 / 15.0 && x < 7.0 / 15.0) {
          theta[i] = 1.0;
        } else if (x > 10.0 / 15.0 && x < 13.0 / 15.0) {
          theta[i] = 0.5;
        }
        break;
    }
  }
  return theta;
}

Vector exact_box_convolution(TruthKind kind, Index m) {
  if (m < 1) throw std::invalid_argument("exact_box_convolution: m must be >= 1");
  struct Segment {
    double lo, hi, value;
  };
  std::vector<Segment> segments;
  switch (kind) {
    case TruthKind::SquarePulse:
      segments = {{1.0 / 3.0, 2.0 / 3.0, 1.0}};
      break;
    case TruthKind::TwoLevel:
      segments = {{2.0 / 15.0, 7.0 / 15.0, 1.0}, {10.0 / 15.0, 13.0 / 15.0, 0.5}};
      break;
  }
  Vector y = Vector::Zero(m);
  for (Index k = 0; k < m; ++k) {
    const double t = static_cast<double>(k + 1) / static_cast<double>(m + 1);
    for (const auto& seg : segments) {
      const double lo = std::max(t - kKernelHalfWidth, seg.lo);
      const double hi = std::min(t + kKernelHalfWidth, seg.hi);
      if (hi > lo) y[k] += seg.value * (hi - lo);
    }
  }
  return y;
}

Vector make_truth_from_file(const std::string& path, Index n) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("make_truth_from_file: cannot open " + path);
  std::vector<double> values;
  std::string line;
  while (std::getline(in, line)) {
    std::stringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) {
      if (cell.empty()) continue;
      values.push_back(std::stod(cell));
    }
  }
  if (static_cast<Index>(values.size()) != n) {
    throw std::runtime_error("make_truth_from_file: expected " + std::to_string(n) +
                             " values, found " + std::to_string(values.size()));
  }
  return Eigen::Map<Vector>(values.data(), n);
}

Vector default_log_conductivity(Index div) {
  const auto centers = cell_centers(div);
  Vector theta(static_cast<Index>(centers.size()));
  for (Index i = 0; i < theta.size(); ++i) {
    const auto [x, y] = centers[static_cast<std::size_t>(i)];
    const double hi = std::exp(-(std::pow(x - 0.34, 2) + std::pow(y - 0.66, 2)) / (2 * 0.13 * 0.13));
    const double lo = std::exp(-(std::pow(x - 0.72, 2) + std::pow(y - 0.30, 2)) / (2 * 0.11 * 0.11));
    theta[i] = 1.1 * hi - 1.1 * lo;
  }
  return theta;
}

Vector generate_data(const ForwardModel& model, const Vector& theta_true, std::uint64_t seed) {
  if (theta_true.size() != model.dim_theta()) {
    throw std::invalid_argument("generate_data: truth dimension mismatch");
  }
  numkit::RngStream stream(seed, kNoiseStream);
  return model.evaluate(theta_true) +
         model.sigma_obs() * numkit::standard_normal(stream, model.dim_obs());
}

}  // namespace rto::models
