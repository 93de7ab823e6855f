#include "rto/models.hpp"

#include <Eigen/SparseLU>

#include <array>
#include <cmath>
#include <stdexcept>

namespace rto::models {

namespace {

// Gauss-Legendre rule on [0,1], order 5 per axis.
constexpr std::array<double, 5> kGaussPoints = {
    0.046910077030668004, 0.23076534494715845, 0.5, 0.76923465505284155,
    0.953089922969332};
constexpr std::array<double, 5> kGaussWeights = {
    0.11846344252809454, 0.23931433524968324, 0.28444444444444444,
    0.23931433524968324, 0.11846344252809454};

// Bilinear shape functions on the unit square, node order SW, SE, NE, NW.
std::array<double, 4> shape(double xi, double eta) {
  return {(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta};
}

// Unit-conductivity element stiffness for a square bilinear element; in 2-D
// it is independent of the element size.
const Eigen::Matrix4d& unit_stiffness() {
  static const Eigen::Matrix4d k = [] {
    Eigen::Matrix4d m;
    m << 4, -1, -2, -1,
        -1, 4, -1, -2,
        -2, -1, 4, -1,
        -1, -2, -1, 4;
    return Eigen::Matrix4d(m / 6.0);
  }();
  return k;
}

// 1-D mass of a unit-height Gaussian of width sigma centered at c, truncated
// to [0,1].
double truncated_gaussian_mass(double c, double sigma) {
  return sigma * 2.5066282746310005024 *
         (numkit::normal_cdf((1.0 - c) / sigma) - numkit::normal_cdf(-c / sigma));
}

}  // namespace

std::vector<std::pair<double, double>> cell_centers(Index div) {
  if (div < 1) throw std::invalid_argument("cell_centers: div must be >= 1");
  std::vector<std::pair<double, double>> pts;
  pts.reserve(static_cast<std::size_t>(div * div));
  for (Index b = 0; b < div; ++b) {
    for (Index a = 0; a < div; ++a) {
      pts.emplace_back((2.0 * static_cast<double>(a) + 1.0) / (2.0 * static_cast<double>(div)),
                       (2.0 * static_cast<double>(b) + 1.0) / (2.0 * static_cast<double>(div)));
    }
  }
  return pts;
}

Eigen::SparseMatrix<double> bilinear_interpolation(
    Index mesh_div, const std::vector<std::pair<double, double>>& points) {
  const Index stride = mesh_div + 1;
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(points.size() * 4);
  for (std::size_t p = 0; p < points.size(); ++p) {
    const auto [x, y] = points[p];
    if (x < 0.0 || x > 1.0 || y < 0.0 || y > 1.0) {
      throw std::invalid_argument("bilinear_interpolation: point outside [0,1]^2");
    }
    const Index ex = std::min<Index>(static_cast<Index>(x * static_cast<double>(mesh_div)), mesh_div - 1);
    const Index ey = std::min<Index>(static_cast<Index>(y * static_cast<double>(mesh_div)), mesh_div - 1);
    const double xi = x * static_cast<double>(mesh_div) - static_cast<double>(ex);
    const double eta = y * static_cast<double>(mesh_div) - static_cast<double>(ey);
    const auto w = shape(xi, eta);
    const Index base = ey * stride + ex;
    const std::array<Index, 4> nodes = {base, base + 1, base + stride + 1, base + stride};
    for (int a = 0; a < 4; ++a) {
      if (w[static_cast<std::size_t>(a)] != 0.0) {
        trips.emplace_back(static_cast<int>(p), static_cast<int>(nodes[static_cast<std::size_t>(a)]),
                           w[static_cast<std::size_t>(a)]);
      }
    }
  }
  Eigen::SparseMatrix<double> op(static_cast<Index>(points.size()), stride * stride);
  op.setFromTriplets(trips.begin(), trips.end());
  op.makeCompressed();
  return op;
}

Vector assemble_load(const std::function<double(double, double)>& density, Index mesh_div) {
  if (mesh_div < 1) throw std::invalid_argument("assemble_load: mesh_div must be >= 1");
  const Index stride = mesh_div + 1;
  const double h = 1.0 / static_cast<double>(mesh_div);
  Vector load = Vector::Zero(stride * stride);
  for (Index ey = 0; ey < mesh_div; ++ey) {
    for (Index ex = 0; ex < mesh_div; ++ex) {
      const Index base = ey * stride + ex;
      const std::array<Index, 4> nodes = {base, base + 1, base + stride + 1, base + stride};
      for (std::size_t qi = 0; qi < kGaussPoints.size(); ++qi) {
        for (std::size_t qj = 0; qj < kGaussPoints.size(); ++qj) {
          const double xi = kGaussPoints[qi];
          const double eta = kGaussPoints[qj];
          const double x = (static_cast<double>(ex) + xi) * h;
          const double y = (static_cast<double>(ey) + eta) * h;
          const double scale = kGaussWeights[qi] * kGaussWeights[qj] * h * h * density(x, y);
          const auto w = shape(xi, eta);
          for (int a = 0; a < 4; ++a) {
            load[nodes[static_cast<std::size_t>(a)]] += scale * w[static_cast<std::size_t>(a)];
          }
        }
      }
    }
  }
  return load;
}

Vector forcing_field(double bump_width, Index mesh_div) {
  if (!(bump_width > 0.0)) {
    throw std::invalid_argument("forcing_field: bump_width must be positive");
  }
  struct Bump {
    double x, y, weight, norm;
  };
  std::vector<Bump> bumps;
  const double pos[3] = {0.05, 0.5, 0.95};
  for (double a : pos) {
    for (double b : pos) {
      bumps.push_back({a, b, 1.0,
                       truncated_gaussian_mass(a, bump_width) *
                           truncated_gaussian_mass(b, bump_width)});
    }
  }
  const double neg[2] = {0.25, 0.75};
  for (double a : neg) {
    for (double b : neg) {
      bumps.push_back({a, b, -2.25,
                       truncated_gaussian_mass(a, bump_width) *
                           truncated_gaussian_mass(b, bump_width)});
    }
  }
  const double inv_two_sigma_sq = 1.0 / (2.0 * bump_width * bump_width);
  auto density = [&bumps, inv_two_sigma_sq](double x, double y) {
    double value = 0.0;
    for (const auto& b : bumps) {
      const double r2 = (x - b.x) * (x - b.x) + (y - b.y) * (y - b.y);
      value += b.weight / b.norm * std::exp(-r2 * inv_two_sigma_sq);
    }
    return value;
  };
  return assemble_load(density, mesh_div);
}

EllipticModel::EllipticModel(Index param_div, Index mesh_div, Vector mesh_load, double sigma_obs)
    : param_div_(param_div), mesh_div_(mesh_div), load_(std::move(mesh_load)), sigma_obs_(sigma_obs) {
  if (param_div_ < 1 || mesh_div_ < 1 || mesh_div_ % param_div_ != 0) {
    throw std::invalid_argument("EllipticModel: param_div must divide mesh_div");
  }
  if (load_.size() != n_nodes()) {
    throw std::invalid_argument("EllipticModel: load vector size mismatch");
  }
  if (sigma_obs_ < 0.0) throw std::invalid_argument("EllipticModel: sigma_obs must be >= 0");
  obs_op_ = bilinear_interpolation(mesh_div_, cell_centers(param_div_));
}

EllipticModel EllipticModel::with_bump_forcing(Index param_div, Index mesh_div, double sigma_obs,
                                               double bump_width) {
  return EllipticModel(param_div, mesh_div, forcing_field(bump_width, mesh_div), sigma_obs);
}

Eigen::SparseMatrix<double> EllipticModel::stiffness(const Vector& theta) const {
  if (theta.size() != dim_theta()) {
    throw std::invalid_argument("EllipticModel: theta dimension mismatch");
  }
  if (!theta.allFinite()) throw numkit::NumericError("EllipticModel: non-finite theta");
  const Index stride = mesh_div_ + 1;
  const Index ratio = mesh_div_ / param_div_;
  const auto& k0 = unit_stiffness();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(mesh_div_ * mesh_div_ * 16));
  for (Index ey = 0; ey < mesh_div_; ++ey) {
    for (Index ex = 0; ex < mesh_div_; ++ex) {
      const Index cell = (ey / ratio) * param_div_ + (ex / ratio);
      const double kappa = std::exp(theta[cell]);
      const Index base = ey * stride + ex;
      const std::array<Index, 4> nodes = {base, base + 1, base + stride + 1, base + stride};
      for (int a = 0; a < 4; ++a) {
        for (int b = 0; b < 4; ++b) {
          trips.emplace_back(static_cast<int>(nodes[static_cast<std::size_t>(a)]),
                             static_cast<int>(nodes[static_cast<std::size_t>(b)]), kappa * k0(a, b));
        }
      }
    }
  }
  Eigen::SparseMatrix<double> k(n_nodes(), n_nodes());
  k.setFromTriplets(trips.begin(), trips.end());
  k.makeCompressed();
  return k;
}

Eigen::SparseMatrix<double> EllipticModel::saddle_system(const Vector& theta) const {
  const Index n = n_nodes();
  const Index stride = mesh_div_ + 1;
  Eigen::SparseMatrix<double> k = stiffness(theta);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(k.nonZeros()) + 4 * static_cast<std::size_t>(stride));
  for (int col = 0; col < k.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(k, col); it; ++it) {
      trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
  }
  // Boundary-average-zero: one Lagrange multiplier with equal weights on
  // every boundary node.
  for (Index j = 0; j < stride; ++j) {
    for (Index i = 0; i < stride; ++i) {
      if (i == 0 || j == 0 || i == stride - 1 || j == stride - 1) {
        const Index node = j * stride + i;
        trips.emplace_back(static_cast<int>(node), static_cast<int>(n), 1.0);
        trips.emplace_back(static_cast<int>(n), static_cast<int>(node), 1.0);
      }
    }
  }
  Eigen::SparseMatrix<double> sys(n + 1, n + 1);
  sys.setFromTriplets(trips.begin(), trips.end());
  sys.makeCompressed();
  return sys;
}

Vector EllipticModel::solve_potential(const Vector& theta) const {
  const Index n = n_nodes();
  Eigen::SparseMatrix<double> sys = saddle_system(theta);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(sys);
  if (lu.info() != Eigen::Success) {
    throw numkit::NumericError("EllipticModel: factorization failed (theta range " +
                               std::to_string(theta.minCoeff()) + " .. " +
                               std::to_string(theta.maxCoeff()) + ")");
  }
  Vector rhs = Vector::Zero(n + 1);
  rhs.head(n) = load_;
  Vector sol = lu.solve(rhs);
  if (lu.info() != Eigen::Success || !sol.allFinite()) {
    throw numkit::NumericError("EllipticModel: solve failed");
  }
  return sol.head(n);
}

Vector EllipticModel::evaluate(const Vector& theta) const {
  return obs_op_ * solve_potential(theta);
}

Matrix EllipticModel::jacobian(const Vector& theta) const {
  const Index n = n_nodes();
  const Index stride = mesh_div_ + 1;
  const Index ratio = mesh_div_ / param_div_;
  const auto& k0 = unit_stiffness();

  Eigen::SparseMatrix<double> sys = saddle_system(theta);
  Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(sys);
  if (lu.info() != Eigen::Success) {
    throw numkit::NumericError("EllipticModel: factorization failed in jacobian");
  }
  Vector rhs = Vector::Zero(n + 1);
  rhs.head(n) = load_;
  const Vector sol = lu.solve(rhs);
  const Vector s = sol.head(n);

  // One factorization serves all columns: dS/dtheta_c = -K~^{-1} (dK/dtheta_c s).
  Matrix dks = Matrix::Zero(n + 1, dim_theta());
  for (Index ey = 0; ey < mesh_div_; ++ey) {
    for (Index ex = 0; ex < mesh_div_; ++ex) {
      const Index cell = (ey / ratio) * param_div_ + (ex / ratio);
      const double kappa = std::exp(theta[cell]);
      const Index base = ey * stride + ex;
      const std::array<Index, 4> nodes = {base, base + 1, base + stride + 1, base + stride};
      Eigen::Vector4d local;
      for (int a = 0; a < 4; ++a) local[a] = s[nodes[static_cast<std::size_t>(a)]];
      const Eigen::Vector4d contrib = kappa * (k0 * local);
      for (int a = 0; a < 4; ++a) {
        dks(nodes[static_cast<std::size_t>(a)], cell) += contrib[a];
      }
    }
  }
  Matrix sens = -lu.solve(dks);
  return obs_op_ * sens.topRows(n);
}

}  // namespace rto::models
