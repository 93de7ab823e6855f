#pragma once

#include "rto/numkit.hpp"

#include <functional>
#include <random>

// Independent reference computations the tests check the library against.
// Deliberately naive implementations (cofactor expansions, finite
// differences, adaptive Simpson) that share no code with the library paths
// they verify. The random draws here come from std::mt19937, not the
// library's own generator.
namespace oracles {

using rto::numkit::Index;
using rto::numkit::Matrix;
using rto::numkit::Vector;

/// Determinant by cofactor expansion; fine up to ~9x9.
double det_cofactor(const Matrix& m);

/// Central finite-difference Jacobian of a vector map.
Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f, const Vector& x,
                   double h = 1e-6);

/// Central finite difference of a scalar function.
double fd_derivative(const std::function<double(double)>& f, double x, double h = 1e-6);

/// Adaptive Simpson quadrature on [a, b].
double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-12);

struct MomentPair {
  double mean;
  double variance;
};

// Mean and variance of an unnormalized density by adaptive quadrature,
// integrating the negative and positive half-lines separately so the kink at
// zero never crosses a panel.
MomentPair density_moments(const std::function<double(double)>& unnormalized_density,
                           double lo, double hi, double split = 0.0);

double laplace_cdf(double x, double lambda);

Matrix random_matrix(std::mt19937& gen, Index rows, Index cols, double scale = 1.0);
Vector random_vector(std::mt19937& gen, Index n, double scale = 1.0);

/// AR(1) series x_t = rho x_{t-1} + e_t with stationary unit marginal variance.
std::vector<double> ar1_series(std::mt19937& gen, std::size_t n, double rho);

}  // namespace oracles
