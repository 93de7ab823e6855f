#pragma once

#include "rto/numkit.hpp"

#include <Eigen/Sparse>

#include <functional>
#include <string>
#include <vector>

// Forward models for the shipped experiments: 1-D box-kernel deconvolution
// and a 2-D elliptic PDE with log-conductivity parameters. Models are
// immutable after construction; evaluate/jacobian are pure and safe to call
// concurrently (each elliptic call owns its factorization workspace).
namespace rto::models {

using numkit::Index;
using numkit::Matrix;
using numkit::Vector;

class ForwardModel {
 public:
  virtual ~ForwardModel() = default;
  virtual Index dim_theta() const = 0;
  virtual Index dim_obs() const = 0;
  virtual Vector evaluate(const Vector& theta) const = 0;
  virtual Matrix jacobian(const Vector& theta) const = 0;
  virtual double sigma_obs() const = 0;
  virtual bool is_linear() const { return false; }
};

// f(theta) = A theta where A_{ki} = (1/n) 1[|x_i - t_k| < 1/64]: midpoint
// quadrature of the box kernel on the signal grid x_i = (2i-1)/(2n), with
// measurement centers t_k = k/(m+1) strictly inside the domain.
class ConvolutionModel final : public ForwardModel {
 public:
  ConvolutionModel(Matrix a, double sigma_obs);

  Index dim_theta() const override { return a_.cols(); }
  Index dim_obs() const override { return a_.rows(); }
  Vector evaluate(const Vector& theta) const override { return a_ * theta; }
  Matrix jacobian(const Vector&) const override { return a_; }
  double sigma_obs() const override { return sigma_obs_; }
  bool is_linear() const override { return true; }

  const Matrix& matrix() const noexcept { return a_; }

 private:
  Matrix a_;
  double sigma_obs_;
};

ConvolutionModel build_convolution(Index n, Index m, double sigma_obs);

enum class TruthKind { SquarePulse, TwoLevel };

/// Built-in 1-D truth signals evaluated on the midpoint grid (2i-1)/(2n).
Vector make_truth(TruthKind kind, Index n);

/// Truth read from a CSV file (one value per cell, row-major for 2-D grids).
/// Throws if the element count does not match n.
Vector make_truth_from_file(const std::string& path, Index n);

// Exact box-kernel measurements of a built-in truth signal: closed-form
// overlap integrals of the kernel support with the piecewise-constant
// segments. Discretization-free reference data for refinement studies, where
// every parameter resolution must face the same measurements.
Vector exact_box_convolution(TruthKind kind, Index m);

/// Smooth two-blob log-conductivity field on a div x div cell-center grid;
/// the stock truth for the elliptic experiment.
Vector default_log_conductivity(Index div);

/// y = f(theta_true) + sigma_obs * zeta with zeta ~ N(0, I) drawn from a
/// dedicated stream of `seed`; deterministic given the seed.
Vector generate_data(const ForwardModel& model, const Vector& theta_true, std::uint64_t seed);

// --- 2-D elliptic PDE -------------------------------------------------------

/// Cell-center coordinates of a div x div grid on [0,1]^2, column-major
/// (x fastest), matching the vec convention of the 2-D Besov operator.
std::vector<std::pair<double, double>> cell_centers(Index div);

/// Sparse operator interpolating bilinear nodal values on a mesh_div x
/// mesh_div element mesh to arbitrary points. Rows sum to one.
Eigen::SparseMatrix<double> bilinear_interpolation(
    Index mesh_div, const std::vector<std::pair<double, double>>& points);

/// Consistent load vector (size (mesh_div+1)^2) for a smooth source density,
/// assembled with tensor Gauss quadrature per element.
Vector assemble_load(const std::function<double(double, double)>& density, Index mesh_div);

// Load for the thirteen-bump forcing: weight 1 at (a,b), a,b in
// {0.05, 0.5, 0.95}, weight -9/4 at a,b in {0.25, 0.75}. Each bump is an
// isotropic Gaussian of the given width normalized to unit mass over the
// domain, so the total signed source integral vanishes and the pure-Neumann
// problem stays compatible.
Vector forcing_field(double bump_width, Index mesh_div);

// -div(exp(theta) grad s) = h on [0,1]^2 with zero-flux boundaries and the
// boundary-average-zero constraint enforced by one Lagrange multiplier.
// Bilinear elements on a mesh_div x mesh_div grid of squares; the parameter
// field theta lives at the cell centers of a (coarser or equal) param_div x
// param_div grid and is piecewise constant on the elements below each cell.
// Observations are the potential interpolated back at the parameter cell
// centers, so dim_obs == dim_theta.
class EllipticModel final : public ForwardModel {
 public:
  EllipticModel(Index param_div, Index mesh_div, Vector mesh_load, double sigma_obs);

  static EllipticModel with_bump_forcing(Index param_div, Index mesh_div, double sigma_obs,
                                         double bump_width = 0.05);

  Index dim_theta() const override { return param_div_ * param_div_; }
  Index dim_obs() const override { return param_div_ * param_div_; }
  Vector evaluate(const Vector& theta) const override;
  Matrix jacobian(const Vector& theta) const override;
  double sigma_obs() const override { return sigma_obs_; }

  /// Nodal potential on the mesh, size (mesh_div+1)^2.
  Vector solve_potential(const Vector& theta) const;

  const Eigen::SparseMatrix<double>& observation_operator() const { return obs_op_; }
  const Vector& load() const { return load_; }
  Index mesh_div() const { return mesh_div_; }
  Index param_div() const { return param_div_; }

  /// Assembled stiffness block K(theta) (without the constraint border).
  Eigen::SparseMatrix<double> stiffness(const Vector& theta) const;

 private:
  Eigen::SparseMatrix<double> saddle_system(const Vector& theta) const;
  Index n_nodes() const { return (mesh_div_ + 1) * (mesh_div_ + 1); }

  Index param_div_;
  Index mesh_div_;
  Vector load_;
  double sigma_obs_;
  Eigen::SparseMatrix<double> obs_op_;
};

}  // namespace rto::models
