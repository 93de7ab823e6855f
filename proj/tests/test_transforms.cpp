#include "rto/transforms.hpp"

#include "rto/diagnostics.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <cmath>

using namespace rto;
using numkit::Matrix;
using numkit::Vector;

TEST_CASE("g1d_forward pins") {
  CHECK(transforms::g1d_forward(0.0, 3.0) == 0.0);
  // phi(1) = 0.841345, -log(1 - 2*0.341345) = 1.147875
  CHECK(transforms::g1d_forward(1.0, 1.0) == doctest::Approx(1.147875).epsilon(1e-4));
  for (double u : {0.3, 1.7, 4.0, 11.0, 25.0}) {
    CHECK(transforms::g1d_forward(-u, 2.0) == doctest::Approx(-transforms::g1d_forward(u, 2.0)));
  }
}

TEST_CASE("g1d_forward is strictly increasing and tail stable") {
  double prev = transforms::g1d_forward(-37.0, 1.0);
  CHECK(std::isfinite(prev));
  for (double u = -36.5; u <= 37.0; u += 0.5) {
    const double cur = transforms::g1d_forward(u, 1.0);
    CHECK(std::isfinite(cur));
    CHECK(cur > prev);
    prev = cur;
  }
  // Tail values match the asymptotic size u^2 / (2 lambda).
  const double g37 = transforms::g1d_forward(37.0, 1.0);
  CHECK(g37 > 0.5 * 37.0 * 37.0 / 1.0);
  CHECK(g37 < 0.5 * 37.0 * 37.0 + 10.0);
}

TEST_CASE("g1d_derivative pins and symmetry") {
  // phi'(0) / (lambda * 0.5)
  CHECK(transforms::g1d_derivative(0.0, 1.0) == doctest::Approx(0.7978845608).epsilon(1e-6));
  for (double u : {0.4, 2.2, 6.5, 9.0}) {
    CHECK(transforms::g1d_derivative(u, 3.0) == doctest::Approx(transforms::g1d_derivative(-u, 3.0)));
    CHECK(transforms::g1d_derivative(u, 3.0) > 0.0);
  }
}

TEST_CASE("g1d_derivative matches finite differences") {
  for (double lambda : {0.5, 1.0, 8.0}) {
    for (double u = -6.0; u <= 6.0; u += 0.25) {
      const double fd = oracles::fd_derivative(
          [lambda](double v) { return transforms::g1d_forward(v, lambda); }, u, 1e-6);
      CHECK(transforms::g1d_derivative(u, lambda) == doctest::Approx(fd).epsilon(1e-5));
    }
  }
  // The Mills-ratio branch agrees with the direct formula where both are
  // representable.
  for (double u : {8.5, 10.0, 14.0}) {
    const double direct =
        numkit::normal_pdf(u) / (0.5 * std::erfc(u / std::sqrt(2.0)));
    CHECK(transforms::g1d_derivative(u, 1.0) == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("g1d_inverse round trips") {
  CHECK(transforms::g1d_inverse(0.0, 5.0) == 0.0);
  CHECK(transforms::g1d_inverse(1.147875, 1.0) == doctest::Approx(1.0).epsilon(1e-4));
  std::mt19937 gen(11);
  for (double lambda : {0.5, 1.0, 8.0}) {
    std::uniform_real_distribution<double> theta_dist(-20.0 / lambda, 20.0 / lambda);
    for (int i = 0; i < 10000; ++i) {
      const double theta = theta_dist(gen);
      const double back = transforms::g1d_forward(transforms::g1d_inverse(theta, lambda), lambda);
      CHECK(back == doctest::Approx(theta).epsilon(1e-10));
    }
  }
  // Deep tail round trip in u.
  for (double u : {10.0, 20.0, 30.0, 37.0}) {
    const double theta = transforms::g1d_forward(u, 1.0);
    CHECK(transforms::g1d_inverse(theta, 1.0) == doctest::Approx(u).epsilon(1e-9));
  }
}

TEST_CASE("pushforward of a standard normal is Laplace") {
  numkit::RngStream stream(2024, 1);
  const double lambda = 1.0;
  std::vector<double> draws(100000);
  for (auto& d : draws) d = transforms::g1d_forward(stream.normal(), lambda);
  const double ks = diagnostics::ks_statistic(
      draws, [lambda](double x) { return oracles::laplace_cdf(x, lambda); });
  CHECK(ks < 0.006);
}

TEST_CASE("l1_map_forward cases") {
  transforms::L1PriorTransform identity_d(Matrix::Identity(2, 2), 1.0);
  CHECK(transforms::l1_map_forward(identity_d, Vector::Zero(2)).cwiseAbs().maxCoeff() == 0.0);

  Vector u(2);
  u << 1.0, -1.0;
  const Vector theta = transforms::l1_map_forward(identity_d, u);
  CHECK(theta[0] == doctest::Approx(1.147875).epsilon(1e-4));
  CHECK(theta[1] == doctest::Approx(-1.147875).epsilon(1e-4));

  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 2.0, 4.0;
  transforms::L1PriorTransform diag_d(d, 1.0);
  const Vector theta2 = transforms::l1_map_forward(diag_d, u);
  CHECK(theta2[0] == doctest::Approx(transforms::g1d_forward(1.0, 1.0) / 2.0));
  CHECK(theta2[1] == doctest::Approx(transforms::g1d_forward(-1.0, 1.0) / 4.0));
}

TEST_CASE("l1_map_jacobian matches finite differences") {
  transforms::L1PriorTransform identity_d(Matrix::Identity(3, 3), 1.0);
  const Matrix j0 = transforms::l1_map_jacobian(identity_d, Vector::Zero(3));
  CHECK((j0 - 0.7978845608 * Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-6);

  std::mt19937 gen(5);
  const Matrix d = oracles::random_matrix(gen, 4, 4) + 4.0 * Matrix::Identity(4, 4);
  transforms::L1PriorTransform t(d, 2.0);
  const Vector u = oracles::random_vector(gen, 4);
  const Matrix fd = oracles::fd_jacobian([&t](const Vector& v) { return t.forward(v); }, u);
  const Matrix jac = transforms::l1_map_jacobian(t, u);
  CHECK(((jac - fd).cwiseAbs().maxCoeff() / jac.cwiseAbs().maxCoeff()) < 1e-5);

  // Positive-diagonal inner factor keeps the orientation of D^{-1}.
  CHECK(jac.determinant() * d.determinant() > 0.0);
}

TEST_CASE("l1_map_inverse round trips") {
  std::mt19937 gen(17);
  const Matrix d = oracles::random_matrix(gen, 5, 5) + 5.0 * Matrix::Identity(5, 5);
  transforms::L1PriorTransform t(d, 4.0);
  CHECK(transforms::l1_map_inverse(t, Vector::Zero(5)).cwiseAbs().maxCoeff() == 0.0);
  for (int rep = 0; rep < 1000; ++rep) {
    const Vector theta = oracles::random_vector(gen, 5, 0.5);
    const Vector back = transforms::l1_map_forward(t, transforms::l1_map_inverse(t, theta));
    CHECK((back - theta).cwiseAbs().maxCoeff() <= 1e-8 * (1.0 + theta.cwiseAbs().maxCoeff()));
  }

  transforms::L1PriorTransform eye(Matrix::Identity(3, 3), 2.0);
  Vector theta(3);
  theta << 0.2, -0.7, 1.5;
  const Vector u = transforms::l1_map_inverse(eye, theta);
  for (int i = 0; i < 3; ++i) {
    CHECK(u[i] == doctest::Approx(transforms::g1d_inverse(theta[i], 2.0)));
  }
}

TEST_CASE("transform jacobian inverts the inverse-map jacobian") {
  std::mt19937 gen(23);
  const Matrix d = oracles::random_matrix(gen, 3, 3) + 3.0 * Matrix::Identity(3, 3);
  transforms::L1PriorTransform t(d, 1.5);
  const Vector u = oracles::random_vector(gen, 3, 0.8);
  const Vector theta = t.forward(u);
  const Matrix j_fwd = t.jacobian(u);
  const Matrix j_inv_fd =
      oracles::fd_jacobian([&t](const Vector& th) { return t.inverse(th); }, theta, 1e-7);
  CHECK(((j_fwd * j_inv_fd) - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-4);
}

// Change-of-variables identity for the scalar problem: the transformed
// density equals the theta-posterior at g(u) times g'(u), up to one constant.
TEST_CASE("scalar change of variables identity on a grid") {
  const double lambda = 1.0;
  const double sigma = 1.0;
  const double y = 0.3;
  const int points = 2001;
  Eigen::ArrayXd transformed(points), pullback(points);
  for (int i = 0; i < points; ++i) {
    const double u = -6.0 + 12.0 * i / (points - 1);
    const double g = transforms::g1d_forward(u, lambda);
    const double misfit = (g - y) / sigma;
    transformed[i] = std::exp(-0.5 * misfit * misfit - 0.5 * u * u);
    pullback[i] = std::exp(-0.5 * misfit * misfit - lambda * std::abs(g)) *
                  transforms::g1d_derivative(u, lambda);
  }
  transformed /= transformed.sum();
  pullback /= pullback.sum();
  CHECK(((transformed - pullback).abs() / transformed.abs()).maxCoeff() < 1e-10);
}

namespace {

// Identity coupling with a standard Gaussian prior: the corrected weight must
// collapse to the exact-transform weight (zero additive constant).
class GaussianIdentity final : public transforms::ApproximateTransform {
 public:
  explicit GaussianIdentity(numkit::Index n) : n_(n) {}
  numkit::Index dim() const override { return n_; }
  Vector forward(const Vector& u) const override { return u; }
  Vector inverse(const Vector& theta) const override { return theta; }
  Matrix jacobian(const Vector& u) const override {
    return Matrix::Identity(u.size(), u.size());
  }
  double log_jacobian_det(const Vector&) const override { return 0.0; }
  double prior_log_density(const Vector& theta) const override {
    return -0.5 * theta.squaredNorm();
  }

 private:
  numkit::Index n_;
};

}  // namespace

TEST_CASE("approx pullback weight collapses for the exact Gaussian case") {
  GaussianIdentity t(3);
  std::mt19937 gen(31);
  for (int rep = 0; rep < 20; ++rep) {
    const Vector u = oracles::random_vector(gen, 3);
    const double misfit_sq = std::abs(oracles::random_vector(gen, 1)[0]);
    const double projected_sq = std::abs(oracles::random_vector(gen, 1)[0]);
    const double logdet = oracles::random_vector(gen, 1)[0];
    const double corrected =
        transforms::approx_pullback_log_weight(t, u, misfit_sq, projected_sq, logdet);
    const double exact =
        -logdet - 0.5 * (u.squaredNorm() + misfit_sq) + 0.5 * projected_sq;
    CHECK(corrected == doctest::Approx(exact).epsilon(1e-12));
  }
}

TEST_CASE("scaled transform instance is consistent") {
  std::mt19937 gen(41);
  auto base = std::make_shared<transforms::L1PriorTransform>(
      Matrix(oracles::random_matrix(gen, 3, 3) + 3.0 * Matrix::Identity(3, 3)), 2.0);
  transforms::ScaledInputTransform t(base, 0.9);
  const Vector u = oracles::random_vector(gen, 3);
  CHECK((t.inverse(t.forward(u)) - u).cwiseAbs().maxCoeff() < 1e-8);
  const Matrix fd = oracles::fd_jacobian([&t](const Vector& v) { return t.forward(v); }, u);
  CHECK(((t.jacobian(u) - fd).cwiseAbs().maxCoeff() / fd.cwiseAbs().maxCoeff()) < 1e-5);
  CHECK(t.log_jacobian_det(u) ==
        doctest::Approx(std::log(std::abs(t.jacobian(u).determinant()))).epsilon(1e-9));
}
