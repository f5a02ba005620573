#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <memory>
#include <wavetrain/bloch.hpp>

using namespace wavetrain;

namespace {

WaveProfile pendulum_profile(double amplitude, int m = 128) {
  auto model = std::make_shared<ModelSystem>(builtin_model("pendulum"));
  ProfileGuess guess = make_loop_guess(Eigen::Vector2d::Zero(), amplitude, m);
  return solve_profile(model, guess, 0.0, Eigen::Vector2d::Zero());
}

PeriodicCoefficients heat_coeffs(int d = 1) {
  std::vector<Mat> A(d, Mat::Zero(2, 2));
  return PeriodicCoefficients::constant(A);
}

}  // namespace

TEST_CASE("constant-coefficient rotation block structure at xi = 0") {
  Mat A(2, 2);
  A << 0, 1, -1, 0;
  PeriodicCoefficients pc = PeriodicCoefficients::constant({A});
  const int M = 12;
  BlochOperator op = assemble(pc, Eigen::VectorXd::Zero(1), M);
  // block k: -(2 pi k)^2 I - 2 pi i k A; eigenvalues -(2 pi k)^2 -+ 2 pi k i * (+-i)
  // A has eigenvalues +-i, so lambda = -(2 pi k)^2 +- 2 pi k
  Eigen::ComplexEigenSolver<CMat> es(op.matrix, false);
  for (int k = -M; k <= M; ++k) {
    for (double sgn : {-1.0, 1.0}) {
      Cplx expected(-two_pi * k * two_pi * k + sgn * two_pi * k, 0.0);
      double best = 1e300;
      for (int i = 0; i < op.dim(); ++i)
        best = std::min(best, std::abs(es.eigenvalues()[i] - expected));
      CHECK(best < 1e-8);
    }
  }
  // top eigenvalue 0 with multiplicity 2
  SpectrumSlice s = spectrum(op, 3);
  CHECK(std::abs(s.eigenvalues[0]) < 1e-9);
  CHECK(std::abs(s.eigenvalues[1]) < 1e-9);
  CHECK(std::abs(s.eigenvalues[2]) > 1.0);
}

TEST_CASE("heat equation reproduces the Laplacian symbol at any xi") {
  PeriodicCoefficients pc = heat_coeffs(2);
  const int M = 10;
  Eigen::VectorXd xi(2);
  xi << 0.77, -1.3;
  BlochOperator op = assemble(pc, xi, M);
  Eigen::ComplexEigenSolver<CMat> es(op.matrix, false);
  for (int k = -M; k <= M; ++k) {
    double expected = -(xi[0] + two_pi * k) * (xi[0] + two_pi * k) - xi[1] * xi[1];
    double best = 1e300;
    for (int i = 0; i < op.dim(); ++i)
      best = std::min(best, std::abs(es.eigenvalues()[i] - Cplx(expected, 0.0)));
    CHECK(best < 1e-9);
  }
}

TEST_CASE("heat equation at xi1 = pi has rightmost eigenvalue -pi^2") {
  PeriodicCoefficients pc = heat_coeffs(1);
  Eigen::VectorXd xi(1);
  xi << std::numbers::pi;
  CHECK(rightmost_real_part(assemble(pc, xi, 16)) ==
        doctest::Approx(-std::numbers::pi * std::numbers::pi).epsilon(1e-10));
}

TEST_CASE("pendulum L_0: truncation self-convergence of the leading eigenvalues") {
  WaveProfile p = pendulum_profile(1.2);
  PeriodicCoefficients pc = PeriodicCoefficients::from_profile(p);
  SpectrumSlice s32 = spectrum(assemble(pc, Eigen::VectorXd::Zero(1), 32), 10);
  SpectrumSlice s64 = spectrum(assemble(pc, Eigen::VectorXd::Zero(1), 64), 10);
  for (int i = 0; i < 10; ++i) {
    double best = 1e300;
    for (int j = 0; j < 10; ++j)
      best = std::min(best, std::abs(s32.eigenvalues[i] - s64.eigenvalues[j]));
    CHECK(best < 1e-8);
  }
}

TEST_CASE("translation mode: L_0 annihilates ubar'") {
  WaveProfile p = pendulum_profile(1.2);
  PeriodicCoefficients pc = PeriodicCoefficients::from_profile(p);
  CHECK(translation_mode_residual(pc, p, 32) < 1e-6);
}

TEST_CASE("spectrum returns a biorthonormal tracked cluster") {
  WaveProfile p = pendulum_profile(0.9);
  PeriodicCoefficients pc = PeriodicCoefficients::from_profile(p);
  SpectrumSlice s = spectrum(assemble(pc, Eigen::VectorXd::Zero(1), 24), 6);
  CMat G = s.left.adjoint() * s.right;
  CHECK((G - CMat::Identity(6, 6)).norm() < 1e-8);
  for (int i = 0; i < 6; ++i) CHECK(s.residuals[i] <= 1e-8 * s.matrix_norm);
}

TEST_CASE("D3 cluster at xi = 0 counts n+1 zero modes for the pendulum wave") {
  WaveProfile p = pendulum_profile(1.2);
  PeriodicCoefficients pc = PeriodicCoefficients::from_profile(p);
  D3Report r24 = check_D3_semisimple(pc, 24);
  D3Report r48 = check_D3_semisimple(pc, 48);
  CHECK(r24.cluster_count >= 3);  // at least n+1 by the linearized existence theory
  CHECK(r24.cluster_count == r48.cluster_count);
  CHECK(r24.semisimple == r48.semisimple);
}

TEST_CASE("heat control: D1 and D2 hold with theta = 1") {
  PeriodicCoefficients pc = heat_coeffs(1);
  D1D2Options opt;
  opt.M = 12;
  opt.grid_points = 17;
  D1D2Report rep = check_D1_D2(pc, opt);
  CHECK(rep.d1_pass);
  CHECK(rep.d2_pass);
  CHECK(rep.theta_fit == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("constant advection A = I: critical surface -i xi - xi^2, theta = 1") {
  PeriodicCoefficients pc = PeriodicCoefficients::constant({Mat::Identity(2, 2)});
  D1D2Options opt;
  opt.M = 12;
  opt.grid_points = 17;
  D1D2Report rep = check_D1_D2(pc, opt);
  CHECK(rep.d1_pass);
  CHECK(rep.theta_fit == doctest::Approx(1.0).epsilon(1e-6));
  Eigen::VectorXd xi(1);
  xi << 0.3;
  SpectrumSlice s = spectrum(assemble(pc, xi, 12), 2);
  CHECK(std::abs(s.eigenvalues[0] - Cplx(-0.09, -0.3)) < 1e-10);
}

TEST_CASE("small truncation is rejected, coefficient tails are flagged") {
  CHECK_THROWS_AS(assemble(heat_coeffs(1), Eigen::VectorXd::Zero(1), 4), std::invalid_argument);
  WaveProfile p = pendulum_profile(1.2, 256);
  PeriodicCoefficients pc = PeriodicCoefficients::from_profile(p);
  CHECK_FALSE(assemble(pc, Eigen::VectorXd::Zero(1), 64).truncation_warning);
}
