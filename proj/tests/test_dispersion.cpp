#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "wavetrain/dispersion.hpp"
#include "wavetrain/model.hpp"

using namespace wavetrain;

namespace {

WaveProfile pendulum_profile(double amplitude, int m = 128, int d = 1) {
  auto model = std::make_shared<ModelSystem>(builtin_model(d == 1 ? "pendulum" : "pendulum2d"));
  ProfileGuess guess = make_loop_guess(Eigen::Vector2d::Zero(), amplitude, m);
  return solve_profile(model, guess, 0.0, Eigen::Vector2d::Zero());
}

Eigen::VectorXd e1(int d) {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
  e[0] = 1.0;
  return e;
}

}  // namespace

TEST_CASE("constant coefficients with distinct eigenvalues give those characteristic speeds") {
  Mat A(2, 2);
  A << 1.0, 0.0, 0.0, 2.0;
  PeriodicCoefficients pc = PeriodicCoefficients::constant({A});
  CriticalCluster cl = build_cluster(pc, e1(1), 16, 2);
  REQUIRE(cl.count == 2);
  CHECK(std::abs(cl.a[0] - Cplx(1.0, 0.0)) < 1e-10);
  CHECK(std::abs(cl.a[1] - Cplx(2.0, 0.0)) < 1e-10);
  CHECK(cl.projection_defect < 1e-8);
  CHECK(cl.h3_pass);
  AngleVerdict v = angle_verdict(cl);
  CHECK(v.weakly_hyperbolic);
  CHECK(v.strictly_hyperbolic);
}

TEST_CASE("zero advection is weakly but not strictly hyperbolic") {
  PeriodicCoefficients pc = PeriodicCoefficients::constant({Mat::Zero(2, 2)});
  CriticalCluster cl = build_cluster(pc, e1(1), 16, 2);
  CHECK(cl.a.cwiseAbs().maxCoeff() < 1e-12);
  AngleVerdict v = angle_verdict(cl);
  CHECK(v.weakly_hyperbolic);
  CHECK_FALSE(v.strictly_hyperbolic);
}

TEST_CASE("cluster speeds match finite-difference surface slopes") {
  // the Lienard wave has real, well-separated characteristic speeds, so the
  // finite-difference slopes of Im lambda_j are a meaningful oracle
  WaveProfile p = solve_catalog_profile("lienard");
  PeriodicCoefficients pc = PeriodicCoefficients::from_profile(p);
  const int M = 32;
  CriticalCluster cl = build_cluster(pc, e1(1), M, 3);
  CHECK(cl.projection_defect < 1e-8);
  CHECK(cl.h3_pass);

  const double scale = std::max(1.0, cl.a.cwiseAbs().maxCoeff());
  CHECK(cl.a.imag().cwiseAbs().maxCoeff() < 1e-8 * scale);

  Eigen::VectorXd fd = fd_characteristic_speeds(pc, e1(1), M, 3);
  Eigen::VectorXd a_sorted(3);
  for (int j = 0; j < 3; ++j) a_sorted[j] = cl.a[j].real();
  std::sort(a_sorted.data(), a_sorted.data() + 3);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(a_sorted[j] - fd[j]) < 1e-4 * scale);
}

TEST_CASE("pendulum averaged system is elliptic: speeds are a conjugate pair plus zero") {
  // Hamiltonian-type orbit families give a = {0, +ic, -ic}; the surfaces then
  // depart 0 along the real axis, which is exactly the (D1) failure mode
  WaveProfile p = pendulum_profile(1.5);
  PeriodicCoefficients pc = PeriodicCoefficients::from_profile(p);
  const int M = 32;
  CriticalCluster cl = build_cluster(pc, e1(1), M, 3);

  double scale = cl.a.cwiseAbs().maxCoeff();
  CHECK(cl.a.real().cwiseAbs().maxCoeff() < 1e-6 * scale);  // purely imaginary speeds
  CHECK(std::abs(cl.a[1]) < 1e-6 * scale);                  // middle branch is 0
  CHECK(std::abs(cl.a[0] - std::conj(cl.a[2])) < 1e-6 * scale);
  const double c = cl.a[2].imag();
  CHECK(c > 1.0);
  AngleVerdict v = angle_verdict(cl);
  CHECK_FALSE(v.weakly_hyperbolic);

  // oracle: the conjugate pair makes Re lambda grow linearly at rate +-c
  const double r = 1e-3;
  Eigen::VectorXd xi(1);
  xi << r;
  SpectrumSlice s = spectrum(assemble(pc, xi, M), 3);
  double re_max = -1e300;
  for (int j = 0; j < 3; ++j) re_max = std::max(re_max, s.eigenvalues[j].real());
  CHECK(re_max / r == doctest::Approx(c).epsilon(1e-2));
}

TEST_CASE("cluster speeds self-converge under doubled truncation") {
  WaveProfile p = pendulum_profile(1.2);
  PeriodicCoefficients pc = PeriodicCoefficients::from_profile(p);
  CriticalCluster c1 = build_cluster(pc, e1(1), 24, 3);
  CriticalCluster c2 = build_cluster(pc, e1(1), 48, 3);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(c1.a[j] - c2.a[j]) < 1e-8);
}

TEST_CASE("zero-frequency eigenfunction structure: derivative alignment and constant duals") {
  WaveProfile p = pendulum_profile(1.5);
  PeriodicCoefficients pc = PeriodicCoefficients::from_profile(p);
  CriticalCluster cl = build_cluster(pc, e1(1), 32, 3);
  BlochFactsReport rep = check_blochfacts(cl, p);
  CHECK(rep.translational_index >= 0);
  CHECK(rep.alignment > 1.0 - 1e-6);
  CHECK(rep.max_oscillation < 1e-5);
  CHECK(rep.structure_ok);
}

TEST_CASE("structure check is invariant under re-mixing of the cluster basis") {
  WaveProfile p = pendulum_profile(1.5);
  PeriodicCoefficients pc = PeriodicCoefficients::from_profile(p);
  const int M = 24;
  BlochOperator op = assemble(pc, Eigen::VectorXd::Zero(1), M);
  ZeroClusterBasis z = zero_cluster_basis(op, 1e-6 * coefficient_scale(pc));
  REQUIRE(z.eigenvalues.size() == 3);

  CriticalCluster base = build_cluster_from_basis(pc, e1(1), M, z);

  // random invertible mix Q: right -> right Q, left -> left Q^{-H} preserves
  // the spaces and the biorthonormal pairing
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  CMat Q(3, 3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) Q(i, j) = Cplx(g(rng), g(rng));
  ZeroClusterBasis mixed = z;
  mixed.right = z.right * Q;
  mixed.left = z.left * Q.inverse().adjoint();

  CriticalCluster cl = build_cluster_from_basis(pc, e1(1), M, mixed);
  for (int j = 0; j < 3; ++j) CHECK(std::abs(cl.a[j] - base.a[j]) < 1e-8);

  BlochFactsReport rep = check_blochfacts(cl, p);
  BlochFactsReport ref = check_blochfacts(base, p);
  CHECK(rep.translational_index == ref.translational_index);
  CHECK(rep.alignment == doctest::Approx(ref.alignment).epsilon(1e-8));
  CHECK(rep.max_oscillation < 1e-5);
}

TEST_CASE("surface continuation matches branches and recovers first-order slopes") {
  WaveProfile p = solve_catalog_profile("lienard");
  PeriodicCoefficients pc = PeriodicCoefficients::from_profile(p);
  CriticalCluster cl = build_cluster(pc, e1(1), 32, 3);
  DispersionSurface surf = continue_surfaces(pc, cl, 1e-3, 0.15, 20);
  CHECK(surf.matching_ok);
  CHECK(surf.min_overlap > 0.9);
  double scale = std::max(1.0, cl.a.cwiseAbs().maxCoeff());
  for (int j = 0; j < 3; ++j)
    CHECK(std::abs(surf.fitted_a[j] - cl.a[j].real()) < 0.05 * scale);
}

TEST_CASE("surfaces obey the conjugation symmetry in xi") {
  WaveProfile p = pendulum_profile(1.2);
  PeriodicCoefficients pc = PeriodicCoefficients::from_profile(p);
  const int M = 24;
  Eigen::VectorXd xi(1);
  xi << 0.37;
  SpectrumSlice sp = spectrum(assemble(pc, xi, M), 3);
  SpectrumSlice sm = spectrum(assemble(pc, (-xi).eval(), M), 3);
  std::vector<double> re_p(3), re_m(3);
  for (int j = 0; j < 3; ++j) {
    re_p[j] = sp.eigenvalues[j].real();
    re_m[j] = sm.eigenvalues[j].real();
  }
  // eigenvalues at -xi are the conjugates of those at xi (real operator)
  for (int j = 0; j < 3; ++j) {
    double best = 1e300;
    for (int k = 0; k < 3; ++k)
      best = std::min(best, std::abs(sm.eigenvalues[k] - std::conj(sp.eigenvalues[j])));
    CHECK(best < 1e-8 * std::max(1.0, sp.matrix_norm));
  }
}

TEST_CASE("averaged-system report covers the angle grid in two dimensions") {
  WaveProfile p = pendulum_profile(1.2, 96, 2);
  WhithamReport rep = whitham_report(p, 20, 8);
  REQUIRE(rep.angles.size() == 8);
  for (const auto& v : rep.angles) {
    CHECK(v.a.size() == 3);
    // angle continuity: speeds stay bounded by the d=1 scale
    CHECK(v.a.cwiseAbs().maxCoeff() < 10.0);
  }
  CHECK(rep.frequency == doctest::Approx(1.0 / p.X));
  CHECK(rep.speed == doctest::Approx(0.0));
  // diagnostic averages exist per spatial direction
  CHECK(rep.mean_flux.size() == 2);
}

TEST_CASE("two-dimensional cluster speeds match finite differences per angle") {
  WaveProfile p = pendulum_profile(1.2, 96, 2);
  PeriodicCoefficients pc = PeriodicCoefficients::from_profile(p);
  const int M = 20;
  for (int a = 0; a < 8; ++a) {
    double th = two_pi * a / 8;
    Eigen::VectorXd om(2);
    om << std::cos(th), std::sin(th);
    CriticalCluster cl = build_cluster(pc, om, M, 3);
    Eigen::VectorXd fd = fd_characteristic_speeds(pc, om, M, 3);
    Eigen::VectorXd a_sorted(3);
    for (int j = 0; j < 3; ++j) a_sorted[j] = cl.a[j].real();
    std::sort(a_sorted.data(), a_sorted.data() + 3);
    for (int j = 0; j < 3; ++j) CHECK(std::abs(a_sorted[j] - fd[j]) < 1e-4);
  }
}
