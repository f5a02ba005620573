#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include "wavetrain/dispersion.hpp"
#include "wavetrain/modulation.hpp"
#include "wavetrain/profile.hpp"
#include "wavetrain/simulate.hpp"

using namespace wavetrain;

namespace {

const WaveProfile& pendulum_profile() {
  static WaveProfile p = solve_catalog_profile("pendulum");
  return p;
}

const WaveProfile& lienard_profile() {
  static WaveProfile p = solve_catalog_profile("lienard");
  return p;
}

const PhaseExtractor& pendulum_extractor() {
  static PhaseExtractor ex(pendulum_profile(), 32);
  return ex;
}

// Profile tiled over `cells` periods, evaluated at x - shift(x).
Mat shifted_profile_samples(const WaveProfile& p, int cells, int per_cell,
                            const std::function<double(double)>& shift) {
  const int m = cells * per_cell;
  Mat u(m, p.n());
  for (int i = 0; i < m; ++i) {
    double x = double(cells) * i / m;
    u.row(i) = trig_eval_cols(p.fourier_coeffs, x - shift(x)).transpose();
  }
  return u;
}

// Spectral resampling of a snapshot at x - c (periodic shift of the data).
Mat shift_samples(const Mat& u, int cells, double c) {
  CMat coef = fourier_coeffs_cols(u);
  Mat out(u.rows(), u.cols());
  const double L = double(cells);
  for (int i = 0; i < u.rows(); ++i) {
    double x = L * i / double(u.rows());
    for (int col = 0; col < u.cols(); ++col)
      out(i, col) = trig_eval_real(coef.col(col), (x - c) / L);
  }
  return out;
}

}  // namespace

TEST_CASE("exact translate recovered to 1e-8 by both gauges") {
  const WaveProfile& p = pendulum_profile();
  const PhaseExtractor& ex = pendulum_extractor();
  const int cells = 8, per_cell = 32;
  const double c = 0.137;
  Mat u = shifted_profile_samples(p, cells, per_cell, [&](double) { return c; });

  PsiField proj = ex.projection(u, cells);
  PsiField fit = ex.fit(u, cells);
  CHECK((proj.fine.array() - c).abs().maxCoeff() < 1e-8);
  CHECK((fit.fine.array() - c).abs().maxCoeff() < 1e-8);
  CHECK(fit.flagged.empty());

  // residual of the exactly translated wave vanishes to gauge accuracy
  Mat v = ex.residual_direct(u, proj.fine, cells);
  CHECK(linf_norm(v) < 1e-6);
}

TEST_CASE("gauge consistency: pre-shifted data returns psi + c") {
  const WaveProfile& p = pendulum_profile();
  const PhaseExtractor& ex = pendulum_extractor();
  const int cells = 8, per_cell = 32;
  const int m = cells * per_cell;

  // profile plus a smooth bump perturbation
  Mat u(m, p.n());
  for (int i = 0; i < m; ++i) {
    double x = double(cells) * i / m;
    u.row(i) = trig_eval_cols(p.fourier_coeffs, x).transpose();
    double g = std::exp(-0.5 * (x - 4.0) * (x - 4.0));
    u(i, 0) += 1e-2 * g;
  }
  // modest shift: gauge values are only defined modulo the period, so the
  // per-cell solves must stay within the same branch of translates
  const double c = 0.07;
  Mat uc = shift_samples(u, cells, c);

  // shifting the data by a grid-commensurate amount is not required: the
  // per-cell solves shift exactly because the sampled equation is identical
  PsiField a_proj = ex.projection(u, cells);
  PsiField b_proj = ex.projection(uc, cells);
  CHECK((b_proj.fine - a_proj.fine - Vec::Constant(m, c)).cwiseAbs().maxCoeff() < 1e-8);

  PsiField a_fit = ex.fit(u, cells);
  PsiField b_fit = ex.fit(uc, cells);
  CHECK((b_fit.fine - a_fit.fine - Vec::Constant(m, c)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("biorthogonality: non-translational zero modes produce no phase") {
  const WaveProfile& p = lienard_profile();
  PhaseExtractor ex(p, 32);
  PeriodicCoefficients pc = PeriodicCoefficients::from_profile(p);
  Eigen::VectorXd e1 = Eigen::VectorXd::Zero(1);
  e1[0] = 1.0;
  CriticalCluster cl = build_cluster(pc, e1, 32, p.n() + 1);
  BlochFactsReport facts = check_blochfacts(cl, p);
  REQUIRE(facts.structure_ok);

  const int cells = 4, per_cell = 64;
  const int m = cells * per_cell;
  const double delta = 1e-4;
  for (int j = 0; j < cl.count; ++j) {
    if (j == facts.translational_index) continue;
    // real-ize the kernel vector (distinct real speeds: real up to phase)
    CVec col = cl.q0.col(j);
    int imax = 0;
    col.cwiseAbs().maxCoeff(&imax);
    col /= col[imax] / std::abs(col[imax]);

    Mat u(m, p.n());
    double sup = 0.0;
    for (int i = 0; i < m; ++i) {
      double x = double(cells) * i / m;
      CVec w = eval_stacked(col, cl.M, p.n(), x);
      sup = std::max(sup, w.real().cwiseAbs().maxCoeff());
      u.row(i) = trig_eval_cols(p.fourier_coeffs, x).transpose() +
                 delta * w.real().transpose();
    }
    REQUIRE(sup > 0.3);  // the real part carries the mode
    PsiField f = ex.projection(u, cells);
    CHECK(f.fine.cwiseAbs().maxCoeff() < 1e-3 * delta);
  }
}

TEST_CASE("slowly varying shift: psi_x invariant and second-order residual gap") {
  const WaveProfile& p = pendulum_profile();
  const PhaseExtractor& ex = pendulum_extractor();
  const int cells = 8, per_cell = 32;

  auto gap = [&](double c) {
    auto shift = [&](double x) { return c * std::sin(two_pi * x / cells); };
    Mat u = shifted_profile_samples(p, cells, per_cell, shift);
    PsiField f = ex.projection(u, cells);
    CVec pcav = fourier_coeffs(f.fine);
    Vec px = fourier_synthesis_real(spectral_derivative_coeffs(pcav, double(cells)));
    CHECK(px.cwiseAbs().maxCoeff() < 1.0);
    Mat vd = ex.residual_direct(u, f.fine, cells);
    Mat vf = ex.residual_first_order(u, f.fine, cells);
    return linf_norm(Mat(vd - vf));
  };
  double g1 = gap(0.05);
  double g2 = gap(0.025);
  CHECK(g1 / g2 > 3.0);   // the two residual definitions agree to O(|psi|^2)
  CHECK(g1 / g2 < 5.5);
}

TEST_CASE("gauges agree on modulation-dominated data") {
  // fields ubar(x - phi(x)) plus a small rough residual: when the deviation
  // is carried by the phase, the projection and windowed-fit gauges must
  // agree to within 15% in relative L2
  const WaveProfile& p = pendulum_profile();
  const PhaseExtractor& ex = pendulum_extractor();
  const int cells = 16, per_cell = 32;
  const int m = cells * per_cell;
  for (int s = 0; s < 3; ++s) {
    Mat u(m, p.n());
    for (int i = 0; i < m; ++i) {
      double x = double(cells) * i / m;
      double phi = 0.02 * (1.0 + 0.3 * s) * std::sin(two_pi * x / cells + 0.7 * s);
      u.row(i) = trig_eval_cols(p.fourier_coeffs, x - phi).transpose();
      u(i, 0) += 2e-4 * std::cos(two_pi * 5.0 * x / cells + 0.3 * s);
    }
    PsiField a = ex.projection(u, cells);
    PsiField b = ex.fit(u, cells);
    double denom = l2_norm_periodic(a.fine, double(cells));
    REQUIRE(denom > 1e-6);
    CHECK(l2_norm_periodic(Vec(a.fine - b.fine), double(cells)) / denom < 0.15);
  }
}

TEST_CASE("simulation track: invariants, norm consistency, closure diagnostic") {
  const WaveProfile& p = pendulum_profile();
  const PhaseExtractor& ex = pendulum_extractor();
  DomainSpec dom{16, 16};
  PerturbationSpec pert;
  pert.shape = PerturbationSpec::Shape::Gaussian;
  pert.amplitude = 1e-3;
  pert.width = 2.0;
  pert.component = 0;
  Simulation sim = Simulation::from_profile(p, dom, pert);
  double E0 = sim.initial_norm();

  // the profile is not asymptotically stable (deviation grows ~ e^{3t});
  // track it while the wave is still close to a modulated profile
  std::vector<double> times;
  std::vector<Mat> snaps;
  times.push_back(sim.t());
  snaps.push_back(sim.state());
  for (int k = 1; k <= 8; ++k) {
    sim.run(0.25 * k);
    times.push_back(sim.t());
    snaps.push_back(sim.state());
  }

  ModulationTrack proj = build_track(times, snaps, ex, dom.cells, "projection");

  // invariants along the track
  for (const TrackRow& r : proj.norms) {
    CHECK(r.psi_x_linf < 1.0);
    CHECK(std::isfinite(r.v_hk));
  }

  // norm consistency: |u - ubar|_2 <= |v|_2 + sup|u'| |psi|_2
  {
    std::size_t i = times.size() - 1;
    Mat dev = snaps[i] - sim.background();
    CMat coef = fourier_coeffs_cols(snaps[i]);
    double sup_du = 0.0;
    for (int c = 0; c < coef.cols(); ++c) {
      Vec du = fourier_synthesis_real(
          spectral_derivative_coeffs(coef.col(c), proj.length()));
      sup_du = std::max(sup_du, du.cwiseAbs().maxCoeff());
    }
    double lhs = l2_norm_periodic(dev, proj.length());
    double rhs = proj.norms[i].v_l2 + sup_du * proj.norms[i].psi_l2;
    CHECK(lhs <= rhs * (1.0 + 1e-6) + 1e-12);
  }

  // zeta is a running supremum and satisfies its own closure inequality
  for (std::size_t i = 1; i < proj.norms.size(); ++i)
    CHECK(proj.norms[i].zeta >= proj.norms[i - 1].zeta - 1e-15);
  ZetaReport zr = zeta_track(proj, E0);
  for (double z : zr.zeta) CHECK(z <= zr.C_min * (E0 + z * z) + 1e-10);
}

TEST_CASE("zeta amplitude sweep is approximately linear in the initial size") {
  const WaveProfile& p = pendulum_profile();
  const PhaseExtractor& ex = pendulum_extractor();
  DomainSpec dom{8, 16};
  auto sup_zeta = [&](double amp) {
    PerturbationSpec pert;
    pert.shape = PerturbationSpec::Shape::Gaussian;
    pert.amplitude = amp;
    pert.width = 1.0;
    pert.component = 0;
    Simulation sim = Simulation::from_profile(p, dom, pert);
    std::vector<double> times{sim.t()};
    std::vector<Mat> snaps{sim.state()};
    for (int k = 1; k <= 6; ++k) {
      sim.run(0.25 * k);
      times.push_back(sim.t());
      snaps.push_back(sim.state());
    }
    ModulationTrack tr = build_track(times, snaps, ex, dom.cells, "projection");
    return tr.norms.back().zeta;
  };
  double z1 = sup_zeta(1e-4);
  double z2 = sup_zeta(1e-3);
  CHECK(z2 / z1 > 3.0);
  CHECK(z2 / z1 < 30.0);
}

TEST_CASE("perturbation equation residual is small and second order in cadence") {
  const WaveProfile& p = pendulum_profile();
  const PhaseExtractor& ex = pendulum_extractor();
  DomainSpec dom{16, 16};
  PerturbationSpec pert;
  pert.shape = PerturbationSpec::Shape::Gaussian;
  // the identity holds at any time the gauge is well posed; the deviation
  // grows ~ e^{3t} (the profile is not asymptotically stable), so verify at
  // t = 2 where it is still a small modulated perturbation
  pert.amplitude = 1e-5;
  pert.width = 2.0;
  pert.component = 0;
  Simulation sim = Simulation::from_profile(p, dom, pert);

  // five snapshots at spacing 0.05 around t = 2
  std::vector<double> times;
  std::vector<Mat> snaps;
  for (int k = 0; k < 5; ++k) {
    sim.run(1.9 + 0.05 * k);
    times.push_back(sim.t());
    snaps.push_back(sim.state());
  }

  ModulationTrack fine = build_track(times, snaps, ex, dom.cells, "projection");
  ModulationTrack coarse = build_track({times[0], times[2], times[4]},
                                       {snaps[0], snaps[2], snaps[4]}, ex, dom.cells,
                                       "projection");
  ResidualReport rf = residual_equation_check(fine, p, 2);
  ResidualReport rc = residual_equation_check(coarse, p, 1);
  CHECK(rc.relative < 0.05);
  CHECK(rc.relative / rf.relative > 2.5);  // centered differences: order two
  CHECK(rf.q_bound_margin > -1e-12);       // |Q| <= c |v|^2 pointwise
}

TEST_CASE("pure-diffusion control run matches theorem decay exponents") {
  auto heat = std::make_shared<const ModelSystem>(make_heat(2, 1));
  DomainSpec dom{512, 2};
  PerturbationSpec pert;
  pert.shape = PerturbationSpec::Shape::Gaussian;
  pert.amplitude = 0.1;
  pert.width = 4.0;
  pert.component = 0;
  Simulation sim =
      Simulation::from_constant(heat, Eigen::VectorXd::Zero(2), dom, pert, 1.0);

  std::vector<double> times, l2s, sups;
  auto record = [&](const Simulation& s) {
    Mat w = s.deviation();
    for (int c = 0; c < w.cols(); ++c) w.col(c).array() -= w.col(c).mean();
    times.push_back(s.t());
    l2s.push_back(l2_norm_periodic(w, double(dom.cells)));
    sups.push_back(linf_norm(w));
  };
  record(sim);
  for (int k = 1; k <= 320; ++k) {
    sim.run(double(k));
    record(sim);
  }

  DecayFit f2 = fit_decay_series("v_l2", times, l2s, 20.0, 320.0, -0.25, 0.03);
  CHECK(f2.pass);
  DecayFit fi = fit_decay_series("v_linf", times, sups, 20.0, 320.0, -0.5, 0.08);
  CHECK(fi.pass);
  CHECK(fi.exponent_fit <= f2.exponent_fit);  // sup norm decays at least as fast

  CHECK_THROWS_AS(fit_decay_series("v_l2", times, l2s, 20.0, 100.0, -0.25, 0.03),
                  InsufficientWindowError);
}
