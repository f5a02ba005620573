#ifndef WAVETRAIN_PROFILE_HPP
#define WAVETRAIN_PROFILE_HPP

#include <Eigen/Dense>
#include <json.hpp>

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>

#include "wavetrain/fourier.hpp"
#include "wavetrain/model.hpp"
#include "wavetrain/ode.hpp"

namespace wavetrain {

struct ProfileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoConvergenceError : ProfileError {
  double last_residual;
  explicit NoConvergenceError(double r)
      : ProfileError("profile Newton iteration did not converge, last residual " +
                     std::to_string(r)),
        last_residual(r) {}
};
struct DegenerateOrbitError : ProfileError {
  DegenerateOrbitError() : ProfileError("orbit collapsed to a constant state") {}
};

/// Periodic traveling-wave profile, stored on the rescaled unit cell:
/// samples are ubar(tau), tau in [0,1), with the ODE
///   d ubar / d tau = X * (f^1(ubar) - s*ubar - q).
/// All downstream spectral computations work in these rescaled units
/// (lengths scaled by 1/X, time by 1/X^2), where the paper's period-one
/// normalization applies verbatim.
struct WaveProfile {
  std::shared_ptr<const ModelSystem> model;
  double X = 0.0;                 // physical period
  double s = 0.0;                 // wave speed
  Eigen::VectorXd q;              // integration constant
  Eigen::VectorXd nu;             // propagation direction (normalized to e1)
  Mat samples;                    // m x n, ubar at tau_i = i/m
  CMat fourier_coeffs;            // m x n columnwise coefficients
  double residual_norm = 0.0;     // max-norm of collocation residual

  int m() const { return int(samples.rows()); }
  int n() const { return int(samples.cols()); }

  /// d ubar / d tau on the grid, computed spectrally.
  Mat derivative_samples() const {
    CMat dc(fourier_coeffs.rows(), fourier_coeffs.cols());
    for (int c = 0; c < fourier_coeffs.cols(); ++c)
      dc.col(c) = spectral_derivative_coeffs(fourier_coeffs.col(c));
    return fourier_synthesis_cols(dc);
  }

  double oscillation() const {
    Mat dev = samples.rowwise() - samples.colwise().mean();
    return dev.cwiseAbs().maxCoeff();
  }

  /// Rescaled linearization coefficient A^j(tau):
  ///   A^1 = X*(Df^1(ubar) - s I)   (co-moving frame),
  ///   A^j = X*Df^j(ubar), j != 1.
  Mat coefficient_samples(int j) const {
    const int nn = n();
    Mat A(m(), nn * nn);
    for (int i = 0; i < m(); ++i) {
      Eigen::MatrixXd Aj = model->jacobian(j, samples.row(i).transpose());
      if (j == 0) Aj -= s * Eigen::MatrixXd::Identity(nn, nn);
      Aj *= X;
      for (int r = 0; r < nn; ++r)
        for (int c = 0; c < nn; ++c) A(i, r * nn + c) = Aj(r, c);
    }
    return A;
  }
};

struct ProfileGuess {
  Mat samples;       // m x n closed curve in phase space
  double X = 6.28;   // period guess
};

/// Ellipse guess around a phase-space center, the natural seed for libration
/// orbits of pendulum-type profile fields.
inline ProfileGuess make_loop_guess(const Eigen::VectorXd& center, double amplitude, int m,
                                    double period_guess = two_pi) {
  ProfileGuess g;
  g.X = period_guess;
  g.samples.resize(m, center.size());
  for (int i = 0; i < m; ++i) {
    double th = two_pi * i / m;
    Eigen::VectorXd u = center;
    u[0] += amplitude * std::sin(th);
    if (center.size() > 1) u[1] += amplitude * std::cos(th);
    g.samples.row(i) = u.transpose();
  }
  return g;
}

struct ProfileOptions {
  double tol = 1e-12;
  int max_iters = 60;
  double degenerate_tol = 1e-6;
  // Orbit families (Hamiltonian-type fields) need the radial pin to select a
  // unique member; for isolated hyperbolic cycles the pin is inconsistent and
  // must be disabled.
  bool radial_pin = true;
};

/// Newton iteration on the Fourier-collocation residual
///   D ubar - X*(f^1(ubar) - s ubar - q) = 0  on tau in [0,1),
/// augmented with the integral phase condition <ubar - guess, guess'> = 0
/// and the period X as an unknown.
inline WaveProfile solve_profile(std::shared_ptr<const ModelSystem> model,
                                 const ProfileGuess& guess, double s,
                                 const Eigen::VectorXd& q,
                                 const ProfileOptions& opts = {}) {
  const int m = int(guess.samples.rows());
  const int n = model->n();
  if (int(guess.samples.cols()) != n) throw ProfileError("guess has wrong state dimension");

  const Mat D = differentiation_matrix(m);
  Mat guess_prime(m, n);
  {
    for (int c = 0; c < n; ++c) guess_prime.col(c) = D * guess.samples.col(c);
  }
  if (guess_prime.cwiseAbs().maxCoeff() < 1e-12) throw DegenerateOrbitError();

  auto field = [&](const Eigen::VectorXd& u) {
    return Eigen::VectorXd(model->flux(0, u) - s * u - q);
  };

  // Radial pinning direction: orbit families (energy-like parameter) are cut
  // by requiring the deviation from the guess to be orthogonal to the guess's
  // radial direction as well as its tangent. Both rows are trapezoid
  // quadratures of continuum integrals, so the selected orbit is
  // discretization-independent up to spectral accuracy.
  Mat guess_radial = guess.samples.rowwise() - guess.samples.colwise().mean();

  const int nz = m * n + 1;  // unknowns: samples (component-major) + X
  // equations: collocation + phase (+ radial pin for orbit families)
  const int nr = m * n + 1 + (opts.radial_pin ? 1 : 0);
  Eigen::VectorXd z(nz);
  for (int c = 0; c < n; ++c) z.segment(c * m, m) = guess.samples.col(c);
  z[nz - 1] = guess.X;

  auto unpack = [&](const Eigen::VectorXd& zz, Mat& U, double& X) {
    U.resize(m, n);
    for (int c = 0; c < n; ++c) U.col(c) = zz.segment(c * m, m);
    X = zz[nz - 1];
  };

  auto residual = [&](const Eigen::VectorXd& zz) {
    Mat U;
    double X;
    unpack(zz, U, X);
    Eigen::VectorXd r(nr);
    for (int c = 0; c < n; ++c) r.segment(c * m, m) = D * U.col(c);
    for (int i = 0; i < m; ++i) {
      Eigen::VectorXd g = field(U.row(i).transpose());
      for (int c = 0; c < n; ++c) r[c * m + i] -= X * g[c];
    }
    double phase = 0.0, radial = 0.0;
    for (int i = 0; i < m; ++i) {
      phase += (U.row(i) - guess.samples.row(i)).dot(guess_prime.row(i)) / m;
      radial += (U.row(i) - guess.samples.row(i)).dot(guess_radial.row(i)) / m;
    }
    r[m * n] = phase;
    if (opts.radial_pin) r[m * n + 1] = radial;
    return r;
  };

  Eigen::VectorXd r = residual(z);
  double rnorm = r.cwiseAbs().maxCoeff();
  for (int iter = 0; iter < opts.max_iters; ++iter) {
    if (rnorm <= opts.tol) break;
    Mat U;
    double X;
    unpack(z, U, X);
    Mat J = Mat::Zero(nr, nz);
    for (int c = 0; c < n; ++c) J.block(c * m, c * m, m, m) = D;
    for (int i = 0; i < m; ++i) {
      Eigen::VectorXd u = U.row(i).transpose();
      Eigen::MatrixXd Dg = model->jacobian(0, u) - s * Eigen::MatrixXd::Identity(n, n);
      Eigen::VectorXd g = field(u);
      for (int c = 0; c < n; ++c) {
        for (int cc = 0; cc < n; ++cc) J(c * m + i, cc * m + i) -= X * Dg(c, cc);
        J(c * m + i, nz - 1) = -g[c];
        J(m * n, c * m + i) = guess_prime(i, c) / m;
        if (opts.radial_pin) J(m * n + 1, c * m + i) = guess_radial(i, c) / m;
      }
    }
    // Orbit families (Hamiltonian-type profile fields) leave a one-parameter
    // near-null direction at fixed (s, q); the phase and radial rows cut it,
    // and the rectangular Gauss-Newton step handles both the family case
    // (rank nz, consistent) and residual-rank degeneracies.
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(J);
    cod.setThreshold(1e-9);
    Eigen::VectorXd dz = cod.solve(-r);
    // backtracking line search
    double step = 1.0;
    Eigen::VectorXd z_new;
    double rnorm_new = rnorm;
    for (int ls = 0; ls < 8; ++ls) {
      z_new = z + step * dz;
      Eigen::VectorXd r_new = residual(z_new);
      rnorm_new = r_new.cwiseAbs().maxCoeff();
      if (rnorm_new < rnorm || rnorm < 1e-10) {
        r = r_new;
        break;
      }
      step *= 0.5;
    }
    if (!(rnorm_new < rnorm) && rnorm > opts.tol) throw NoConvergenceError(rnorm);
    z = z_new;
    rnorm = rnorm_new;
  }
  if (rnorm > opts.tol) throw NoConvergenceError(rnorm);

  WaveProfile p;
  p.model = std::move(model);
  unpack(z, p.samples, p.X);
  if (p.X <= 0.0) throw ProfileError("Newton converged to nonpositive period");
  p.s = s;
  p.q = q;
  p.nu = Eigen::VectorXd::Zero(p.model->d());
  p.nu[0] = 1.0;
  p.fourier_coeffs = fourier_coeffs_cols(p.samples);
  p.residual_norm = rnorm;
  if (p.oscillation() < opts.degenerate_tol) throw DegenerateOrbitError();
  return p;
}

/// Standard profile for a builtin catalog system at s = 0, q = 0. Pendulum-type
/// fields have orbit families and use the radial pin to select the member at
/// the requested amplitude; the Lienard field has an isolated limit cycle and
/// the pin is disabled (the amplitude argument only seeds the guess).
inline WaveProfile solve_catalog_profile(const std::string& name, double amplitude = 1.5,
                                         int m = 160) {
  auto model = std::make_shared<ModelSystem>(builtin_model(name));
  const bool isolated_cycle = name.rfind("lienard", 0) == 0;
  ProfileGuess guess =
      make_loop_guess(Eigen::VectorXd::Zero(model->n()), isolated_cycle ? 2.0 : amplitude, m);
  ProfileOptions opts;
  opts.radial_pin = !isolated_cycle;
  return solve_profile(std::move(model), guess, 0.0, Eigen::VectorXd::Zero(2), opts);
}

// ---------------------------------------------------------------------------
// (H2) submersion check
// ---------------------------------------------------------------------------

struct SubmersionReport {
  int jacobian_rank = 0;
  Eigen::VectorXd singular_values;   // descending
  bool passes_H2 = false;
  int manifold_dimension_estimate = 0;  // n + d + 1 when H2 holds
  bool conditioning_warning = false;
};

/// Finite-difference rank test of the period map
///   H(X; a, s, nu, q) = u(X; a, s, nu, q) - a,
/// where u solves the profile ODE from u(0) = a. Full rank n is (H2).
inline SubmersionReport check_submersion(const ModelSystem& model, const WaveProfile& profile,
                                         double fd_step = 1e-6) {
  const int n = model.n();
  const int d = model.d();
  const int npar = 2 * n + d + 2;  // (X, a, s, nu, q)

  auto flow = [&](const Eigen::VectorXd& a, double s, const Eigen::VectorXd& nu,
                  const Eigen::VectorXd& q, double X) {
    Dopri5 ode([&](const Eigen::VectorXd& u) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
      for (int j = 0; j < d; ++j) g += nu[j] * model.flux(j, u);
      return Eigen::VectorXd(g - s * u - q);
    });
    return ode.integrate(a, 0.0, X);
  };

  Eigen::VectorXd a0 = profile.samples.row(0).transpose();
  Eigen::VectorXd q0 = profile.q;
  Eigen::VectorXd nu0 = profile.nu;
  const double s0 = profile.s;
  const double X0 = profile.X;

  auto H = [&](const Eigen::VectorXd& p) {
    double X = p[0];
    Eigen::VectorXd a = p.segment(1, n);
    double s = p[1 + n];
    Eigen::VectorXd nu = p.segment(2 + n, d);
    Eigen::VectorXd q = p.segment(2 + n + d, n);
    return Eigen::VectorXd(flow(a, s, nu, q, X) - a);
  };

  Eigen::VectorXd p0(npar);
  p0[0] = X0;
  p0.segment(1, n) = a0;
  p0[1 + n] = s0;
  p0.segment(2 + n, d) = nu0;
  p0.segment(2 + n + d, n) = q0;

  Mat DH(n, npar);
  for (int k = 0; k < npar; ++k) {
    Eigen::VectorXd pp = p0, pm = p0;
    double h = fd_step * std::max(1.0, std::abs(p0[k]));
    pp[k] += h;
    pm[k] -= h;
    DH.col(k) = (H(pp) - H(pm)) / (2 * h);
  }

  Eigen::JacobiSVD<Mat> svd(DH);
  SubmersionReport rep;
  rep.singular_values = svd.singularValues();
  const double smax = rep.singular_values[0];
  const double rank_tol = 1e-6 * std::max(1.0, smax);
  rep.jacobian_rank = int((rep.singular_values.array() > rank_tol).count());
  rep.passes_H2 = (rep.jacobian_rank == n);
  rep.manifold_dimension_estimate = npar - rep.jacobian_rank - 1;  // minus trivial X-translation pairing
  rep.conditioning_warning = smax > 0 && rep.singular_values[n - 1] / smax < 1e-10;
  return rep;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O
// ---------------------------------------------------------------------------

inline nlohmann::json profile_to_json(const WaveProfile& p) {
  nlohmann::json samples = nlohmann::json::array();
  for (int i = 0; i < p.m(); ++i)
    for (int c = 0; c < p.n(); ++c) samples.push_back(p.samples(i, c));
  return {{"model", model_to_json(*p.model)},
          {"X", p.X},
          {"s", p.s},
          {"q", std::vector<double>(p.q.data(), p.q.data() + p.q.size())},
          {"nu", std::vector<double>(p.nu.data(), p.nu.data() + p.nu.size())},
          {"m", p.m()},
          {"residual_norm", p.residual_norm},
          {"samples", samples}};
}

inline WaveProfile profile_from_json(const nlohmann::json& j) {
  WaveProfile p;
  p.model = std::make_shared<ModelSystem>(load_model(j.at("model")));
  p.X = j.at("X").get<double>();
  p.s = j.at("s").get<double>();
  auto qv = j.at("q").get<std::vector<double>>();
  p.q = Eigen::Map<const Eigen::VectorXd>(qv.data(), qv.size());
  auto nv = j.at("nu").get<std::vector<double>>();
  p.nu = Eigen::Map<const Eigen::VectorXd>(nv.data(), nv.size());
  const int m = j.at("m").get<int>();
  const int n = p.model->n();
  auto sv = j.at("samples").get<std::vector<double>>();
  if (int(sv.size()) != m * n) throw ProfileError("profile checkpoint: sample count mismatch");
  p.samples.resize(m, n);
  for (int i = 0; i < m; ++i)
    for (int c = 0; c < n; ++c) p.samples(i, c) = sv[i * n + c];
  p.fourier_coeffs = fourier_coeffs_cols(p.samples);
  p.residual_norm = j.at("residual_norm").get<double>();
  return p;
}

// ---------------------------------------------------------------------------
// Shooting oracle (test support): period of a closed orbit through (a, 0)
// via Poincare section u2 = 0, adaptive high-order integration.
// ---------------------------------------------------------------------------

inline double shooting_period(const ModelSystem& model, double s, const Eigen::VectorXd& q,
                              const Eigen::VectorXd& start, double t_max = 100.0) {
  Dopri5 ode(
      [&](const Eigen::VectorXd& u) {
        return Eigen::VectorXd(model.flux(0, u) - s * u - q);
      },
      1e-13, 1e-13);
  // return to the u2 = 0 section with the starting orientation
  Eigen::VectorXd f0 = model.flux(0, start) - s * start - q;
  const double orient = f0[1] >= 0 ? 1.0 : -1.0;
  auto event = [&](const Eigen::VectorXd& u) { return orient * u[1]; };
  return ode.first_crossing(start, event, 1e-3, t_max, 1e-2);
}

}  // namespace wavetrain

#endif
