#ifndef WAVETRAIN_MODULATION_HPP
#define WAVETRAIN_MODULATION_HPP

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "wavetrain/dispersion.hpp"
#include "wavetrain/fit.hpp"
#include "wavetrain/fourier.hpp"
#include "wavetrain/profile.hpp"
#include "wavetrain/simulate.hpp"

namespace wavetrain {

struct ModulationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Modulation phase on a superdomain of `cells` periods: per-cell values plus
/// the smooth (low-passed, spectrally upsampled) field on the fine grid.
struct PsiField {
  Vec coarse;                // one value per period cell
  Vec fine;                  // upsampled to the simulation grid
  std::vector<int> flagged;  // cells where the Newton fit fell back
};

/// Extracts the modulation phase psi from snapshots around a fixed wave
/// profile, by either of two gauges:
///  - "projection": per-cell Newton solve of
///        <qtilde_1, u(. + psi) - ubar>_cell = 0,
///    the adjoint translational zero mode qtilde_1 mirroring the
///    translational kernel structure, then low-passed across cells;
///  - "fit": per-cell windowed phase fit, Newton on the scalar shift
///    minimizing the windowed L2 distance to the profile (window width two
///    periods), falling back to the projection value when nonconvergent.
class PhaseExtractor {
 public:
  explicit PhaseExtractor(const WaveProfile& p, int M = 32) : profile_(p) {
    PeriodicCoefficients pc = PeriodicCoefficients::from_profile(p);
    Eigen::VectorXd e1 = Eigen::VectorXd::Zero(pc.d());
    e1[0] = 1.0;
    CriticalCluster cl = build_cluster(pc, e1, M, p.n() + 1);
    BlochFactsReport facts = check_blochfacts(cl, p);
    if (!facts.structure_ok)
      throw ModulationError("no translational zero mode available for phase extraction");
    // real adjoint mode, normalized so <qtilde, ubar'>_cell = 1
    qt_coeffs_ = CMat::Zero(p.m(), p.n());
    CVec col = cl.qtilde0.col(facts.translational_index);
    for (int k = -M; k <= M; ++k) {
      if (2 * std::abs(k) >= p.m()) continue;
      int idx = k >= 0 ? k : k + p.m();
      for (int c = 0; c < p.n(); ++c) qt_coeffs_(idx, c) = col[(k + M) * p.n() + c];
    }
    // drop any residual imaginary part (the zero mode is real up to phase)
    Cplx pairing(0, 0);
    CMat dprof(p.m(), p.n());
    for (int c = 0; c < p.n(); ++c)
      dprof.col(c) = spectral_derivative_coeffs(p.fourier_coeffs.col(c));
    for (int c = 0; c < p.n(); ++c)
      pairing += (qt_coeffs_.col(c).adjoint() * dprof.col(c))(0, 0);
    if (std::abs(pairing) < 1e-8)
      throw ModulationError("adjoint mode pairs degenerately with the profile derivative");
    qt_coeffs_ /= std::conj(pairing);
  }

  const WaveProfile& profile() const { return profile_; }

  /// Profile value at position x (in periods).
  Vec ubar(double x) const { return trig_eval_cols(profile_.fourier_coeffs, x); }

  PsiField projection(const Mat& u, int cells) const {
    return extract(u, cells, Method::Projection);
  }
  PsiField fit(const Mat& u, int cells) const { return extract(u, cells, Method::Fit); }
  PsiField extract_named(const Mat& u, int cells, const std::string& method) const {
    if (method == "projection") return projection(u, cells);
    if (method == "fit") return fit(u, cells);
    throw ModulationError("unknown phase extraction method: " + method);
  }

  /// Residual v(x) = u(x + psi(x)) - ubar(x) by direct spectral resampling.
  Mat residual_direct(const Mat& u, const Vec& psi_fine, int cells) const {
    const int m = int(u.rows());
    CMat ucoef = fourier_coeffs_cols(u);
    Mat v(m, u.cols());
    const double L = double(cells);
    for (int i = 0; i < m; ++i) {
      double x = L * i / m;
      v.row(i) = eval_field(ucoef, (x + psi_fine[i]) / L) - ubar(x).transpose();
    }
    return v;
  }

  /// First-order surrogate v ~= u - ubar + ubar' psi.
  Mat residual_first_order(const Mat& u, const Vec& psi_fine, int cells) const {
    const int m = int(u.rows());
    Mat v(m, u.cols());
    const double L = double(cells);
    CMat dprof(profile_.m(), profile_.n());
    for (int c = 0; c < profile_.n(); ++c)
      dprof.col(c) = spectral_derivative_coeffs(profile_.fourier_coeffs.col(c));
    for (int i = 0; i < m; ++i) {
      double x = L * i / m;
      v.row(i) = u.row(i) - ubar(x).transpose() +
                 psi_fine[i] * trig_eval_cols(dprof, x).transpose();
    }
    return v;
  }

 private:
  enum class Method { Projection, Fit };

  static Eigen::RowVectorXd eval_field(const CMat& coeffs, double frac) {
    Eigen::RowVectorXd out(coeffs.cols());
    for (int c = 0; c < coeffs.cols(); ++c) out[c] = trig_eval_real(coeffs.col(c), frac);
    return out;
  }

  static constexpr int kQuadPerCell = 96;  // cell quadrature nodes; resolves
                                           // products of adjoint-mode and data
                                           // harmonics, not tied to the grid

  PsiField extract(const Mat& u, int cells, Method method) const {
    const int m = int(u.rows());
    if (m % cells != 0) throw ModulationError("grid does not tile the period cells");
    const double L = double(cells);
    CMat ucoef = fourier_coeffs_cols(u);
    CMat duc = ucoef;
    for (int c = 0; c < ucoef.cols(); ++c)
      duc.col(c) = spectral_derivative_coeffs(ucoef.col(c), L);

    PsiField out;
    out.coarse = Vec::Zero(cells);
    for (int j = 0; j < cells; ++j) {
      double psi = solve_cell_projection(ucoef, duc, j, kQuadPerCell, L);
      if (method == Method::Fit) {
        std::optional<double> fitted = solve_cell_fit(ucoef, duc, j, kQuadPerCell, L, psi);
        if (fitted) {
          psi = *fitted;
        } else {
          out.flagged.push_back(j);
        }
      }
      out.coarse[j] = psi;
    }
    // low-pass across cells (keeps wavelengths of four cells and longer)
    CVec ch = fourier_coeffs(out.coarse);
    for (int k = 0; k < cells; ++k)
      if (4 * std::abs(fft_freq(k, cells)) > cells) ch[k] = 0.0;
    out.coarse = fourier_synthesis_real(ch);
    // spectral upsampling, coarse samples anchored at the cell centers
    out.fine = Vec::Zero(m);
    for (int i = 0; i < m; ++i) {
      double x = L * i / m;
      out.fine[i] = trig_eval_real(ch, (x - 0.5) / L);
    }
    return out;
  }

  /// Newton solve of <qtilde, u(. + psi) - ubar>_cell = 0 for one cell.
  double solve_cell_projection(const CMat& ucoef, const CMat& duc, int j, int q,
                               double L) const {
    double psi = 0.0;
    for (int iter = 0; iter < 50; ++iter) {
      double val = 0.0, der = 0.0;
      for (int i = 0; i < q; ++i) {
        double x = j + double(i) / q;
        Eigen::RowVectorXd qt = eval_field(qt_coeffs_, x);
        Eigen::RowVectorXd diff =
            eval_field(ucoef, (x + psi) / L) - ubar(x).transpose();
        Eigen::RowVectorXd du = eval_field(duc, (x + psi) / L);
        val += qt.dot(diff);
        der += qt.dot(du);
      }
      val /= q;
      der /= q;
      if (std::abs(der) < 0.05)
        throw ModulationError("projection gauge degenerate in cell " + std::to_string(j));
      double step = val / der;
      psi -= step;
      if (std::abs(step) < 1e-13) break;
    }
    return psi;
  }

  /// Windowed phase fit: Gauss-Newton on the scalar shift over a two-period
  /// cosine-squared window centered on the cell.
  std::optional<double> solve_cell_fit(const CMat& ucoef, const CMat& duc, int j, int q,
                                       double L, double seed) const {
    const double center = j + 0.5;
    const int half = 2 * q;  // one period each side, cell-grid resolution
    double psi = seed;
    for (int iter = 0; iter < 40; ++iter) {
      double grad = 0.0, hess = 0.0;
      for (int i = -half; i <= half; ++i) {
        double x = center + double(i) / (2.0 * q);
        double w = std::cos(0.5 * two_pi * (x - center) / 2.0);
        w = w * w;
        Eigen::RowVectorXd diff = eval_field(ucoef, (x + psi) / L) - ubar(x).transpose();
        Eigen::RowVectorXd du = eval_field(duc, (x + psi) / L);
        grad += w * diff.dot(du);
        hess += w * du.squaredNorm();
      }
      if (hess <= 1e-12) return std::nullopt;
      double step = grad / hess;
      psi -= step;
      if (std::abs(psi - seed) > 0.5) return std::nullopt;  // left the basin
      if (std::abs(step) < 1e-13) return psi;
    }
    return std::nullopt;
  }

  const WaveProfile& profile_;
  CMat qt_coeffs_;  // adjoint translational mode, profile-grid coefficients
};

// ---------------------------------------------------------------------------
// Time-resolved track
// ---------------------------------------------------------------------------

struct TrackRow {
  double t = 0.0;
  double v_l2 = 0.0, v_linf = 0.0, v_hk = 0.0;
  double psi_l2 = 0.0, psi_linf = 0.0;
  double psi_x_l2 = 0.0, psi_x_linf = 0.0, psi_t_l2 = 0.0;
  double mod_hk = 0.0;  // |(psi_t, psi_x)|_{H^K}
  double zeta = 0.0;
};

struct ModulationTrack {
  std::vector<double> times;
  std::vector<Vec> psi;        // fine-grid field per snapshot
  std::vector<Vec> psi_x;      // spectral x-derivative
  std::vector<Vec> psi_t;      // centered time differences
  std::vector<Mat> v;          // direct residual per snapshot
  std::vector<TrackRow> norms;
  int cells = 0;
  int K = 4;

  double length() const { return double(cells); }
};

/// Builds the track from (time, snapshot) pairs on a `cells`-period domain.
inline ModulationTrack build_track(const std::vector<double>& times,
                                   const std::vector<Mat>& snapshots,
                                   const PhaseExtractor& ex, int cells,
                                   const std::string& method = "projection", int K = 4) {
  const std::size_t N = times.size();
  if (snapshots.size() != N || N < 3)
    throw ModulationError("track needs at least three aligned snapshots");
  ModulationTrack tr;
  tr.times = times;
  tr.cells = cells;
  tr.K = std::min(K, 4);
  const double L = double(cells);
  for (std::size_t i = 0; i < N; ++i) {
    PsiField f = ex.extract_named(snapshots[i], cells, method);
    tr.psi.push_back(f.fine);
    CVec pc = fourier_coeffs(f.fine);
    tr.psi_x.push_back(fourier_synthesis_real(spectral_derivative_coeffs(pc, L)));
    tr.v.push_back(ex.residual_direct(snapshots[i], f.fine, cells));
  }
  for (std::size_t i = 0; i < N; ++i) {
    std::size_t a = (i == 0) ? 0 : i - 1;
    std::size_t b = (i + 1 == N) ? N - 1 : i + 1;
    tr.psi_t.push_back(Vec((tr.psi[b] - tr.psi[a]) / (times[b] - times[a])));
  }
  double zeta = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    TrackRow row;
    row.t = times[i];
    row.v_l2 = l2_norm_periodic(tr.v[i], L);
    row.v_linf = linf_norm(tr.v[i]);
    row.v_hk = hk_norm_spectral(tr.v[i], tr.K, L);
    row.psi_l2 = l2_norm_periodic(Vec(tr.psi[i]), L);
    row.psi_linf = tr.psi[i].cwiseAbs().maxCoeff();
    row.psi_x_l2 = l2_norm_periodic(Vec(tr.psi_x[i]), L);
    row.psi_x_linf = tr.psi_x[i].cwiseAbs().maxCoeff();
    row.psi_t_l2 = l2_norm_periodic(Vec(tr.psi_t[i]), L);
    Mat mod(tr.psi_t[i].size(), 2);
    mod.col(0) = tr.psi_t[i];
    mod.col(1) = tr.psi_x[i];
    row.mod_hk = hk_norm_spectral(mod, tr.K, L);
    double amp = std::sqrt(row.v_hk * row.v_hk + row.mod_hk * row.mod_hk);
    zeta = std::max(zeta, amp * std::pow(1.0 + times[i], 0.25));
    row.zeta = zeta;
    tr.norms.push_back(row);
  }
  return tr;
}

// ---------------------------------------------------------------------------
// Decay fits
// ---------------------------------------------------------------------------

struct DecayFit {
  std::string quantity;
  double t0 = 0.0, t1 = 0.0;
  double exponent_fit = 0.0;
  double exponent_expected = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct InsufficientWindowError : ModulationError {
  InsufficientWindowError()
      : ModulationError("decay-fit window spans less than one decade in 1 + t") {}
};

inline DecayFit fit_decay_series(const std::string& quantity, const std::vector<double>& times,
                                 const std::vector<double>& values, double t0, double t1,
                                 double expected, double tol) {
  if (std::log10((1.0 + t1) / (1.0 + t0)) < 1.0) throw InsufficientWindowError();
  std::vector<double> ts, vs;
  for (std::size_t i = 0; i < times.size(); ++i)
    if (times[i] >= t0 && times[i] <= t1) {
      ts.push_back(times[i]);
      vs.push_back(values[i]);
    }
  if (ts.size() < 4) throw InsufficientWindowError();
  DecayFit f;
  f.quantity = quantity;
  f.t0 = t0;
  f.t1 = t1;
  f.exponent_expected = expected;
  f.tolerance = tol;
  f.exponent_fit = fit_loglog(ts, vs).slope;
  f.pass = std::abs(f.exponent_fit - expected) <= tol;
  return f;
}

/// Norm selector on a built track.
inline std::vector<double> track_series(const ModulationTrack& tr, const std::string& name) {
  std::vector<double> out;
  for (const TrackRow& r : tr.norms) {
    if (name == "v_l2") out.push_back(r.v_l2);
    else if (name == "v_linf") out.push_back(r.v_linf);
    else if (name == "psi_l2") out.push_back(r.psi_l2);
    else if (name == "psi_linf") out.push_back(r.psi_linf);
    else if (name == "mod_l2") out.push_back(std::hypot(r.psi_t_l2, r.psi_x_l2));
    else if (name == "zeta") out.push_back(r.zeta);
    else throw ModulationError("unknown track series: " + name);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Residual equation diagnostic
// ---------------------------------------------------------------------------

/// Relative residual of the exact perturbation identity
///   v_t - L v = (d_t - L)(ubar' psi) - Q_x + R_x + (d_t + d_x^2) S
/// at interior snapshot i, with
///   Q = F(ubar + v) - F(ubar) - dF(ubar) v,
///   R = v psi_t + v psi_xx + (ubar_x + v_x) psi_x^2 / (1 + psi_x),
///   S = -v psi_x,
/// in the rescaled co-moving units F(u) = X (f(u) - s u). Time derivatives
/// are centered differences of snapshots, space derivatives spectral; the
/// residual is reported relative to the largest participating term.
struct ResidualReport {
  double relative = 0.0;
  double q_bound_margin = 0.0;  // min over grid of c |v|^2 - |Q| (>= 0 expected)
};

/// `band_fraction` restricts the comparison to well-resolved long-wave
/// scales: at wavenumbers with stiff parabolic damping the integrator holds
/// slaved harmonics at amplitudes offset by O((k^2 dt)^2) from the continuum
/// balance, which the k^2 terms amplify into an h-independent floor. Both
/// sides are low-passed to |k| <= band_fraction * m before taking norms.
inline ResidualReport residual_equation_check(const ModulationTrack& tr,
                                              const WaveProfile& p, std::size_t i,
                                              double band_fraction = 1.0 / 12.0) {
  if (i == 0 || i + 1 >= tr.times.size())
    throw ModulationError("residual check needs an interior snapshot");
  const int m_grid = int(tr.v[i].rows());
  const int m = 3 * m_grid;  // upsampled working grid: products of fields with
                             // the background stay below the Nyquist frequency
  const int n = int(tr.v[i].cols());
  const double L = tr.length();
  const double dt2 = tr.times[i + 1] - tr.times[i - 1];

  auto up = [&](const Vec& f) { return trig_resample_real(f, m); };
  auto upm = [&](const Mat& f) {
    Mat out(m, f.cols());
    for (int c = 0; c < f.cols(); ++c) out.col(c) = trig_resample_real(Vec(f.col(c)), m);
    return out;
  };

  auto ddx = [&](const Mat& f) {
    Mat out(f.rows(), f.cols());
    for (int c = 0; c < f.cols(); ++c)
      out.col(c) = fourier_synthesis_real(
          spectral_derivative_coeffs(fourier_coeffs(Vec(f.col(c))), L));
    return out;
  };

  // profile data on the fine grid
  Mat ub(m, n), ubx(m, n);
  CMat dprof(p.m(), p.n());
  for (int c = 0; c < n; ++c)
    dprof.col(c) = spectral_derivative_coeffs(p.fourier_coeffs.col(c));
  for (int g = 0; g < m; ++g) {
    double x = L * g / m;
    ub.row(g) = trig_eval_cols(p.fourier_coeffs, x).transpose();
    ubx.row(g) = trig_eval_cols(dprof, x).transpose();
  }

  auto Lop = [&](const Mat& f) {
    // L f = f_xx - (dF(ubar) f)_x
    Mat Af(m, n);
    for (int g = 0; g < m; ++g) {
      Eigen::MatrixXd A = p.model->jacobian(0, ub.row(g).transpose());
      A -= p.s * Eigen::MatrixXd::Identity(n, n);
      Af.row(g) = (p.X * A * f.row(g).transpose()).transpose();
    }
    return Mat(ddx(ddx(f)) - ddx(Af));
  };

  Mat v = upm(tr.v[i]);
  Mat v_t = upm(Mat((tr.v[i + 1] - tr.v[i - 1]) / dt2));
  Vec psi = up(tr.psi[i]), psi_x = up(tr.psi_x[i]), psi_t = up(tr.psi_t[i]);
  Vec psi_xx = Vec(fourier_synthesis_real(
      spectral_derivative_coeffs(fourier_coeffs(psi_x), L)));
  Mat v_x = ddx(v);

  // w = ubar' psi at i-1, i, i+1 for the centered time derivative
  auto wfield = [&](std::size_t k) {
    Vec pk = up(tr.psi[k]);
    Mat w(m, n);
    for (int g = 0; g < m; ++g) w.row(g) = ubx.row(g) * pk[g];
    return w;
  };
  Mat w = wfield(i);
  Mat w_t = (wfield(i + 1) - wfield(i - 1)) / dt2;

  Mat Q(m, n);
  double q_margin = 1e300;
  double c_lip = 0.0;
  for (int g = 0; g < m; ++g) {
    Eigen::VectorXd u0 = ub.row(g).transpose();
    Eigen::VectorXd vv = v.row(g).transpose();
    Eigen::MatrixXd A0 = p.model->jacobian(0, u0);
    Q.row(g) =
        (p.X * (p.model->flux(0, u0 + vv) - p.model->flux(0, u0) - A0 * vv)).transpose();
    double vn = vv.norm();
    if (vn > 1e-14)
      for (double th : {0.25, 0.5, 0.75, 1.0}) {
        Eigen::MatrixXd dA = p.model->jacobian(0, u0 + th * vv) - A0;
        c_lip = std::max(c_lip, p.X * dA.norm() / (th * vn));
      }
  }
  for (int g = 0; g < m; ++g) {
    double vn = v.row(g).norm();
    q_margin = std::min(q_margin, c_lip * vn * vn - Q.row(g).norm() + 1e-14);
  }

  auto sfield = [&](std::size_t k) {
    // S = -v psi_x at snapshot k
    CVec pc = fourier_coeffs(tr.psi[k]);
    Vec px = up(Vec(fourier_synthesis_real(spectral_derivative_coeffs(pc, L))));
    Mat vk = upm(tr.v[k]);
    Mat s(m, n);
    for (int g = 0; g < m; ++g) s.row(g) = -vk.row(g) * px[g];
    return s;
  };
  Mat S = sfield(i);
  Mat S_t = (sfield(i + 1) - sfield(i - 1)) / dt2;

  Mat R(m, n);
  for (int g = 0; g < m; ++g) {
    double denom = 1.0 + psi_x[g];
    R.row(g) = v.row(g) * (psi_t[g] + psi_xx[g]) +
               (ubx.row(g) + v_x.row(g)) * (psi_x[g] * psi_x[g] / denom);
  }

  auto lowpass = [&](const Mat& f) {
    Mat out(f.rows(), f.cols());
    int kc = int(band_fraction * m_grid);
    for (int c = 0; c < f.cols(); ++c) {
      CVec fc = fourier_coeffs(Vec(f.col(c)));
      for (int g = 0; g < m; ++g)
        if (std::abs(fft_freq(g, m)) > kc) fc[g] = 0.0;
      out.col(c) = fourier_synthesis_real(fc);
    }
    return out;
  };

  Mat lhs = lowpass(v_t - Lop(v));
  Mat rhs = lowpass(w_t - Lop(w) - ddx(Q) + ddx(R) + S_t + ddx(ddx(S)));
  double scale =
      std::max({l2_norm_periodic(lowpass(v_t), L), l2_norm_periodic(lowpass(Lop(v)), L),
                l2_norm_periodic(lowpass(w_t - Lop(w)), L),
                l2_norm_periodic(lowpass(ddx(Q)), L), 1e-300});
  ResidualReport rep;
  rep.relative = l2_norm_periodic(Mat(lhs - rhs), L) / scale;
  rep.q_bound_margin = q_margin;
  return rep;
}

// ---------------------------------------------------------------------------
// Closure diagnostic
// ---------------------------------------------------------------------------

struct ZetaReport {
  std::vector<double> zeta;
  double C_min = 0.0;        // minimal C with zeta <= C (E0 + zeta^2) along the track
  double small_root = 0.0;   // 2 C E0
  bool below_small_root = false;
};

inline ZetaReport zeta_track(const ModulationTrack& tr, double E0) {
  ZetaReport rep;
  for (const TrackRow& r : tr.norms) rep.zeta.push_back(r.zeta);
  for (double z : rep.zeta) {
    double denom = E0 + z * z;
    if (denom > 0) rep.C_min = std::max(rep.C_min, z / denom);
  }
  rep.small_root = 2.0 * rep.C_min * E0;
  rep.below_small_root =
      rep.zeta.empty() || rep.zeta.back() <= rep.small_root + 1e-12;
  return rep;
}

}  // namespace wavetrain

#endif
