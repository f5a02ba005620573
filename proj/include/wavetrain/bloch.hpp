#ifndef WAVETRAIN_BLOCH_HPP
#define WAVETRAIN_BLOCH_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "wavetrain/fourier.hpp"
#include "wavetrain/profile.hpp"

namespace wavetrain {

/// Fourier data of the periodic linearization coefficients A^j(x1) on the
/// unit cell (rescaled units). Supports profile-derived and constant cases.
class PeriodicCoefficients {
 public:
  static PeriodicCoefficients from_profile(const WaveProfile& p) {
    PeriodicCoefficients pc;
    pc.n_ = p.n();
    pc.d_ = p.model->d();
    pc.m_ = p.m();
    for (int j = 0; j < pc.d_; ++j)
      pc.coeffs_.push_back(fourier_coeffs_cols(p.coefficient_samples(j)).eval());
    return pc;
  }

  /// Constant-coefficient operator (heat / symbol tests): A^j(x1) = Aj.
  static PeriodicCoefficients constant(const std::vector<Mat>& A) {
    PeriodicCoefficients pc;
    pc.n_ = int(A[0].rows());
    pc.d_ = int(A.size());
    pc.m_ = 1;
    for (const Mat& Aj : A) {
      CMat c(1, pc.n_ * pc.n_);
      for (int r = 0; r < pc.n_; ++r)
        for (int cc = 0; cc < pc.n_; ++cc) c(0, r * pc.n_ + cc) = Aj(r, cc);
      pc.coeffs_.push_back(c);
    }
    return pc;
  }

  int n() const { return n_; }
  int d() const { return d_; }

  /// Fourier coefficient matrix \hat A^j_k (zero outside the resolved band).
  CMat coeff(int j, int k) const {
    CMat out = CMat::Zero(n_, n_);
    if (2 * std::abs(k) >= m_ && !(m_ == 1 && k == 0)) return out;
    int idx = k >= 0 ? k : k + m_;
    if (m_ == 1) {
      if (k != 0) return out;
      idx = 0;
    }
    for (int r = 0; r < n_; ++r)
      for (int c = 0; c < n_; ++c) out(r, c) = coeffs_[j](idx, r * n_ + c);
    return out;
  }

  /// Fraction of A^1 spectral mass outside |k| <= M.
  double tail_mass(int M) const {
    double total = 0.0, tail = 0.0;
    for (int i = 0; i < m_; ++i) {
      int k = fft_freq(i, m_);
      double mass = coeffs_[0].row(i).norm();
      total += mass;
      if (std::abs(k) > M) tail += mass;
    }
    return total > 0 ? tail / total : 0.0;
  }

 private:
  int n_ = 0, d_ = 0, m_ = 0;
  std::vector<CMat> coeffs_;
};

/// Galerkin (Hill's method) matrix of the Bloch operator
///   L_xi v = (d+i xi1)^2 v - (d+i xi1)(A^1 v) - i sum_{j>1} xi_j A^j v - |xi~|^2 v
/// in the basis e^{2 pi i k x1}, k = -M..M, blocks of size n, mode-major.
struct BlochOperator {
  Eigen::VectorXd xi;   // size d
  int M = 0;
  int n = 0;
  CMat matrix;
  bool truncation_warning = false;

  int dim() const { return (2 * M + 1) * n; }
};

inline BlochOperator assemble(const PeriodicCoefficients& pc, const Eigen::VectorXd& xi, int M) {
  if (M < 8) throw std::invalid_argument("assemble: truncation M must be >= 8");
  const int n = pc.n();
  const int N = (2 * M + 1) * n;
  BlochOperator op;
  op.xi = xi;
  op.M = M;
  op.n = n;
  op.truncation_warning = pc.tail_mass(M) > 1e-10;
  op.matrix = CMat::Zero(N, N);

  const double xi1 = xi[0];
  double xit_sq = 0.0;
  for (int j = 1; j < xi.size(); ++j) xit_sq += xi[j] * xi[j];

  for (int a = -M; a <= M; ++a) {
    const double mu = xi1 + two_pi * a;
    const int ra = (a + M) * n;
    for (int b = -M; b <= M; ++b) {
      const int cb = (b + M) * n;
      CMat block = CMat::Zero(n, n);
      if (a == b)
        block.diagonal().setConstant(Cplx(-mu * mu - xit_sq, 0.0));
      block -= Cplx(0.0, mu) * pc.coeff(0, a - b);
      for (int j = 1; j < pc.d(); ++j) block -= Cplx(0.0, xi[j]) * pc.coeff(j, a - b);
      op.matrix.block(ra, cb, n, n) = block;
    }
  }
  return op;
}

/// Stack the Fourier coefficients of an m-grid vector field into the
/// mode-major Galerkin layout of BlochOperator (truncated to -M..M).
inline CVec stack_coefficients(const CMat& field_coeffs, int M) {
  const int m = int(field_coeffs.rows());
  const int n = int(field_coeffs.cols());
  CVec v = CVec::Zero((2 * M + 1) * n);
  for (int i = 0; i < m; ++i) {
    int k = fft_freq(i, m);
    if (std::abs(k) > M || 2 * std::abs(k) >= m) continue;
    for (int c = 0; c < n; ++c) v[(k + M) * n + c] = field_coeffs(i, c);
  }
  return v;
}

/// Evaluate a stacked Galerkin coefficient vector at a physical point x1.
inline CVec eval_stacked(const CVec& v, int M, int n, double x1) {
  CVec out = CVec::Zero(n);
  for (int k = -M; k <= M; ++k) {
    Cplx ph = std::exp(Cplx(0.0, two_pi * k * x1));
    out += ph * v.segment((k + M) * n, n);
  }
  return out;
}

/// d/dx1 in the stacked layout.
inline CVec derivative_stacked(const CVec& v, int M, int n) {
  CVec out(v.size());
  for (int k = -M; k <= M; ++k)
    out.segment((k + M) * n, n) = Cplx(0.0, two_pi * k) * v.segment((k + M) * n, n);
  return out;
}

struct SpectrumSlice {
  Eigen::VectorXd xi;
  CVec eigenvalues;            // sorted by descending real part
  CMat right;                  // columns, biorthonormalized: left^H * right = I
  CMat left;
  Eigen::VectorXd residuals;   // ||L q - lambda q||_2 per unit-norm right pair
  bool near_jordan = false;
  double matrix_norm = 0.0;
};

/// Dense eigendecomposition; returns the `count` rightmost eigenvalues with
/// right and left eigenvectors, biorthogonally normalized <q~_i, q_j> = d_ij.
inline SpectrumSlice spectrum(const BlochOperator& op, int count) {
  const int N = op.dim();
  count = std::min(count, N);
  Eigen::ComplexEigenSolver<CMat> er(op.matrix, true);
  Eigen::ComplexEigenSolver<CMat> el(op.matrix.adjoint().eval(), true);

  std::vector<int> idx(N);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    return er.eigenvalues()[a].real() > er.eigenvalues()[b].real();
  });

  SpectrumSlice s;
  s.xi = op.xi;
  s.matrix_norm = op.matrix.norm();
  s.eigenvalues.resize(count);
  s.right.resize(N, count);
  s.left.resize(N, count);
  s.residuals.resize(count);

  std::vector<bool> used(N, false);
  for (int i = 0; i < count; ++i) {
    const int ri = idx[i];
    const Cplx lam = er.eigenvalues()[ri];
    s.eigenvalues[i] = lam;
    s.right.col(i) = er.eigenvectors().col(ri).normalized();
    // left eigenvector: eigenvector of L^H with eigenvalue conj(lam)
    int best = -1;
    double best_d = 0.0;
    for (int l = 0; l < N; ++l) {
      if (used[l]) continue;
      double dist = std::abs(std::conj(el.eigenvalues()[l]) - lam);
      if (best < 0 || dist < best_d) {
        best = l;
        best_d = dist;
      }
    }
    used[best] = true;
    s.left.col(i) = el.eigenvectors().col(best).normalized();
    s.residuals[i] = (op.matrix * s.right.col(i) - lam * s.right.col(i)).norm();
  }

  // Biorthonormalize the tracked set as a whole: left <- left * G^{-H} with
  // G = left^H right, exact for clusters as well as separated eigenvalues.
  CMat G = s.left.adjoint() * s.right;
  Eigen::JacobiSVD<CMat> svd(G);
  const double cond = svd.singularValues()[0] / svd.singularValues()[count - 1];
  s.near_jordan = !(cond < 1e6);
  s.left = s.left * G.adjoint().inverse();
  return s;
}

/// Rightmost real part over the full spectrum (no eigenvectors).
inline double rightmost_real_part(const BlochOperator& op) {
  Eigen::ComplexEigenSolver<CMat> es(op.matrix, false);
  return es.eigenvalues().real().maxCoeff();
}

// ---------------------------------------------------------------------------
// Stability condition checks (D1), (D2), (D3)
// ---------------------------------------------------------------------------

struct D1D2Options {
  int M = 24;
  double eps_fit = 0.15;   // D2 fit radius
  double Xi = 3.5;         // transverse frequency box (d = 2)
  int grid_points = 33;    // per axis
  int refine_rounds = 2;
  int fit_points = 8;
};

struct D1D2Report {
  bool d1_pass = false;
  Eigen::VectorXd worst_xi;
  double worst_re = 0.0;        // max over xi != 0 of rightmost Re lambda
  bool d2_pass = false;
  double theta_fit = 0.0;       // least-squares theta in Re lambda <= -theta |xi|^2
  double d2_min_ratio = 0.0;    // min over samples of -Re lambda / |xi|^2
};

inline D1D2Report check_D1_D2(const PeriodicCoefficients& pc, const D1D2Options& opt = {}) {
  const int d = pc.d();
  D1D2Report rep;

  // --- D1 sweep over the fundamental xi box, excluding the D2 ball ---------
  auto rightmost_at = [&](const Eigen::VectorXd& xi) {
    return rightmost_real_part(assemble(pc, xi, opt.M));
  };
  std::vector<Eigen::VectorXd> nodes;
  const double r0 = 0.5 * opt.eps_fit;
  if (d == 1) {
    for (int i = 0; i < opt.grid_points; ++i) {
      double x = -std::numbers::pi + two_pi * i / (opt.grid_points - 1);
      if (std::abs(x) < r0) continue;
      Eigen::VectorXd xi(1);
      xi << x;
      nodes.push_back(xi);
    }
  } else {
    for (int i = 0; i < opt.grid_points; ++i)
      for (int j = 0; j < opt.grid_points; ++j) {
        double x = -std::numbers::pi + two_pi * i / (opt.grid_points - 1);
        double y = -opt.Xi + 2 * opt.Xi * j / (opt.grid_points - 1);
        if (std::hypot(x, y) < r0) continue;
        Eigen::VectorXd xi(2);
        xi << x, y;
        nodes.push_back(xi);
      }
  }
  double worst = -1e300;
  Eigen::VectorXd worst_xi = nodes.front();
  for (const auto& xi : nodes) {
    double r = rightmost_at(xi);
    if (r > worst) {
      worst = r;
      worst_xi = xi;
    }
  }
  // local refinement near the maximizer
  double h = two_pi / (opt.grid_points - 1);
  for (int round = 0; round < opt.refine_rounds; ++round) {
    h *= 0.25;
    Eigen::VectorXd center = worst_xi;
    for (int di = -2; di <= 2; ++di)
      for (int dj = (d == 2 ? -2 : 0); dj <= (d == 2 ? 2 : 0); ++dj) {
        Eigen::VectorXd xi = center;
        xi[0] += di * h;
        if (d == 2) xi[1] += dj * h;
        if (xi.norm() < r0 || std::abs(xi[0]) > std::numbers::pi) continue;
        double r = rightmost_at(xi);
        if (r > worst) {
          worst = r;
          worst_xi = xi;
        }
      }
  }
  rep.worst_re = worst;
  rep.worst_xi = worst_xi;
  rep.d1_pass = worst < 0.0;

  // --- D2 quadratic fit on the critical surfaces near xi = 0 ---------------
  const int nc = pc.n() + 1;
  double theta_min = 1e300, min_ratio = 1e300;
  std::vector<Eigen::VectorXd> dirs;
  if (d == 1) {
    Eigen::VectorXd e(1);
    e << 1.0;
    dirs.push_back(e);
    dirs.push_back(-e);
  } else {
    for (int a = 0; a < 8; ++a) {
      Eigen::VectorXd e(2);
      e << std::cos(std::numbers::pi * a / 4), std::sin(std::numbers::pi * a / 4);
      dirs.push_back(e);
    }
  }
  for (const auto& dir : dirs) {
    // per-branch least squares of -Re lambda_j(r) against r^2 (branches by
    // real-part rank along the ray); theta is the worst branch slope
    Mat neg(opt.fit_points, nc);
    Eigen::VectorXd rsq(opt.fit_points);
    for (int i = 1; i <= opt.fit_points; ++i) {
      double r = opt.eps_fit * i / opt.fit_points;
      Eigen::VectorXd xi = r * dir;
      SpectrumSlice s = spectrum(assemble(pc, xi, opt.M), nc);
      rsq[i - 1] = r * r;
      for (int j = 0; j < nc; ++j) {
        neg(i - 1, j) = -s.eigenvalues[j].real();
        min_ratio = std::min(min_ratio, neg(i - 1, j) / (r * r));
      }
    }
    for (int j = 0; j < nc; ++j) {
      double theta = neg.col(j).dot(rsq) / rsq.squaredNorm();
      theta_min = std::min(theta_min, theta);
    }
  }
  rep.theta_fit = theta_min;
  rep.d2_min_ratio = min_ratio;
  rep.d2_pass = min_ratio > 0.0;
  return rep;
}

struct D3Report {
  int cluster_count = 0;
  int expected = 0;            // n + 1
  double cluster_tol = 0.0;    // absolute threshold used
  double gram_condition = 0.0;
  bool count_pass = false;
  bool semisimple = false;
  bool pass = false;
};

/// Scale for zero-cluster detection: the coefficient magnitude, not the full
/// Galerkin matrix norm (which grows like (2 pi M)^2 and would swallow
/// genuinely nonzero eigenvalues of order one).
inline double coefficient_scale(const PeriodicCoefficients& pc) {
  double s = 1.0;
  for (int j = 0; j < pc.d(); ++j) s += pc.coeff(j, 0).norm();
  return s;
}

/// Counts eigenvalues of L_0 with |lambda| <= cluster_tol and tests
/// semisimplicity via conditioning of the cluster Gram matrix <q~_i, q_j>.
inline D3Report check_D3_semisimple(const PeriodicCoefficients& pc, int M,
                                    double cluster_tol_rel = 1e-6) {
  BlochOperator op = assemble(pc, Eigen::VectorXd::Zero(pc.d()), M);
  const double scale = coefficient_scale(pc);
  const double tol = cluster_tol_rel * scale;
  Eigen::ComplexEigenSolver<CMat> er(op.matrix, true);
  Eigen::ComplexEigenSolver<CMat> el(op.matrix.adjoint().eval(), true);

  D3Report rep;
  rep.expected = pc.n() + 1;
  rep.cluster_tol = tol;
  std::vector<int> ridx, lidx;
  for (int i = 0; i < op.dim(); ++i) {
    if (std::abs(er.eigenvalues()[i]) <= tol) ridx.push_back(i);
    if (std::abs(el.eigenvalues()[i]) <= tol) lidx.push_back(i);
  }
  rep.cluster_count = int(ridx.size());
  rep.count_pass = (rep.cluster_count == rep.expected);
  if (!ridx.empty() && ridx.size() == lidx.size()) {
    CMat R(op.dim(), ridx.size()), L(op.dim(), lidx.size());
    for (std::size_t c = 0; c < ridx.size(); ++c) {
      R.col(c) = er.eigenvectors().col(ridx[c]).normalized();
      L.col(c) = el.eigenvectors().col(lidx[c]).normalized();
    }
    CMat G = L.adjoint() * R;
    Eigen::JacobiSVD<CMat> svd(G);
    rep.gram_condition =
        svd.singularValues()[0] / svd.singularValues()[int(ridx.size()) - 1];
    rep.semisimple = rep.gram_condition < 1e6;
  }
  rep.pass = rep.count_pass && rep.semisimple;
  return rep;
}

/// ||L_0 ubar'|| / ||ubar'|| in the Galerkin representation; the translation
/// zero mode of any exact profile.
inline double translation_mode_residual(const PeriodicCoefficients& pc, const WaveProfile& p,
                                        int M) {
  BlochOperator op = assemble(pc, Eigen::VectorXd::Zero(pc.d()), M);
  CMat dcoeffs(p.m(), p.n());
  for (int c = 0; c < p.n(); ++c)
    dcoeffs.col(c) = spectral_derivative_coeffs(p.fourier_coeffs.col(c));
  CVec v = stack_coefficients(dcoeffs, M);
  return (op.matrix * v).norm() / v.norm();
}

}  // namespace wavetrain

#endif
