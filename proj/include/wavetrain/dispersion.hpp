#ifndef WAVETRAIN_DISPERSION_HPP
#define WAVETRAIN_DISPERSION_HPP

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "wavetrain/bloch.hpp"
#include "wavetrain/fourier.hpp"
#include "wavetrain/profile.hpp"

namespace wavetrain {

struct DispersionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Zero eigenvalue cluster of L_0 and the restriction of the first-order
/// Bloch expansion term to it: the characteristic speeds a_j of the critical
/// surfaces lambda_j(r omega) = -i a_j r + o(r) fall out of a small dense
/// eigenproblem instead of finite differences in xi.
struct CriticalCluster {
  Eigen::VectorXd omega;     // unit direction in xi space, size d
  int M = 0;
  int n = 0;
  int count = 0;             // cluster dimension (n + 1 for a genuine profile)
  CMat right0, left0;        // biorthonormal stacked cluster bases of L_0
  CMat L1_restricted;        // count x count restriction of the first-order term
  CVec a;                    // characteristic speeds, sorted by real part
  CMat q0, qtilde0;          // zero-frequency surface eigenfunctions (stacked columns,
                             // biorthonormal), ordered like a
  double projection_defect = 0.0;  // ||Pi0^2 - Pi0||
  double gram_condition = 0.0;     // conditioning of the L_0 cluster pairing
  bool near_jordan = false;
  bool h3_pass = false;      // all a_j pairwise separated
  double h3_min_gap = 0.0;
};

/// Eigenvalues of L_0 with |lambda| <= tol_rel * ||L_0||, with biorthonormal
/// right/left bases (whole-cluster Gram normalization). Any basis pair of the
/// same spaces with left^H right = I produces the same cluster data.
struct ZeroClusterBasis {
  CVec eigenvalues;
  CMat right, left;
  double gram_condition = 1.0;
};

/// tol is absolute; callers scale it by coefficient_scale of the operator.
inline ZeroClusterBasis zero_cluster_basis(const BlochOperator& op, double tol) {
  Eigen::ComplexEigenSolver<CMat> er(op.matrix, true);
  Eigen::ComplexEigenSolver<CMat> el(op.matrix.adjoint().eval(), true);

  std::vector<int> ridx, lidx;
  for (int i = 0; i < op.dim(); ++i) {
    if (std::abs(er.eigenvalues()[i]) <= tol) ridx.push_back(i);
    if (std::abs(el.eigenvalues()[i]) <= tol) lidx.push_back(i);
  }
  if (ridx.empty() || ridx.size() != lidx.size())
    throw DispersionError("zero cluster of L_0 is empty or left/right counts differ");

  ZeroClusterBasis z;
  const int c = int(ridx.size());
  z.eigenvalues.resize(c);
  z.right.resize(op.dim(), c);
  z.left.resize(op.dim(), c);
  for (int i = 0; i < c; ++i) {
    z.eigenvalues[i] = er.eigenvalues()[ridx[i]];
    z.right.col(i) = er.eigenvectors().col(ridx[i]).normalized();
    z.left.col(i) = el.eigenvectors().col(lidx[i]).normalized();
  }
  CMat G = z.left.adjoint() * z.right;
  Eigen::JacobiSVD<CMat> svd(G);
  z.gram_condition = svd.singularValues()[0] / svd.singularValues()[c - 1];
  if (!(z.gram_condition < 1e6))
    throw DispersionError("zero cluster of L_0 is numerically defective");
  z.left = z.left * G.adjoint().inverse();
  return z;
}

/// Galerkin matrix of the first-order term in L_{r omega} = L_0 + r L1 + O(r^2):
///   L1 = i [ omega_1 (2 d/dx1 - A^1) - sum_{j>1} omega_j A^j ].
inline CMat first_order_term(const PeriodicCoefficients& pc, const Eigen::VectorXd& omega,
                             int M) {
  const int n = pc.n();
  const int N = (2 * M + 1) * n;
  CMat L1 = CMat::Zero(N, N);
  const Cplx I(0.0, 1.0);
  for (int a = -M; a <= M; ++a) {
    const int ra = (a + M) * n;
    for (int b = -M; b <= M; ++b) {
      const int cb = (b + M) * n;
      CMat block = -I * omega[0] * pc.coeff(0, a - b);
      for (int j = 1; j < pc.d(); ++j) block -= I * omega[j] * pc.coeff(j, a - b);
      if (a == b) block.diagonal().array() += I * omega[0] * 2.0 * Cplx(0.0, two_pi * a);
      L1.block(ra, cb, n, n) = block;
    }
  }
  return L1;
}

/// Builds the cluster data from a given biorthonormal basis pair of the zero
/// eigenspace; the result is basis-independent (eigenspaces, not vectors).
inline CriticalCluster build_cluster_from_basis(const PeriodicCoefficients& pc,
                                                const Eigen::VectorXd& omega, int M,
                                                const ZeroClusterBasis& z,
                                                double h3_tol = 1e-6) {
  CriticalCluster cl;
  cl.omega = omega.normalized();
  cl.M = M;
  cl.n = pc.n();
  cl.count = int(z.eigenvalues.size());
  cl.right0 = z.right;
  cl.left0 = z.left;
  cl.gram_condition = z.gram_condition;

  CMat Pi0 = z.right * z.left.adjoint();
  cl.projection_defect = (Pi0 * Pi0 - Pi0).norm();

  CMat L1 = first_order_term(pc, cl.omega, M);
  cl.L1_restricted = z.left.adjoint() * L1 * z.right;

  Eigen::ComplexEigenSolver<CMat> eb(cl.L1_restricted, true);
  // lambda_j'(0) = eig(L1_restricted) = -i a_j  =>  a_j = i * eig
  CVec a_raw = Cplx(0.0, 1.0) * eb.eigenvalues();
  std::vector<int> ord(cl.count);
  std::iota(ord.begin(), ord.end(), 0);
  // order by (Re, Im) with Re quantized so that noise-level real parts
  // (elliptic averaged systems: a = {0, +ic, -ic}) sort reproducibly
  const double eta = 1e-7 * (1.0 + a_raw.cwiseAbs().maxCoeff());
  std::sort(ord.begin(), ord.end(), [&](int i, int j) {
    double ri = std::round(a_raw[i].real() / eta), rj = std::round(a_raw[j].real() / eta);
    if (ri != rj) return ri < rj;
    return a_raw[i].imag() < a_raw[j].imag();
  });
  cl.a.resize(cl.count);
  CMat V(cl.count, cl.count);
  for (int i = 0; i < cl.count; ++i) {
    cl.a[i] = a_raw[ord[i]];
    V.col(i) = eb.eigenvectors().col(ord[i]);
  }
  cl.near_jordan = false;
  {
    Eigen::JacobiSVD<CMat> svd(V);
    double cond = svd.singularValues()[0] / svd.singularValues()[cl.count - 1];
    cl.near_jordan = !(cond < 1e8);
  }
  cl.q0 = z.right * V;
  // dual basis: qtilde = left0 * V^{-H} keeps qtilde_i^H q_j = delta_ij
  cl.qtilde0 = z.left * V.inverse().adjoint();

  cl.h3_min_gap = 1e300;
  for (int i = 0; i < cl.count; ++i)
    for (int j = i + 1; j < cl.count; ++j)
      cl.h3_min_gap = std::min(cl.h3_min_gap, std::abs(cl.a[i] - cl.a[j]));
  cl.h3_pass = cl.h3_min_gap > h3_tol && !cl.near_jordan;
  return cl;
}

/// Builds the critical cluster at xi = 0 for direction omega. If
/// expected_count >= 0, a mismatching cluster dimension is an error
/// (profiles carry n + 1 zero modes; constant-coefficient controls carry n).
inline CriticalCluster build_cluster(const PeriodicCoefficients& pc, const Eigen::VectorXd& omega,
                                     int M, int expected_count = -1, double h3_tol = 1e-6) {
  if (int(omega.size()) != pc.d()) throw DispersionError("angle dimension mismatch");
  BlochOperator op = assemble(pc, Eigen::VectorXd::Zero(pc.d()), M);
  ZeroClusterBasis z = zero_cluster_basis(op, 1e-6 * coefficient_scale(pc));
  if (expected_count >= 0 && int(z.eigenvalues.size()) != expected_count)
    throw DispersionError("zero cluster dimension " + std::to_string(z.eigenvalues.size()) +
                          ", expected " + std::to_string(expected_count));
  return build_cluster_from_basis(pc, omega, M, z, h3_tol);
}

// ---------------------------------------------------------------------------
// Zero-frequency eigenfunction structure: one right eigenfunction is the
// profile derivative, the remaining left eigenfunctions are constant in x1.
// ---------------------------------------------------------------------------

struct BlochFactsReport {
  int translational_index = -1;      // index into cluster.a / q0 columns
  double alignment = 0.0;            // |<q_j, ubar'>| / (norms), best over j
  std::vector<double> oscillation;   // relative x1-oscillation of qtilde_j, j != index
  double max_oscillation = 0.0;
  bool structure_ok = false;
};

inline BlochFactsReport check_blochfacts(const CriticalCluster& cl, const WaveProfile& p,
                                         double align_tol = 1e-6, double const_tol = 1e-5) {
  CMat dcoeffs(p.m(), p.n());
  for (int c = 0; c < p.n(); ++c)
    dcoeffs.col(c) = spectral_derivative_coeffs(p.fourier_coeffs.col(c));
  CVec up = stack_coefficients(dcoeffs, cl.M);
  up.normalize();

  BlochFactsReport rep;
  for (int j = 0; j < cl.count; ++j) {
    double al = std::abs(up.dot(cl.q0.col(j))) / cl.q0.col(j).norm();
    if (al > rep.alignment) {
      rep.alignment = al;
      rep.translational_index = j;
    }
  }
  if (rep.translational_index < 0)
    throw DispersionError("no cluster eigenfunction aligns with the profile derivative");

  const int n = cl.n;
  for (int j = 0; j < cl.count; ++j) {
    if (j == rep.translational_index) continue;
    CVec q = cl.qtilde0.col(j);
    // constants live in the k = 0 block of the mode-major stacking
    double total = q.squaredNorm();
    double mean_part = q.segment(cl.M * n, n).squaredNorm();
    double osc = std::sqrt(std::max(0.0, total - mean_part) / total);
    rep.oscillation.push_back(osc);
    rep.max_oscillation = std::max(rep.max_oscillation, osc);
  }
  rep.structure_ok = rep.alignment > 1.0 - align_tol && rep.max_oscillation < const_tol;
  return rep;
}

// ---------------------------------------------------------------------------
// Averaged-system (Whitham) hyperbolicity verdicts per angle
// ---------------------------------------------------------------------------

struct AngleVerdict {
  Eigen::VectorXd omega;
  CVec a;
  double max_imag = 0.0;
  double min_gap = 0.0;
  bool weakly_hyperbolic = false;    // all a_j real within tolerance
  bool strictly_hyperbolic = false;  // real and pairwise simple
};

struct WhithamReport {
  std::vector<AngleVerdict> angles;
  bool weakly_hyperbolic_all = false;
  bool strictly_hyperbolic_all = false;
  // diagnostic one-period averages of the modulated quantities
  Eigen::VectorXd mean_state;               // M
  std::vector<Eigen::VectorXd> mean_flux;   // F^j
  double frequency = 0.0;                   // Omega = 1/X
  double speed = 0.0;                       // S = s
};

inline AngleVerdict angle_verdict(const CriticalCluster& cl, double imag_tol = 1e-6) {
  AngleVerdict v;
  v.omega = cl.omega;
  v.a = cl.a;
  double scale = std::max(1.0, cl.a.cwiseAbs().maxCoeff());
  for (int i = 0; i < cl.count; ++i) v.max_imag = std::max(v.max_imag, std::abs(cl.a[i].imag()));
  v.min_gap = cl.h3_min_gap;
  v.weakly_hyperbolic = v.max_imag <= imag_tol * scale;
  v.strictly_hyperbolic = v.weakly_hyperbolic && cl.h3_pass;
  return v;
}

/// Builds clusters on an angle grid (single angle e1 in d = 1) and reports
/// hyperbolicity of the averaged system together with the period averages.
inline WhithamReport whitham_report(const WaveProfile& p, int M, int n_angles = 16,
                                    double imag_tol = 1e-6) {
  PeriodicCoefficients pc = PeriodicCoefficients::from_profile(p);
  WhithamReport rep;
  std::vector<Eigen::VectorXd> omegas;
  if (pc.d() == 1) {
    Eigen::VectorXd e(1);
    e << 1.0;
    omegas.push_back(e);
  } else {
    for (int a = 0; a < n_angles; ++a) {
      double th = two_pi * a / n_angles;
      Eigen::VectorXd e(2);
      e << std::cos(th), std::sin(th);
      omegas.push_back(e);
    }
  }
  rep.weakly_hyperbolic_all = true;
  rep.strictly_hyperbolic_all = true;
  for (const auto& om : omegas) {
    CriticalCluster cl = build_cluster(pc, om, M, pc.n() + 1);
    AngleVerdict v = angle_verdict(cl, imag_tol);
    rep.weakly_hyperbolic_all = rep.weakly_hyperbolic_all && v.weakly_hyperbolic;
    rep.strictly_hyperbolic_all = rep.strictly_hyperbolic_all && v.strictly_hyperbolic;
    rep.angles.push_back(std::move(v));
  }
  rep.mean_state = p.samples.colwise().mean().transpose();
  for (int j = 0; j < p.model->d(); ++j) {
    Eigen::VectorXd fj = Eigen::VectorXd::Zero(p.n());
    for (int i = 0; i < p.m(); ++i) fj += p.model->flux(j, p.samples.row(i).transpose());
    rep.mean_flux.push_back(fj / p.m());
  }
  rep.frequency = 1.0 / p.X;
  rep.speed = p.s;
  return rep;
}

// ---------------------------------------------------------------------------
// Surface continuation in |xi| along a ray, eigenvector-overlap matched
// ---------------------------------------------------------------------------

struct DispersionSurface {
  Eigen::VectorXd omega;
  std::vector<double> radii;
  CMat lambda;                 // radii x count, branch-matched
  Eigen::VectorXd fitted_a;    // from least squares of Im lambda_j = -a_j r
  Eigen::VectorXd curvature;   // from least squares of Re lambda_j = beta_j r^2
  double min_overlap = 1.0;    // worst dominant overlap across matching steps
  bool matching_ok = false;
};

inline DispersionSurface continue_surfaces(const PeriodicCoefficients& pc,
                                           const CriticalCluster& cl, double r_min, double r_max,
                                           int points, int search_count = -1) {
  if (points < 4) throw DispersionError("surface continuation needs >= 4 radii");
  // candidate pool larger than the cluster: intruder eigenvalues (non-critical
  // branches with large real part) are skipped by the overlap matching
  if (search_count < cl.count) search_count = cl.count + 3;
  DispersionSurface surf;
  surf.omega = cl.omega;
  surf.lambda.resize(points, cl.count);
  surf.radii.resize(points);
  const double ratio = std::pow(r_max / r_min, 1.0 / (points - 1));

  // The r = 0 dual cluster basis is useless for seeding when L1_restricted is
  // non-normal (dual norms blow up with its eigenvector conditioning), so the
  // first slice is seeded by the cl.count eigenvalues closest to 0 and mapped
  // to branch order by the nearest first-order speed estimate i*lambda/r.
  // Subsequent slices are marched by left/right eigenvector overlap.
  CMat prev_left;
  surf.min_overlap = 1.0;
  bool ok = true;
  for (int i = 0; i < points; ++i) {
    const double r = r_min * std::pow(ratio, i);
    surf.radii[i] = r;
    SpectrumSlice s = spectrum(assemble(pc, r * cl.omega, cl.M), search_count);

    std::vector<int> match(cl.count, -1);
    if (i == 0) {
      std::vector<int> idx(search_count);
      std::iota(idx.begin(), idx.end(), 0);
      std::sort(idx.begin(), idx.end(), [&](int a, int b) {
        return std::abs(s.eigenvalues[a]) < std::abs(s.eigenvalues[b]);
      });
      idx.resize(cl.count);
      // greedy nearest-speed assignment of the seeds to the cluster ordering
      std::vector<bool> used(cl.count, false);
      for (int pick = 0; pick < cl.count; ++pick) {
        int bi = -1, bj = -1;
        double best = 1e300;
        for (int a = 0; a < cl.count; ++a) {
          if (match[a] != -1) continue;
          for (int b = 0; b < cl.count; ++b) {
            if (used[b]) continue;
            Cplx a_est = Cplx(0.0, 1.0) * s.eigenvalues[idx[b]] / r;
            double dist = std::abs(a_est - cl.a[a]);
            if (dist < best) {
              best = dist;
              bi = a;
              bj = b;
            }
          }
        }
        match[bi] = idx[bj];
        used[bj] = true;
      }
    } else {
      CMat overlap = (prev_left.adjoint() * s.right).cwiseAbs();
      // dominant matching, greedy on the largest remaining overlap per branch
      std::vector<bool> row_used(cl.count, false), col_used(search_count, false);
      for (int pick = 0; pick < cl.count; ++pick) {
        int bi = -1, bj = -1;
        double best = -1.0;
        for (int a = 0; a < cl.count; ++a) {
          if (row_used[a]) continue;
          for (int b = 0; b < search_count; ++b) {
            if (col_used[b]) continue;
            if (overlap(a, b).real() > best) {
              best = overlap(a, b).real();
              bi = a;
              bj = b;
            }
          }
        }
        row_used[bi] = true;
        col_used[bj] = true;
        match[bi] = bj;
        // normalize by the row mass so the diagnostic is scale-free
        double row_mass = overlap.row(bi).norm();
        double frac = row_mass > 0 ? best / row_mass : 0.0;
        surf.min_overlap = std::min(surf.min_overlap, frac);
        if (frac <= 0.9) ok = false;
      }
    }
    CMat new_left(s.left.rows(), cl.count);
    for (int a = 0; a < cl.count; ++a) {
      surf.lambda(i, a) = s.eigenvalues[match[a]];
      new_left.col(a) = s.left.col(match[a]);
    }
    prev_left = new_left;
  }
  surf.matching_ok = ok;

  // least-squares first/second order coefficients through the origin
  surf.fitted_a.resize(cl.count);
  surf.curvature.resize(cl.count);
  double sr2 = 0.0, sr4 = 0.0;
  for (double r : surf.radii) {
    sr2 += r * r;
    sr4 += r * r * r * r;
  }
  for (int j = 0; j < cl.count; ++j) {
    double sim = 0.0, sre = 0.0;
    for (int i = 0; i < points; ++i) {
      sim += surf.lambda(i, j).imag() * surf.radii[i];
      sre += surf.lambda(i, j).real() * surf.radii[i] * surf.radii[i];
    }
    surf.fitted_a[j] = -sim / sr2;  // Im lambda_j = -a_j r
    surf.curvature[j] = sre / sr4;  // Re lambda_j = beta_j r^2
  }
  return surf;
}

/// Finite-difference slopes Im lambda_j(r omega) / (-r) of the critical
/// surfaces, Richardson-extrapolated from r and r/2; the independent oracle
/// for the cluster-derived a_j. Returned sorted ascending.
inline Eigen::VectorXd fd_characteristic_speeds(const PeriodicCoefficients& pc,
                                                const Eigen::VectorXd& omega, int M, int count,
                                                double r = 1e-3) {
  auto slopes = [&](double rr) {
    SpectrumSlice s = spectrum(assemble(pc, rr * omega.normalized().eval(), M), count);
    std::vector<double> v(count);
    for (int j = 0; j < count; ++j) v[j] = s.eigenvalues[j].imag() / (-rr);
    std::sort(v.begin(), v.end());
    return v;
  };
  std::vector<double> s1 = slopes(r), s2 = slopes(r / 2);
  Eigen::VectorXd out(count);
  for (int j = 0; j < count; ++j) out[j] = 2.0 * s2[j] - s1[j];
  return out;
}

}  // namespace wavetrain

#endif
