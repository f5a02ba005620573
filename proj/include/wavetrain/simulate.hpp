#ifndef WAVETRAIN_SIMULATE_HPP
#define WAVETRAIN_SIMULATE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "wavetrain/fourier.hpp"
#include "wavetrain/model.hpp"
#include "wavetrain/profile.hpp"

namespace wavetrain {

struct SimulateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when the state overflows; carries the last valid time (a meaningful
/// outcome for unstable waves, not only a numerical failure).
struct BlowupError : SimulateError {
  double last_valid_time;
  explicit BlowupError(double t)
      : SimulateError("solution blew up; last valid time " + std::to_string(t)),
        last_valid_time(t) {}
};

// ---------------------------------------------------------------------------
// Norms on periodic grids
// ---------------------------------------------------------------------------

inline double l1_norm_periodic(const Mat& samples, double length) {
  double acc = 0.0;
  for (int i = 0; i < samples.rows(); ++i) acc += samples.row(i).norm();
  return acc * length / double(samples.rows());
}

inline double linf_norm(const Mat& samples) {
  double best = 0.0;
  for (int i = 0; i < samples.rows(); ++i) best = std::max(best, samples.row(i).norm());
  return best;
}

/// H^K norm via the spectral symbol (sum over derivatives 0..K).
inline double hk_norm_spectral(const Mat& samples, int K, double length) {
  const int m = int(samples.rows());
  double acc = 0.0;
  for (int c = 0; c < samples.cols(); ++c) {
    CVec coeffs = fourier_coeffs(Vec(samples.col(c)));
    for (int i = 0; i < m; ++i) {
      double k = two_pi * fft_freq(i, m) / length;
      double sym = 0.0, pw = 1.0;
      for (int j = 0; j <= K; ++j) {
        sym += pw;
        pw *= k * k;
      }
      acc += sym * std::norm(coeffs[i]);
    }
  }
  return std::sqrt(acc * length);
}

/// H^K norm with centered finite-difference derivatives (independent oracle).
inline double hk_norm_fd(const Mat& samples, int K, double length) {
  const int m = int(samples.rows());
  const double h = length / m;
  Mat d = samples;
  double acc = d.squaredNorm();
  for (int j = 1; j <= K; ++j) {
    Mat next(m, d.cols());
    for (int i = 0; i < m; ++i)
      next.row(i) = (d.row((i + 1) % m) - d.row((i + m - 1) % m)) / (2.0 * h);
    d = next;
    acc += d.squaredNorm();
  }
  return std::sqrt(acc * length / m);
}

// ---------------------------------------------------------------------------
// Domain / perturbation specification
// ---------------------------------------------------------------------------

struct DomainSpec {
  int cells = 32;      // wave periods along x1
  int per_cell = 48;   // grid points per period
  int length() const { return cells; }  // rescaled units: one period = 1
  int points() const { return cells * per_cell; }
};

struct PerturbationSpec {
  enum class Shape { None, Translate, Gaussian, RandomBand, SingleMode };
  Shape shape = Shape::None;
  double amplitude = 0.0;
  double width = 4.0;     // Gaussian width, in periods
  double center = 0.0;    // in periods from the domain start
  int mode = 1;           // SingleMode wavenumber (cycles per domain)
  int band_limit = 8;     // RandomBand max wavenumber
  unsigned seed = 0;
  int component = 0;
};

// ---------------------------------------------------------------------------
// d = 1 spectral solver
//
// Rescaled co-moving equation on a superdomain of `cells` unit periods:
//   u_t + (F(u))_x = u_xx,  F(u) = X (f^1(u) - s u).
// The state is stored as the deviation w = u - ubar (ubar the tiled profile
// or a constant background), evolved by an integrating-factor Heun step:
// diffusion exact in Fourier space, divergence-form flux difference
// F(ubar + w) - F(ubar) explicit with 2/3 dealiasing. The background is an
// exact fixed point of the scheme, and the mean of w is conserved exactly
// because the flux enters through a spectral derivative.
// ---------------------------------------------------------------------------

class Simulation {
 public:
  Simulation(std::shared_ptr<const ModelSystem> model, double X, double s, Mat background,
             DomainSpec dom, double dt = 0.0)
      : model_(std::move(model)), X_(X), s_(s), dom_(dom), ubar_(std::move(background)) {
    const int m = dom_.points();
    if (int(ubar_.rows()) != m || int(ubar_.cols()) != model_->n())
      throw SimulateError("background grid does not match the domain");
    // advective stability limit from the background (with headroom for the
    // perturbation); diffusion is exact and imposes no restriction
    double amax = 1e-8;
    for (int i = 0; i < m; ++i) {
      Eigen::MatrixXd A = model_->jacobian(0, ubar_.row(i).transpose());
      A -= s_ * Eigen::MatrixXd::Identity(model_->n(), model_->n());
      amax = std::max(amax, X_ * A.cwiseAbs().rowwise().sum().maxCoeff());
    }
    const double dx = double(dom_.length()) / m;
    cfl_dt_ = 0.5 * dx / amax;
    dt_ = (dt > 0.0) ? dt : 0.8 * cfl_dt_;
    if (dt_ > cfl_dt_ * (1.0 + 1e-12))
      throw SimulateError("time step exceeds the advective stability limit");

    what_ = CMat::Zero(m, model_->n());
    init_factors();
  }

  static Simulation from_profile(const WaveProfile& p, DomainSpec dom,
                                 const PerturbationSpec& pert = {}, double dt = 0.0) {
    const int m = dom.points();
    Mat bg(m, p.n());
    for (int i = 0; i < m; ++i) {
      double tau = double(i) / dom.per_cell;  // position in periods
      bg.row(i) = trig_eval_cols(p.fourier_coeffs, tau).transpose();
    }
    Simulation sim(p.model, p.X, p.s, std::move(bg), dom, dt);
    sim.apply_perturbation(pert, &p);
    return sim;
  }

  /// Constant background (heat-type control runs and symbol tests).
  static Simulation from_constant(std::shared_ptr<const ModelSystem> model,
                                  const Eigen::VectorXd& state, DomainSpec dom,
                                  const PerturbationSpec& pert = {}, double dt = 0.0) {
    Mat bg = state.transpose().replicate(dom.points(), 1);
    Simulation sim(std::move(model), 1.0, 0.0, std::move(bg), dom, dt);
    sim.apply_perturbation(pert, nullptr);
    return sim;
  }

  int points() const { return dom_.points(); }
  double length() const { return double(dom_.length()); }
  double t() const { return t_; }
  double dt() const { return dt_; }
  const Mat& background() const { return ubar_; }
  double grid_point(int i) const { return double(i) * length() / points(); }

  Mat deviation() const {
    Mat w(what_.rows(), what_.cols());
    for (int c = 0; c < what_.cols(); ++c)
      w.col(c) = fourier_synthesis_real(what_.col(c));
    return w;
  }
  Mat state() const { return ubar_ + deviation(); }

  /// Mean of the deviation per component (exactly conserved).
  Vec mean_deviation() const {
    Vec mu(what_.cols());
    for (int c = 0; c < what_.cols(); ++c) mu[c] = what_(0, c).real();
    return mu;
  }

  /// E0 = |w|_{L1} + |w|_{H^K} at the current time (K capped at 4).
  double initial_norm(int K = 4) const {
    Mat w = deviation();
    int Ke = std::min(K, 4);
    return l1_norm_periodic(w, length()) + hk_norm_spectral(w, Ke, length());
  }

  void step() {
    const CMat n0 = flux_divergence(what_);
    CMat stage = efac_.asDiagonal() * CMat(what_ + dt_ * n0);
    dealias(stage);
    const CMat n1 = flux_divergence(stage);
    what_ = efac_.asDiagonal() * CMat(what_ + (0.5 * dt_) * n0) + (0.5 * dt_) * n1;
    dealias(what_);
    t_ += dt_;
    if (!what_.allFinite() || what_.cwiseAbs().maxCoeff() > 1e10) throw BlowupError(t_ - dt_);
  }

  /// Advance to T (final step shortened), invoking the observer every
  /// `cadence` steps and at the end.
  void run(double T, const std::function<void(const Simulation&)>& observer = {},
           int cadence = 0) {
    long k = 0;
    if (observer) observer(*this);
    while (t_ < T - 1e-12) {
      double saved = dt_;
      if (t_ + dt_ > T) set_dt(T - t_);
      step();
      if (dt_ != saved) set_dt(saved);
      ++k;
      if (observer && cadence > 0 && k % cadence == 0) observer(*this);
    }
    if (observer && k > 0 && (cadence <= 0 || k % cadence != 0)) observer(*this);
  }

  /// Horizon before wrap-around can contaminate decay-rate fits.
  double rate_fit_horizon(double max_speed) const {
    return length() / (2.0 * std::max(max_speed, 1e-12));
  }

 private:
  void set_dt(double dt) {
    dt_ = dt;
    init_factors();
  }

  void init_factors() {
    const int m = dom_.points();
    ksq_.resize(m);
    ik_.resize(m);
    efac_.resize(m);
    for (int i = 0; i < m; ++i) {
      double k = two_pi * fft_freq(i, m) / length();
      if (2 * i == m) k = 0.0;  // unmatched Nyquist mode dropped
      ksq_[i] = k * k;
      ik_[i] = Cplx(0.0, k);
      efac_[i] = std::exp(-ksq_[i] * dt_);
    }
  }

  /// -d/dx [F(ubar + w) - F(ubar)] in coefficient space, dealiased.
  CMat flux_divergence(const CMat& wh) const {
    const int m = dom_.points();
    const int n = model_->n();
    Mat w(m, n);
    for (int c = 0; c < n; ++c) w.col(c) = fourier_synthesis_real(wh.col(c));
    Mat F(m, n);
    for (int i = 0; i < m; ++i) {
      Eigen::VectorXd u = ubar_.row(i).transpose() + w.row(i).transpose();
      Eigen::VectorXd ub = ubar_.row(i).transpose();
      Eigen::VectorXd val = model_->flux(0, u) - model_->flux(0, ub) - s_ * (u - ub);
      F.row(i) = (X_ * val).transpose();
    }
    CMat out(m, n);
    for (int c = 0; c < n; ++c) {
      CVec fc = fourier_coeffs(Vec(F.col(c)));
      for (int i = 0; i < m; ++i) fc[i] *= -ik_[i];
      out.col(c) = fc;
    }
    CMat o = out;
    dealias(o);
    return o;
  }

  void dealias(CMat& coeffs) const {
    const int m = int(coeffs.rows());
    for (int i = 0; i < m; ++i)
      if (3 * std::abs(fft_freq(i, m)) > m) coeffs.row(i).setZero();
  }

  void apply_perturbation(const PerturbationSpec& pert, const WaveProfile* p) {
    const int m = dom_.points();
    const int n = model_->n();
    Mat w = Mat::Zero(m, n);
    switch (pert.shape) {
      case PerturbationSpec::Shape::None:
        break;
      case PerturbationSpec::Shape::Translate: {
        if (!p) throw SimulateError("translate perturbation needs a profile background");
        for (int i = 0; i < m; ++i) {
          double tau = grid_point(i);
          w.row(i) = (trig_eval_cols(p->fourier_coeffs, tau - pert.amplitude) -
                      trig_eval_cols(p->fourier_coeffs, tau))
                         .transpose();
        }
        break;
      }
      case PerturbationSpec::Shape::Gaussian: {
        double c = pert.center > 0 ? pert.center : 0.5 * length();
        for (int i = 0; i < m; ++i) {
          double x = grid_point(i) - c;
          // periodic images keep the bump smooth across the wrap
          double g = 0.0;
          for (int im = -1; im <= 1; ++im) {
            double xx = x + im * length();
            g += std::exp(-xx * xx / (2.0 * pert.width * pert.width));
          }
          w(i, pert.component) = pert.amplitude * g;
        }
        break;
      }
      case PerturbationSpec::Shape::RandomBand: {
        std::mt19937 rng(pert.seed);
        std::normal_distribution<double> dist(0.0, 1.0);
        for (int c = 0; c < n; ++c) {
          Vec field = Vec::Zero(m);
          for (int k = 1; k <= pert.band_limit; ++k) {
            double a = dist(rng) / (1.0 + k), b = dist(rng) / (1.0 + k);
            for (int i = 0; i < m; ++i) {
              double ph = two_pi * k * grid_point(i) / length();
              field[i] += a * std::cos(ph) + b * std::sin(ph);
            }
          }
          w.col(c) = field;
        }
        double sup = linf_norm(w);
        if (sup > 0) w *= pert.amplitude / sup;
        break;
      }
      case PerturbationSpec::Shape::SingleMode: {
        for (int i = 0; i < m; ++i)
          w(i, pert.component) =
              pert.amplitude * std::cos(two_pi * pert.mode * grid_point(i) / length());
        break;
      }
    }
    for (int c = 0; c < n; ++c) what_.col(c) = fourier_coeffs(Vec(w.col(c)));
    dealias(what_);
  }

  std::shared_ptr<const ModelSystem> model_;
  double X_, s_;
  DomainSpec dom_;
  Mat ubar_;
  CMat what_;
  Vec ksq_;
  CVec ik_;
  CVec efac_;
  double t_ = 0.0;
  double dt_ = 0.0;
  double cfl_dt_ = 0.0;
};

// ---------------------------------------------------------------------------
// d = 2 reduced solver: x1 tiled wave direction, x2 transverse, deviation
// form with flux divergence d_x F^1 + d_z F^2, integrating-factor Heun.
// ---------------------------------------------------------------------------

struct DomainSpec2 {
  int cells = 16;
  int per_cell = 32;
  int transverse_points = 128;
  double transverse_length = 16.0;
};

class Simulation2 {
 public:
  Simulation2(std::shared_ptr<const ModelSystem> model, double X, double s, Mat background_x,
              DomainSpec2 dom, double dt = 0.0)
      : model_(std::move(model)), X_(X), s_(s), dom_(dom), ubar_x_(std::move(background_x)) {
    if (model_->d() < 2) throw SimulateError("two-dimensional run needs a d = 2 model");
    m1_ = dom_.cells * dom_.per_cell;
    m2_ = dom_.transverse_points;
    if (int(ubar_x_.rows()) != m1_ || int(ubar_x_.cols()) != model_->n())
      throw SimulateError("background grid does not match the domain");
    double amax = 1e-8;
    for (int i = 0; i < m1_; ++i) {
      Eigen::MatrixXd A = model_->jacobian(0, ubar_x_.row(i).transpose());
      A -= s_ * Eigen::MatrixXd::Identity(model_->n(), model_->n());
      double a1 = X_ * A.cwiseAbs().rowwise().sum().maxCoeff();
      Eigen::MatrixXd B = model_->jacobian(1, ubar_x_.row(i).transpose());
      double a2 = X_ * B.cwiseAbs().rowwise().sum().maxCoeff();
      amax = std::max(amax, std::max(a1, a2));
    }
    double dx = std::min(double(dom_.cells) / m1_, dom_.transverse_length / m2_);
    cfl_dt_ = 0.5 * dx / amax;
    dt_ = (dt > 0.0) ? dt : 0.8 * cfl_dt_;
    what_.assign(model_->n(), CMat::Zero(m1_, m2_));
    init_factors();
  }

  static Simulation2 from_profile(const WaveProfile& p, DomainSpec2 dom,
                                  const PerturbationSpec& pert = {}, double dt = 0.0) {
    const int m1 = dom.cells * dom.per_cell;
    Mat bg(m1, p.n());
    for (int i = 0; i < m1; ++i)
      bg.row(i) = trig_eval_cols(p.fourier_coeffs, double(i) / dom.per_cell).transpose();
    Simulation2 sim(p.model, p.X, p.s, std::move(bg), dom, dt);
    sim.apply_perturbation(pert);
    return sim;
  }

  static Simulation2 from_constant(std::shared_ptr<const ModelSystem> model,
                                   const Eigen::VectorXd& state, DomainSpec2 dom,
                                   const PerturbationSpec& pert = {}, double dt = 0.0) {
    const int m1 = dom.cells * dom.per_cell;
    Mat bg = state.transpose().replicate(m1, 1);
    Simulation2 sim(std::move(model), 1.0, 0.0, std::move(bg), dom, dt);
    sim.apply_perturbation(pert);
    return sim;
  }

  double t() const { return t_; }
  double dt() const { return dt_; }
  int m1() const { return m1_; }
  int m2() const { return m2_; }
  double length1() const { return double(dom_.cells); }
  double length2() const { return dom_.transverse_length; }

  /// Deviation component c on the grid.
  Mat deviation(int c) const { return ifft2(what_[c]); }

  double deviation_l2() const {
    double acc = 0.0;
    for (int c = 0; c < int(what_.size()); ++c) acc += ifft2(what_[c]).squaredNorm();
    return std::sqrt(acc * length1() * length2() / (m1_ * m2_));
  }

  double mean_deviation(int c) const { return what_[c](0, 0).real(); }

  void step() {
    std::vector<CMat> n0 = flux_divergence(what_);
    std::vector<CMat> stage(what_.size());
    for (std::size_t c = 0; c < what_.size(); ++c) {
      stage[c] = efac_.cwiseProduct(what_[c] + dt_ * n0[c]);
      dealias(stage[c]);
    }
    std::vector<CMat> n1 = flux_divergence(stage);
    for (std::size_t c = 0; c < what_.size(); ++c) {
      what_[c] = efac_.cwiseProduct(what_[c] + (0.5 * dt_) * n0[c]) + (0.5 * dt_) * n1[c];
      dealias(what_[c]);
      if (!what_[c].allFinite() || what_[c].cwiseAbs().maxCoeff() > 1e10)
        throw BlowupError(t_);
    }
    t_ += dt_;
  }

  void run(double T, const std::function<void(const Simulation2&)>& observer = {},
           int cadence = 0) {
    long k = 0;
    if (observer) observer(*this);
    while (t_ < T - 1e-12) {
      double saved = dt_;
      if (t_ + dt_ > T) set_dt(T - t_);
      step();
      if (dt_ != saved) set_dt(saved);
      ++k;
      if (observer && cadence > 0 && k % cadence == 0) observer(*this);
    }
    if (observer && k > 0 && (cadence <= 0 || k % cadence != 0)) observer(*this);
  }

 private:
  void set_dt(double dt) {
    dt_ = dt;
    init_factors();
  }

  static CMat fft2(const Mat& f) {
    CMat tmp(f.rows(), f.cols());
    for (int j = 0; j < f.cols(); ++j) tmp.col(j) = fourier_coeffs(Vec(f.col(j)));
    CMat out(f.rows(), f.cols());
    for (int i = 0; i < f.rows(); ++i) {
      CVec row = tmp.row(i).transpose();
      // FFT along the transverse direction (complex input): use the matrix
      // of the 1d transform via fourier_coeffs on real/imag parts
      CVec re = fourier_coeffs(Vec(row.real()));
      CVec im = fourier_coeffs(Vec(row.imag()));
      out.row(i) = (re + Cplx(0, 1) * im).transpose();
    }
    return out;
  }

  static Mat ifft2(const CMat& c) {
    CMat tmp(c.rows(), c.cols());
    for (int i = 0; i < c.rows(); ++i) {
      CVec row = c.row(i).transpose();
      CVec re = fourier_synthesis(CVec(row.real().cast<Cplx>()));
      CVec im = fourier_synthesis(CVec(row.imag().cast<Cplx>()));
      tmp.row(i) = (re + Cplx(0, 1) * im).transpose();
    }
    Mat out(c.rows(), c.cols());
    for (int j = 0; j < c.cols(); ++j)
      out.col(j) = fourier_synthesis(CVec(tmp.col(j))).real();
    return out;
  }

  void init_factors() {
    ik1_.resize(m1_);
    ik2_.resize(m2_);
    for (int i = 0; i < m1_; ++i) {
      double k = two_pi * fft_freq(i, m1_) / length1();
      if (2 * i == m1_) k = 0.0;
      ik1_[i] = Cplx(0.0, k);
    }
    for (int j = 0; j < m2_; ++j) {
      double k = two_pi * fft_freq(j, m2_) / length2();
      if (2 * j == m2_) k = 0.0;
      ik2_[j] = Cplx(0.0, k);
    }
    efac_.resize(m1_, m2_);
    for (int i = 0; i < m1_; ++i)
      for (int j = 0; j < m2_; ++j) {
        double ksq = std::norm(ik1_[i]) + std::norm(ik2_[j]);
        efac_(i, j) = std::exp(-ksq * dt_);
      }
  }

  std::vector<CMat> flux_divergence(const std::vector<CMat>& wh) const {
    const int n = model_->n();
    std::vector<Mat> w(n);
    for (int c = 0; c < n; ++c) w[c] = ifft2(wh[c]);
    std::vector<Mat> F1(n, Mat(m1_, m2_)), F2(n, Mat(m1_, m2_));
    Eigen::VectorXd u(n), ub(n);
    for (int i = 0; i < m1_; ++i)
      for (int j = 0; j < m2_; ++j) {
        for (int c = 0; c < n; ++c) {
          ub[c] = ubar_x_(i, c);
          u[c] = ub[c] + w[c](i, j);
        }
        Eigen::VectorXd v1 =
            X_ * (model_->flux(0, u) - model_->flux(0, ub) - s_ * (u - ub));
        Eigen::VectorXd v2 = X_ * (model_->flux(1, u) - model_->flux(1, ub));
        for (int c = 0; c < n; ++c) {
          F1[c](i, j) = v1[c];
          F2[c](i, j) = v2[c];
        }
      }
    std::vector<CMat> out(n);
    for (int c = 0; c < n; ++c) {
      CMat f1 = fft2(F1[c]);
      CMat f2 = fft2(F2[c]);
      CMat o(m1_, m2_);
      for (int i = 0; i < m1_; ++i)
        for (int j = 0; j < m2_; ++j) o(i, j) = -ik1_[i] * f1(i, j) - ik2_[j] * f2(i, j);
      dealias(o);
      out[c] = o;
    }
    return out;
  }

  void dealias(CMat& c) const {
    for (int i = 0; i < m1_; ++i)
      if (3 * std::abs(fft_freq(i, m1_)) > m1_) c.row(i).setZero();
    for (int j = 0; j < m2_; ++j)
      if (3 * std::abs(fft_freq(j, m2_)) > m2_) c.col(j).setZero();
  }

  void apply_perturbation(const PerturbationSpec& pert) {
    const int n = model_->n();
    std::vector<Mat> w(n, Mat::Zero(m1_, m2_));
    switch (pert.shape) {
      case PerturbationSpec::Shape::None:
        break;
      case PerturbationSpec::Shape::Gaussian: {
        double c1 = 0.5 * length1(), c2 = 0.5 * length2();
        for (int i = 0; i < m1_; ++i)
          for (int j = 0; j < m2_; ++j) {
            double x = double(i) * length1() / m1_ - c1;
            double z = double(j) * length2() / m2_ - c2;
            double g = 0.0;
            for (int a = -1; a <= 1; ++a)
              for (int b = -1; b <= 1; ++b) {
                double xx = x + a * length1(), zz = z + b * length2();
                g += std::exp(-(xx * xx + zz * zz) / (2.0 * pert.width * pert.width));
              }
            w[pert.component](i, j) = pert.amplitude * g;
          }
        break;
      }
      default:
        throw SimulateError("two-dimensional runs support None or Gaussian perturbations");
    }
    for (int c = 0; c < n; ++c) {
      what_[c] = fft2(w[c]);
      dealias(what_[c]);
    }
  }

  std::shared_ptr<const ModelSystem> model_;
  double X_, s_;
  DomainSpec2 dom_;
  Mat ubar_x_;
  int m1_ = 0, m2_ = 0;
  std::vector<CMat> what_;
  CVec ik1_, ik2_;
  CMat efac_;
  double t_ = 0.0, dt_ = 0.0, cfl_dt_ = 0.0;
};

// ---------------------------------------------------------------------------
// Damping inequality diagnostic
// ---------------------------------------------------------------------------

/// Minimal constant C such that, along the recorded trajectory,
///   |v(t)|_{H^K}^2 <= C e^{-theta t} |v(0)|_{H^K}^2
///                     + C int_0^t e^{-theta (t-s)} (|v|_{L2}^2 + |(psi_t, psi_x)|_{H^K}^2) ds
/// holds at every sample (trapezoid quadrature for the memory integral).
struct DampingRecord {
  double theta = 0.1;
  double C_min = 0.0;
  bool finite = true;
};

inline DampingRecord damping_monitor(const std::vector<double>& times,
                                     const std::vector<double>& v_hk_sq,
                                     const std::vector<double>& v_l2_sq,
                                     const std::vector<double>& mod_hk_sq,
                                     double theta = 0.1) {
  const std::size_t N = times.size();
  if (v_hk_sq.size() != N || v_l2_sq.size() != N || mod_hk_sq.size() != N || N < 2)
    throw SimulateError("damping monitor needs aligned series of length >= 2");
  DampingRecord rec;
  rec.theta = theta;
  double integral = 0.0;  // int_0^{t_i} e^{theta s} (source) ds, updated incrementally
  auto source = [&](std::size_t i) { return v_l2_sq[i] + mod_hk_sq[i]; };
  for (std::size_t i = 0; i < N; ++i) {
    if (i > 0) {
      double h = times[i] - times[i - 1];
      integral += 0.5 * h * (std::exp(theta * times[i - 1]) * source(i - 1) +
                             std::exp(theta * times[i]) * source(i));
    }
    double rhs = std::exp(-theta * times[i]) * (v_hk_sq[0] + integral);
    if (v_hk_sq[i] <= 0.0) continue;
    if (rhs <= 0.0) {
      rec.finite = false;
      continue;
    }
    rec.C_min = std::max(rec.C_min, v_hk_sq[i] / rhs);
  }
  return rec;
}

}  // namespace wavetrain

#endif
