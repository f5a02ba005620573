#ifndef WAVETRAIN_FOURIER_HPP
#define WAVETRAIN_FOURIER_HPP

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace wavetrain {

using Cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Integer frequency of FFT bin i on an m-point grid (period-1 convention).
inline int fft_freq(int i, int m) { return (i <= m / 2) ? i : i - m; }

/// Forward FFT with 1/m normalization, so output are Fourier coefficients
/// c_k of f(x) = sum_k c_k exp(2*pi*i*k*x) sampled at x_i = i/m.
inline CVec fourier_coeffs(const CVec& samples) {
  Eigen::FFT<double> fft;
  std::vector<Cplx> in(samples.data(), samples.data() + samples.size());
  std::vector<Cplx> out(in.size());
  fft.fwd(out, in);
  CVec c(samples.size());
  for (int i = 0; i < c.size(); ++i) c[i] = out[i] / double(samples.size());
  return c;
}

inline CVec fourier_coeffs(const Vec& samples) {
  return fourier_coeffs(CVec(samples.cast<Cplx>()));
}

inline CVec fourier_synthesis(const CVec& coeffs) {
  Eigen::FFT<double> fft;
  std::vector<Cplx> in(coeffs.size());
  for (int i = 0; i < coeffs.size(); ++i) in[i] = coeffs[i];
  std::vector<Cplx> out(in.size());
  fft.inv(out, in);
  CVec s(coeffs.size());
  for (int i = 0; i < s.size(); ++i) s[i] = out[i] * double(coeffs.size());
  return s;
}

inline Vec fourier_synthesis_real(const CVec& coeffs) {
  return fourier_synthesis(coeffs).real();
}

/// Columnwise Fourier coefficients of a multi-component field (m x n samples).
inline CMat fourier_coeffs_cols(const Mat& samples) {
  CMat c(samples.rows(), samples.cols());
  for (int j = 0; j < samples.cols(); ++j)
    c.col(j) = fourier_coeffs(Vec(samples.col(j)));
  return c;
}

inline Mat fourier_synthesis_cols(const CMat& coeffs) {
  Mat s(coeffs.rows(), coeffs.cols());
  for (int j = 0; j < coeffs.cols(); ++j)
    s.col(j) = fourier_synthesis_real(coeffs.col(j));
  return s;
}

/// Spectral derivative on the period-`period` grid, acting on coefficients.
inline CVec spectral_derivative_coeffs(const CVec& coeffs, double period = 1.0) {
  const int m = int(coeffs.size());
  CVec d(m);
  for (int i = 0; i < m; ++i) {
    int k = fft_freq(i, m);
    if (2 * i == m) k = 0;  // drop the unmatched Nyquist mode
    d[i] = Cplx(0.0, two_pi * k / period) * coeffs[i];
  }
  return d;
}

inline Vec spectral_derivative(const Vec& samples, double period = 1.0) {
  return fourier_synthesis_real(spectral_derivative_coeffs(fourier_coeffs(samples), period));
}

/// Dense real differentiation matrix for an m-point period-`period` grid.
inline Mat differentiation_matrix(int m, double period = 1.0) {
  Mat D(m, m);
  Vec e = Vec::Zero(m);
  for (int j = 0; j < m; ++j) {
    e[j] = 1.0;
    D.col(j) = spectral_derivative(e, period);
    e[j] = 0.0;
  }
  return D;
}

/// Evaluate the trigonometric interpolant at arbitrary points (period 1).
inline Cplx trig_eval(const CVec& coeffs, double x) {
  const int m = int(coeffs.size());
  Cplx acc(0.0, 0.0);
  for (int i = 0; i < m; ++i) {
    int k = fft_freq(i, m);
    acc += coeffs[i] * std::exp(Cplx(0.0, two_pi * k * x));
  }
  return acc;
}

inline double trig_eval_real(const CVec& coeffs, double x) { return trig_eval(coeffs, x).real(); }

/// Row vector of all components of a vector-valued interpolant at x.
inline Vec trig_eval_cols(const CMat& coeffs, double x) {
  Vec out(coeffs.cols());
  for (int j = 0; j < coeffs.cols(); ++j) out[j] = trig_eval_real(coeffs.col(j), x);
  return out;
}

/// Resample an m-point periodic field onto an m2-point grid (same period).
inline CVec trig_resample(const CVec& coeffs, int m2) {
  const int m = int(coeffs.size());
  CVec c2 = CVec::Zero(m2);
  for (int i = 0; i < m; ++i) {
    int k = fft_freq(i, m);
    if (2 * std::abs(k) >= m2) continue;
    int i2 = k >= 0 ? k : k + m2;
    c2[i2] += coeffs[i];
  }
  return fourier_synthesis(c2);
}

inline Vec trig_resample_real(const Vec& samples, int m2) {
  return trig_resample(fourier_coeffs(samples), m2).real();
}

/// Trapezoid L2 norm of a periodic grid function (cell-averaged quadrature).
inline double l2_norm_periodic(const Vec& samples, double length = 1.0) {
  return std::sqrt(samples.squaredNorm() * length / double(samples.size()));
}

inline double l2_norm_periodic(const Mat& samples, double length = 1.0) {
  return std::sqrt(samples.squaredNorm() * length / double(samples.rows()));
}

}  // namespace wavetrain

#endif
