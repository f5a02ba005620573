#ifndef WAVETRAIN_FIT_HPP
#define WAVETRAIN_FIT_HPP

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace wavetrain {

struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Least-squares line through (log(1+t), log v): v ~ C (1+t)^slope.
struct LogLogFit {
  double slope = 0.0;
  double log_intercept = 0.0;   // log C
  double max_residual = 0.0;    // max |log v - fit| over the samples
  int points = 0;

  double value_at(double t) const { return std::exp(log_intercept + slope * std::log1p(t)); }
};

inline LogLogFit fit_loglog(const std::vector<double>& times, const std::vector<double>& values) {
  if (times.size() != values.size() || times.size() < 2)
    throw FitError("fit_loglog: need >= 2 matching samples");
  const int n = int(times.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    if (!(values[i] > 0.0)) throw FitError("fit_loglog: nonpositive value in series");
    double x = std::log1p(times[i]), y = std::log(values[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double det = n * sxx - sx * sx;
  if (std::abs(det) < 1e-14) throw FitError("fit_loglog: degenerate time ladder");
  LogLogFit f;
  f.points = n;
  f.slope = (n * sxy - sx * sy) / det;
  f.log_intercept = (sy - f.slope * sx) / n;
  for (int i = 0; i < n; ++i) {
    double r = std::abs(std::log(values[i]) - (f.log_intercept + f.slope * std::log1p(times[i])));
    f.max_residual = std::max(f.max_residual, r);
  }
  return f;
}

/// Geometric time ladder covering [t0, t1] with `points` samples.
inline std::vector<double> time_ladder(double t0, double t1, int points) {
  if (points < 2 || !(t1 > t0) || !(t0 > 0)) throw FitError("time_ladder: bad window");
  std::vector<double> t(points);
  const double ratio = std::pow(t1 / t0, 1.0 / (points - 1));
  for (int i = 0; i < points; ++i) t[i] = t0 * std::pow(ratio, i);
  return t;
}

/// Least-squares slope of y against x through the origin.
inline double fit_through_origin(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty()) throw FitError("fit_through_origin: size mismatch");
  double num = 0, den = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += x[i] * y[i];
    den += x[i] * x[i];
  }
  if (den == 0) throw FitError("fit_through_origin: zero abscissa");
  return num / den;
}

}  // namespace wavetrain

#endif
