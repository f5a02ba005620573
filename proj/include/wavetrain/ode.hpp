#ifndef WAVETRAIN_ODE_HPP
#define WAVETRAIN_ODE_HPP

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <stdexcept>

namespace wavetrain {

/// Adaptive Dormand-Prince 5(4) integrator for small autonomous systems.
class Dopri5 {
 public:
  using Rhs = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

  explicit Dopri5(Rhs rhs, double abs_tol = 1e-12, double rel_tol = 1e-12)
      : rhs_(std::move(rhs)), abs_tol_(abs_tol), rel_tol_(rel_tol) {}

  Eigen::VectorXd integrate(Eigen::VectorXd y, double t0, double t1) const {
    double t = t0;
    double h = (t1 - t0) * 1e-2;
    if (h == 0.0) return y;
    const double dir = t1 > t0 ? 1.0 : -1.0;
    h = dir * std::abs(h);
    int steps = 0;
    while (dir * (t1 - t) > 0.0) {
      if (dir * (t + h - t1) > 0.0) h = t1 - t;
      Eigen::VectorXd y5, err;
      step(y, h, y5, err);
      const double sc = abs_tol_ + rel_tol_ * std::max(y.norm(), y5.norm());
      const double e = err.norm() / sc;
      if (e <= 1.0) {
        t += h;
        y = y5;
      }
      const double fac = std::clamp(0.9 * std::pow(e > 0 ? e : 1e-16, -0.2), 0.2, 5.0);
      h *= fac;
      if (++steps > 2000000) throw std::runtime_error("Dopri5: step limit exceeded");
    }
    return y;
  }

  /// First time t > t_min at which event(y(t)) crosses zero from below,
  /// refined by bisection on integration restarts.
  double first_crossing(Eigen::VectorXd y0, std::function<double(const Eigen::VectorXd&)> event,
                        double t_min, double t_max, double dt_scan) const {
    double t_prev = 0.0;
    Eigen::VectorXd y_prev = y0;
    double g_prev = event(y_prev);
    for (double t = dt_scan; t <= t_max; t += dt_scan) {
      Eigen::VectorXd y = integrate(y_prev, t_prev, t);
      double g = event(y);
      if (t > t_min && g_prev < 0.0 && g >= 0.0) {
        double lo = t_prev, hi = t;
        Eigen::VectorXd ylo = y_prev;
        for (int it = 0; it < 100; ++it) {
          double mid = 0.5 * (lo + hi);
          Eigen::VectorXd ym = integrate(ylo, lo, mid);
          if (event(ym) < 0.0) {
            lo = mid;
            ylo = ym;
          } else {
            hi = mid;
          }
          if (hi - lo < 1e-13 * std::max(1.0, hi)) break;
        }
        return 0.5 * (lo + hi);
      }
      t_prev = t;
      y_prev = y;
      g_prev = g;
    }
    throw std::runtime_error("Dopri5: no section crossing found");
  }

 private:
  void step(const Eigen::VectorXd& y, double h, Eigen::VectorXd& y5, Eigen::VectorXd& err) const {
    static const double a21 = 1.0 / 5;
    static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                        a54 = -212.0 / 729;
    static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                        a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                        b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                        e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    Eigen::VectorXd k1 = rhs_(y);
    Eigen::VectorXd k2 = rhs_(y + h * a21 * k1);
    Eigen::VectorXd k3 = rhs_(y + h * (a31 * k1 + a32 * k2));
    Eigen::VectorXd k4 = rhs_(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    Eigen::VectorXd k5 = rhs_(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    Eigen::VectorXd k6 = rhs_(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    y5 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    Eigen::VectorXd k7 = rhs_(y5);
    err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
  }

  Rhs rhs_;
  double abs_tol_, rel_tol_;
};

}  // namespace wavetrain

#endif
