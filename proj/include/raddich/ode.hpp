#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "raddich/errors.hpp"

namespace raddich {

struct OdeOptions {
  double rtol = 1e-11;
  double atol = 1e-14;
  double h_max = std::numeric_limits<double>::infinity();
  double h_init = 0.0;  ///< 0 selects h_max or 1e-2, whichever is smaller
  long max_steps = 5'000'000;
};

struct OdeStats {
  long accepted = 0;
  long rejected = 0;
};

/// Dormand-Prince 5(4) with FSAL and elementary step control.
///
/// Integrates X' = rhs(t, X) from t0 to t1 (either direction). The state is a
/// matrix whose columns are independent solutions; the error is measured
/// column-wise relative to each column's magnitude.
template <class Rhs>
OdeStats integrate_dopri5(Rhs&& rhs, Eigen::MatrixXd& x, double t0, double t1,
                          const OdeOptions& opt = {}) {
  OdeStats stats;
  if (t0 == t1 || x.size() == 0) return stats;
  const double dir = t1 > t0 ? 1.0 : -1.0;
  const double span = std::abs(t1 - t0);

  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                   a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                   a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                   b6 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                   e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  double h = opt.h_init > 0 ? opt.h_init : std::min(opt.h_max, 1e-2);
  h = std::min({h, opt.h_max, span});

  Eigen::MatrixXd k1(x.rows(), x.cols()), k2 = k1, k3 = k1, k4 = k1, k5 = k1, k6 = k1, k7 = k1;
  Eigen::MatrixXd y(x.rows(), x.cols()), xn(x.rows(), x.cols()), err(x.rows(), x.cols());
  double t = t0;
  rhs(t, x, k1);

  while (dir * (t1 - t) > 0.0) {
    if (stats.accepted + stats.rejected >= opt.max_steps)
      fail(ErrorKind::solver, "integrator: step budget exhausted at t = " + std::to_string(t));
    bool last = false;
    if (h >= dir * (t1 - t) * (1.0 - 1e-12)) {
      h = dir * (t1 - t);
      last = true;
    }
    const double hs = dir * h;
    y = x + hs * a21 * k1;
    rhs(t + c2 * hs, y, k2);
    y = x + hs * (a31 * k1 + a32 * k2);
    rhs(t + c3 * hs, y, k3);
    y = x + hs * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(t + c4 * hs, y, k4);
    y = x + hs * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(t + c5 * hs, y, k5);
    y = x + hs * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(t + hs, y, k6);
    xn = x + hs * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    rhs(t + hs, xn, k7);
    err = hs * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

    double enorm = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double scale =
          opt.atol + opt.rtol * std::max(x.col(j).cwiseAbs().maxCoeff(), xn.col(j).cwiseAbs().maxCoeff());
      enorm = std::max(enorm, err.col(j).cwiseAbs().maxCoeff() / scale);
    }
    if (!std::isfinite(enorm)) fail(ErrorKind::solver, "integrator: non-finite state");

    if (enorm <= 1.0) {
      ++stats.accepted;
      t = last ? t1 : t + hs;
      x.swap(xn);
      k1.swap(k7);
      const double grow = enorm == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(enorm, -0.2), 0.2, 5.0);
      h = std::min(h * grow, opt.h_max);
    } else {
      ++stats.rejected;
      h *= std::clamp(0.9 * std::pow(enorm, -0.2), 0.1, 0.9);
      if (h < 1e-14 * std::max(1.0, std::abs(t)))
        fail(ErrorKind::solver, "integrator: step size underflow at t = " + std::to_string(t));
    }
  }
  return stats;
}

}  // namespace raddich
