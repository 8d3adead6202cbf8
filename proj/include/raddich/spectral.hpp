#pragma once

// Spectral bookkeeping for the limiting operator A: the shift set Sigma(n),
// admissibility of the rescaling weight alpha, and the rate arithmetic that
// decides when the unstable subspace equals the traces of weak solutions.

#include <algorithm>
#include <cmath>
#include <limits>

#include "raddich/errors.hpp"

namespace raddich {

/// Membership of an integer k in Sigma(n) = ((-inf, 2-n] U [0, inf)) n Z.
inline bool in_shift_set(int n, long k) { return k <= 2 - n || k >= 0; }

/// dist(-alpha, Sigma(n)). Zero means alpha is forbidden.
inline double validate_alpha(int n, double alpha) {
  require(n >= 2, "validate_alpha: n must be >= 2");
  const double x = -alpha;
  double best = std::numeric_limits<double>::infinity();
  const long cands[] = {static_cast<long>(std::floor(x)), static_cast<long>(std::ceil(x)), 0L,
                        static_cast<long>(2 - n)};
  for (long k : cands)
    if (in_shift_set(n, k)) best = std::min(best, std::abs(x - static_cast<double>(k)));
  return best;
}

/// Eigenvalues of A closest to zero on either side.
struct LimitingGap {
  double lowest_positive;   ///< smallest eigenvalue of A above 0
  double highest_negative;  ///< largest eigenvalue of A below 0
};

inline LimitingGap limiting_gap(int n, double alpha) {
  require(validate_alpha(n, alpha) > 0.0, "limiting_gap: alpha is forbidden (-alpha in Sigma(n))");
  long up = static_cast<long>(std::floor(-alpha)) + 1;
  if (!in_shift_set(n, up)) up = 0;
  long down = static_cast<long>(std::ceil(-alpha)) - 1;
  if (!in_shift_set(n, down)) down = 2 - n;
  return {alpha + static_cast<double>(up), alpha + static_cast<double>(down)};
}

/// Feasible dichotomy rates and the subset compatible with the trace window
/// -eta_s < alpha < eta_u + n/2 - 1.
///
/// Dichotomy rates: eta_u in [0, lowest_positive), eta_s in [0, -highest_negative).
/// The window adds eta_u > alpha - n/2 + 1 and eta_s > -alpha.
struct RateWindow {
  double eta_u_max;    ///< exclusive upper bound on eta_u
  double eta_s_max;    ///< exclusive upper bound on eta_s
  double eta_u_floor;  ///< eta_u must exceed this (or be >= 0 if negative)
  double eta_s_floor;  ///< eta_s must exceed this (or be >= 0 if negative)

  bool eta_u_feasible() const { return eta_u_floor < 0.0 ? eta_u_max > 0.0 : eta_u_floor < eta_u_max; }
  bool eta_s_feasible() const { return eta_s_floor < 0.0 ? eta_s_max > 0.0 : eta_s_floor < eta_s_max; }
  bool nonempty() const { return eta_u_feasible() && eta_s_feasible(); }
};

inline RateWindow trace_window(int n, double alpha) {
  const LimitingGap g = limiting_gap(n, alpha);
  return {g.lowest_positive, -g.highest_negative, alpha + (1.0 - 0.5 * n), -alpha};
}

/// True when the unstable subspace coincides with weak-solution traces for
/// this (n, alpha), by the rate arithmetic above.
inline bool alpha_in_trace_window(int n, double alpha) {
  if (validate_alpha(n, alpha) <= 0.0) return false;
  return trace_window(n, alpha).nonempty();
}

}  // namespace raddich
