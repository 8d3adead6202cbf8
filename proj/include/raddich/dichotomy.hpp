#pragma once

// Half-line exponential dichotomy of the rescaled trace system: unstable
// frames transported forward from the far end where B(tau) is negligible,
// stable frames transported backward from the other end, oblique projections
// and the evolutions Phi^u, Phi^s between grid points.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "raddich/errors.hpp"
#include "raddich/ode.hpp"
#include "raddich/potential.hpp"
#include "raddich/ses.hpp"
#include "raddich/spectral.hpp"
#include "raddich/sphere_basis.hpp"

namespace raddich {

enum class Flavor { unstable, stable };

inline const char* to_string(Flavor f) { return f == Flavor::unstable ? "unstable" : "stable"; }

/// Orthonormal basis (in the beta-weighted state norm) of a subspace of the
/// truncated state space at time tau. Columns are full state vectors.
struct SubspaceFrame {
  double tau = 0.0;
  Flavor flavor = Flavor::unstable;
  int n = 3;
  int l_max = 0;
  int value_dim = 1;
  double alpha = 0.0;
  double beta = 0.0;
  Eigen::MatrixXd vectors;

  int size() const { return static_cast<int>(vectors.cols()); }

  RescaledState state(int j) const {
    return rescaled_from_vector(vectors.col(j).cast<cplx>(), tau, alpha, n, l_max, value_dim);
  }

  Eigen::MatrixXd gram() const {
    const Eigen::MatrixXd y = state_weights(n, l_max, value_dim, beta).asDiagonal() * vectors;
    return y.transpose() * y;
  }
};

// -- limiting spectral frames ---------------------------------------------------

namespace detail {

// Orthonormalizes the columns of X in the norm ||diag(w) x||; returns R with
// positive diagonal such that X_in = X_out R.
inline Eigen::MatrixXd weighted_qr(const Eigen::VectorXd& w, Eigen::MatrixXd& X) {
  const Eigen::Index k = X.cols();
  if (k == 0) return Eigen::MatrixXd(0, 0);
  const Eigen::MatrixXd Y = w.asDiagonal() * X;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(Y);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(Y.rows(), k);
  Eigen::MatrixXd R = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < k; ++j)
    if (R(j, j) < 0.0) {
      R.row(j) *= -1.0;
      Q.col(j) *= -1.0;
    }
  X = w.cwiseInverse().asDiagonal() * Q;
  return R;
}

inline double condition_number(const Eigen::MatrixXd& m) {
  if (m.size() == 0) return 1.0;
  const Eigen::VectorXd s = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
  return s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
}

// Eigenvectors of the limiting operator restricted to the coordinates of the
// listed (degree, f-index, g-index) triples, split by sign of the eigenvalue.
struct Coordinate {
  int l;
  Eigen::Index fi;
  Eigen::Index gi;
};

inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> limiting_frames(int n, double alpha, Eigen::Index dim,
                                                                   const std::vector<Coordinate>& coords) {
  std::vector<Eigen::VectorXd> up, down;
  for (const auto& c : coords) {
    const double nu_p = alpha + c.l, nu_m = alpha + 2.0 - n - c.l;
    auto vec = [&](double f, double g) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
      v[c.fi] = f;
      v[c.gi] = g;
      return v;
    };
    auto& set_p = nu_p > 0.0 ? up : down;
    auto& set_m = nu_m > 0.0 ? up : down;
    if (nu_p == nu_m) {
      // Jordan block: the generalized eigenspace is the whole pair.
      set_p.push_back(vec(1.0, 0.0));
      set_p.push_back(vec(0.0, 1.0));
    } else {
      set_p.push_back(vec(1.0, nu_p - alpha));
      set_m.push_back(vec(1.0, nu_m - alpha));
    }
  }
  auto pack = [dim](const std::vector<Eigen::VectorXd>& vs) {
    Eigen::MatrixXd m(dim, static_cast<Eigen::Index>(vs.size()));
    for (std::size_t j = 0; j < vs.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = vs[j];
    return m;
  };
  return {pack(up), pack(down)};
}

inline std::vector<Coordinate> full_coordinates(int n, int l_max, int value_dim) {
  const auto modes = enumerate_modes(n, l_max);
  const Eigen::Index h = static_cast<Eigen::Index>(modes.size()) * value_dim;
  std::vector<Coordinate> out;
  for (std::size_t k = 0; k < modes.size(); ++k)
    for (int c = 0; c < value_dim; ++c) {
      const Eigen::Index i = static_cast<Eigen::Index>(k) * value_dim + c;
      out.push_back({modes[k].l, i, h + i});
    }
  return out;
}

}  // namespace detail

/// Unstable and stable eigenspaces of A (the tau -> -infinity limit of the
/// dichotomy projections), orthonormal in the beta-weighted norm.
inline std::pair<SubspaceFrame, SubspaceFrame> spectral_projections_A(int n, double alpha, int l_max,
                                                                      int value_dim = 1, double beta = 0.0,
                                                                      double gap_tol = 1e-6) {
  check_dimension(n);
  if (validate_alpha(n, alpha) <= gap_tol)
    fail(ErrorKind::precondition, "alpha = " + std::to_string(alpha) + " is forbidden: -alpha lies in Sigma(n)");
  const Eigen::Index dim = 2 * static_cast<Eigen::Index>(mode_count(n, l_max)) * value_dim;
  auto [u, s] = detail::limiting_frames(n, alpha, dim, detail::full_coordinates(n, l_max, value_dim));
  const Eigen::VectorXd w = state_weights(n, l_max, value_dim, beta);
  detail::weighted_qr(w, u);
  detail::weighted_qr(w, s);
  const double inf = -std::numeric_limits<double>::infinity();
  return {SubspaceFrame{inf, Flavor::unstable, n, l_max, value_dim, alpha, beta, u},
          SubspaceFrame{inf, Flavor::stable, n, l_max, value_dim, alpha, beta, s}};
}

// -- closed form for V = 0, n = 3 -----------------------------------------------

/// Exact dichotomy projections for V = 0, n = 3: per degree l,
/// P^u z = ((l+1) z1 + z2)/(2l+1) (1, l), P^s z = (l z1 - z2)/(2l+1) (1, -(l+1)).
inline RescaledState closed_form_projection(const RescaledState& z, Flavor flavor) {
  if (z.f.dimension() != 3) fail(ErrorKind::precondition, "closed_form_projection: n = 3 only");
  RescaledState out = z;
  const auto modes = enumerate_modes(3, z.f.l_max());
  const int N = z.f.value_dim();
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const double l = modes[k].l;
    for (int c = 0; c < N; ++c) {
      const int kk = static_cast<int>(k);
      const cplx z1 = z.f.coeff(kk, c), z2 = z.g.coeff(kk, c);
      if (flavor == Flavor::unstable) {
        const cplx a = ((l + 1.0) * z1 + z2) / (2.0 * l + 1.0);
        out.f.coeff(kk, c) = a;
        out.g.coeff(kk, c) = l * a;
      } else {
        const cplx b = (l * z1 - z2) / (2.0 * l + 1.0);
        out.f.coeff(kk, c) = b;
        out.g.coeff(kk, c) = -(l + 1.0) * b;
      }
    }
  }
  return out;
}

/// Exact Phi^u(tau, tau0) (tau <= tau0) or Phi^s(tau, tau0) (tau >= tau0) for V = 0, n = 3.
inline RescaledState closed_form_evolution(const RescaledState& z, double tau, double tau0, Flavor flavor) {
  if (flavor == Flavor::unstable && tau > tau0)
    fail(ErrorKind::precondition, "closed_form_evolution: unstable evolution needs tau <= tau0");
  if (flavor == Flavor::stable && tau < tau0)
    fail(ErrorKind::precondition, "closed_form_evolution: stable evolution needs tau >= tau0");
  RescaledState out = closed_form_projection(z, flavor);
  const auto modes = enumerate_modes(3, z.f.l_max());
  const int N = z.f.value_dim();
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const double l = modes[k].l;
    const double rate = flavor == Flavor::unstable ? z.alpha + l : z.alpha - l - 1.0;
    const double factor = std::exp(rate * (tau - tau0));
    for (int c = 0; c < N; ++c) {
      out.f.coeff(static_cast<int>(k), c) *= factor;
      out.g.coeff(static_cast<int>(k), c) *= factor;
    }
  }
  out.tau = tau;
  return out;
}

// -- subspace transport ---------------------------------------------------------

struct PropagationResult {
  SubspaceFrame frame;
  /// T with Flow(tau_to, tau_from) V_from = V_to T.
  Eigen::MatrixXd transition;
};

/// Transports a frame under the rescaled system, re-orthonormalizing every
/// `orth_interval`. Unstable frames move forward, stable frames backward.
inline PropagationResult propagate_subspace(const SubspaceFrame& frame, double tau_to, const SesOperator& op,
                                            double orth_interval = 0.5, OdeOptions ode = {1e-12, 1e-15}) {
  require(std::isfinite(frame.tau), "propagate_subspace: frame needs a finite base time");
  if (frame.flavor == Flavor::unstable && tau_to < frame.tau)
    fail(ErrorKind::precondition, "propagate_subspace: unstable frames are transported forward");
  if (frame.flavor == Flavor::stable && tau_to > frame.tau)
    fail(ErrorKind::precondition, "propagate_subspace: stable frames are transported backward");
  require(frame.vectors.rows() == op.state_dim(), "propagate_subspace: frame/operator size mismatch");
  const Eigen::VectorXd w = state_weights(frame.n, frame.l_max, frame.value_dim, frame.beta);
  ode.h_max = std::min(ode.h_max, 0.1 / std::max(1.0, std::abs(op.alpha()) + lb_eigenvalue(op.dimension(), op.l_max())));
  auto rhs = [&op](double t, const Eigen::MatrixXd& X, Eigen::MatrixXd& dX) { op.apply_generator(t, X, dX); };

  PropagationResult out{frame, Eigen::MatrixXd::Identity(frame.size(), frame.size())};
  const double span = std::abs(tau_to - frame.tau);
  const int pieces = std::max(1, static_cast<int>(std::ceil(span / orth_interval - 1e-12)));
  double t = frame.tau;
  for (int p = 1; p <= pieces; ++p) {
    const double next = p == pieces ? tau_to : frame.tau + (tau_to - frame.tau) * p / pieces;
    integrate_dopri5(rhs, out.frame.vectors, t, next, ode);
    const Eigen::MatrixXd R = detail::weighted_qr(w, out.frame.vectors);
    if (detail::condition_number(R) > 1e4)
      fail(ErrorKind::dichotomy, "propagate_subspace: frame rank collapse at tau = " + std::to_string(next));
    out.transition = R * out.transition;
    t = next;
  }
  out.frame.tau = tau_to;
  return out;
}

// -- dichotomy table -------------------------------------------------------------

/// Which half line the table covers.
enum class HalfLine {
  inner,  ///< (-inf, log T]: unstable frames are the essential data
  outer   ///< [tau_start, +inf): stable frames are the essential data
};

struct DichotomyOptions {
  HalfLine side = HalfLine::inner;
  double tau_max = 0.0;               ///< log T (inner side)
  std::optional<double> tau_min;      ///< inner far end; automatic when empty
  double tau_start = 0.0;             ///< outer side near end
  std::optional<double> tau_end;      ///< outer far end; automatic when empty
  std::vector<double> grid;           ///< explicit grid; overrides the uniform one
  double dtau = 0.05;
  double beta = 0.0;
  double gap_tol = 1e-6;
  double asymptotic_tol = 1e-10;
  double orth_interval = 0.5;
  double transversality_tol = 1e-8;
  double search_limit = 60.0;  ///< how far the automatic endpoint search may go
  double zero_span = 6.0;      ///< minimal half-line length (and length when V = 0)
  double step_cap = 0.1;       ///< h <= step_cap / max(1, |alpha| + lambda_l)
  OdeOptions ode{1e-12, 1e-15};
};

/// Empirical rate certificate: ||Phi^u(tau, tau0)|| <= K e^{eta_u (tau - tau0)}
/// for tau <= tau0, ||Phi^s(tau, tau0)|| <= K e^{-eta_s (tau - tau0)} for tau >= tau0,
/// valid on the table grid.
struct RateCertificate {
  double eta_u = 0.0;
  double eta_s = 0.0;
  double K = 1.0;
};

/// Largest tau <= tau_max with e^{2 tau} sup_{t <= e^tau} |V(t)| < tol (searched
/// on a 0.25 lattice), and at most tau_max - min_span.
inline double auto_tau_min(const PotentialSpec& V, int n, double tau_max, double tol, double limit,
                           double min_span) {
  if (V.identically_zero()) return tau_max - min_span;
  std::vector<double> s, m;
  for (double tau = tau_max; tau >= tau_max - limit - 1e-12; tau -= 0.25) {
    s.push_back(tau);
    m.push_back(V.sup_norm(std::exp(tau), n));
  }
  for (std::size_t j = m.size() - 1; j-- > 0;) m[j] = std::max(m[j], m[j + 1]);
  for (std::size_t j = 0; j < s.size(); ++j)
    if (std::exp(2.0 * s[j]) * m[j] < tol) return std::min(s[j], tau_max - min_span);
  fail(ErrorKind::dichotomy, "no tau_min within search limit makes e^{2 tau} sup|V| < " + std::to_string(tol));
}

/// Smallest tau >= tau_start + min_span with e^{2 tau} sup_{t >= e^tau} |V(t)| < tol,
/// where the supremum is taken over the searched range.
inline double auto_tau_end(const PotentialSpec& V, int n, double tau_start, double tol, double limit,
                           double min_span) {
  if (V.identically_zero()) return tau_start + min_span;
  std::vector<double> s, m;
  for (double tau = tau_start; tau <= tau_start + limit + 1e-12; tau += 0.25) {
    s.push_back(tau);
    m.push_back(std::exp(2.0 * tau) * V.sup_norm(std::exp(tau), n));
  }
  for (std::size_t j = m.size() - 1; j-- > 0;) m[j] = std::max(m[j], m[j + 1]);
  for (std::size_t j = 0; j < s.size(); ++j)
    if (m[j] < tol) return std::max(s[j], tau_start + min_span);
  fail(ErrorKind::dichotomy, "no tau_end within search limit makes e^{2 tau} sup|V| < " + std::to_string(tol));
}

class DichotomyTable;
DichotomyTable build_dichotomy(const PotentialSpec& V, int n, double alpha, int l_max, DichotomyOptions opt);
void save_table(const DichotomyTable& table, std::ostream& os);
DichotomyTable load_table(std::istream& is, const PotentialSpec& V);

/// Frames, transition factors and coefficient maps on an increasing tau grid.
///
/// Decoupled potentials split into one track per degree l (all orders m share
/// it); coupled potentials use a single track over the full state.
class DichotomyTable {
 public:
  struct Track {
    int l = -1;              ///< degree, or -1 for the coupled track
    Eigen::Index dim = 0;
    int nu = 0, ns = 0;
    Eigen::VectorXd w;       ///< weights of the track coordinates
    std::vector<std::vector<Eigen::Index>> members;  ///< full-state indices per member block
    std::function<void(double, const Eigen::MatrixXd&, Eigen::MatrixXd&)> rhs;
    double h_max = 0.1;
    std::vector<Eigen::MatrixXd> U, S;  ///< frames per grid point
    std::vector<Eigen::MatrixXd> R;     ///< Flow(tau_{k+1}, tau_k) U_k = U_{k+1} R_k
    std::vector<Eigen::MatrixXd> H;     ///< Flow(tau_k, tau_{k+1}) S_{k+1} = S_k H_k
    std::vector<Eigen::MatrixXd> C;     ///< [U_k S_k]^{-1}
  };

  const SesOperator& op() const { return *op_; }
  std::shared_ptr<const SesOperator> op_ptr() const { return op_; }
  int dimension() const { return op_->dimension(); }
  double alpha() const { return op_->alpha(); }
  double beta() const { return beta_; }
  int l_max() const { return op_->l_max(); }
  int value_dim() const { return op_->value_dim(); }
  HalfLine side() const { return side_; }
  const std::vector<double>& grid() const { return grid_; }
  double tau_lo() const { return grid_.front(); }
  double tau_hi() const { return grid_.back(); }
  const RateCertificate& certificate() const { return cert_; }
  const std::vector<Track>& tracks() const { return tracks_; }
  double min_transversality() const { return min_angle_; }

  int unstable_dim() const {
    int d = 0;
    for (const auto& t : tracks_) d += t.nu * static_cast<int>(t.members.size());
    return d;
  }
  int stable_dim() const {
    int d = 0;
    for (const auto& t : tracks_) d += t.ns * static_cast<int>(t.members.size());
    return d;
  }

  /// Frame (full state) at a grid point or, by short propagation, at any tau in range.
  SubspaceFrame frame(double tau, Flavor flavor) const {
    check_range(tau);
    SubspaceFrame out{tau, flavor, dimension(), l_max(), value_dim(), alpha(), beta_,
                      Eigen::MatrixXd::Zero(op_->state_dim(), flavor == Flavor::unstable ? unstable_dim() : stable_dim())};
    Eigen::Index col = 0;
    for (const auto& tr : tracks_) {
      const Local loc = local_frames(tr, tau);
      const Eigen::MatrixXd& F = flavor == Flavor::unstable ? loc.U : loc.S;
      for (const auto& mem : tr.members) {
        for (Eigen::Index j = 0; j < F.cols(); ++j)
          for (Eigen::Index i = 0; i < tr.dim; ++i) out.vectors(mem[static_cast<std::size_t>(i)], col + j) = F(i, j);
        col += F.cols();
      }
    }
    return out;
  }

  /// P^{u,s}(tau) z.
  RescaledState project(const RescaledState& z, double tau, Flavor flavor) const {
    check_state(z);
    check_range(tau);
    Eigen::VectorXcd x = to_vector(z), out = Eigen::VectorXcd::Zero(x.size());
    for (const auto& tr : tracks_) {
      const Local loc = local_frames(tr, tau);
      const Eigen::MatrixXd X = gather(tr, x);
      const Eigen::MatrixXd Y = flavor == Flavor::unstable ? Eigen::MatrixXd(loc.U * (loc.C.topRows(tr.nu) * X))
                                                           : Eigen::MatrixXd(loc.S * (loc.C.bottomRows(tr.ns) * X));
      scatter(tr, Y, out);
    }
    return as_state(out, tau);
  }

  /// Dense P^{u,s}(tau) on the full truncated state.
  Eigen::MatrixXd projection_matrix(double tau, Flavor flavor) const {
    check_range(tau);
    const Eigen::Index d = op_->state_dim();
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(d, d);
    for (const auto& tr : tracks_) {
      const Local loc = local_frames(tr, tau);
      const Eigen::MatrixXd B = flavor == Flavor::unstable ? Eigen::MatrixXd(loc.U * loc.C.topRows(tr.nu))
                                                           : Eigen::MatrixXd(loc.S * loc.C.bottomRows(tr.ns));
      for (const auto& mem : tr.members)
        for (Eigen::Index i = 0; i < tr.dim; ++i)
          for (Eigen::Index j = 0; j < tr.dim; ++j)
            P(mem[static_cast<std::size_t>(i)], mem[static_cast<std::size_t>(j)]) = B(i, j);
    }
    return P;
  }

  /// Phi^u(tau, tau0) z for tau <= tau0, Phi^s(tau, tau0) z for tau >= tau0.
  RescaledState apply_phi(const RescaledState& z, double tau, double tau0, Flavor flavor) const {
    check_state(z);
    check_range(tau);
    check_range(tau0);
    if (flavor == Flavor::unstable && tau > tau0)
      fail(ErrorKind::precondition, "apply_phi: unstable evolution needs tau <= tau0");
    if (flavor == Flavor::stable && tau < tau0)
      fail(ErrorKind::precondition, "apply_phi: stable evolution needs tau >= tau0");
    const Eigen::VectorXcd x = to_vector(z);
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(x.size());
    for (const auto& tr : tracks_) {
      const Eigen::MatrixXd X = gather(tr, x);
      const Eigen::MatrixXd Y = flavor == Flavor::unstable ? phi_u(tr, X, tau, tau0) : phi_s(tr, X, tau, tau0);
      scatter(tr, Y, out);
    }
    return as_state(out, tau);
  }

  /// Sine of the angle between z and R(P^{u,s}(tau)) in the weighted norm.
  double range_angle(const RescaledState& z, double tau, Flavor flavor) const {
    const SubspaceFrame fr = frame(tau, flavor);
    const Eigen::VectorXd w = state_weights(dimension(), l_max(), value_dim(), beta_);
    const Eigen::MatrixXd Q = w.asDiagonal() * fr.vectors;
    const Eigen::VectorXcd y = w.cast<cplx>().cwiseProduct(to_vector(z));
    const double nz = y.norm();
    if (nz == 0.0) return 0.0;
    const Eigen::VectorXcd r = y - Q.cast<cplx>() * (Q.transpose().cast<cplx>() * y);
    return r.norm() / nz;
  }

  // Coefficient-level access used by the nonlinear solver. Coefficients are
  // per track, one column pair (real, imaginary) per member block.

  Eigen::MatrixXd gather(const Track& tr, const Eigen::VectorXcd& x) const {
    Eigen::MatrixXd X(tr.dim, 2 * static_cast<Eigen::Index>(tr.members.size()));
    for (std::size_t b = 0; b < tr.members.size(); ++b)
      for (Eigen::Index i = 0; i < tr.dim; ++i) {
        const cplx v = x[tr.members[b][static_cast<std::size_t>(i)]];
        X(i, 2 * static_cast<Eigen::Index>(b)) = v.real();
        X(i, 2 * static_cast<Eigen::Index>(b) + 1) = v.imag();
      }
    return X;
  }

  void scatter(const Track& tr, const Eigen::MatrixXd& X, Eigen::VectorXcd& x) const {
    for (std::size_t b = 0; b < tr.members.size(); ++b)
      for (Eigen::Index i = 0; i < tr.dim; ++i)
        x[tr.members[b][static_cast<std::size_t>(i)]] =
            cplx(X(i, 2 * static_cast<Eigen::Index>(b)), X(i, 2 * static_cast<Eigen::Index>(b) + 1));
  }

  RescaledState as_state(const Eigen::VectorXcd& v, double tau) const {
    return rescaled_from_vector(v, tau, alpha(), dimension(), l_max(), value_dim());
  }

  /// Index k of the grid point equal to tau (within rounding), if any.
  std::optional<std::size_t> grid_index(double tau) const {
    const auto it = std::lower_bound(grid_.begin(), grid_.end(), tau - grid_tol(tau));
    if (it != grid_.end() && std::abs(*it - tau) <= grid_tol(tau)) return static_cast<std::size_t>(it - grid_.begin());
    return std::nullopt;
  }

  /// Integrates state columns of a track from a to b.
  Eigen::MatrixXd flow(const Track& tr, Eigen::MatrixXd X, double a, double b) const {
    OdeOptions o = ode_;
    o.h_max = std::min(o.h_max, tr.h_max);
    integrate_dopri5(tr.rhs, X, a, b, o);
    return X;
  }

 private:
  friend DichotomyTable build_dichotomy(const PotentialSpec&, int, double, int, DichotomyOptions);
  friend void save_table(const DichotomyTable&, std::ostream&);
  friend DichotomyTable load_table(std::istream&, const PotentialSpec&);

  struct Local {
    Eigen::MatrixXd U, S, C;
    Eigen::MatrixXd Rin;   ///< Flow(tau, tau_i) U_i = U(tau) Rin, i = grid point below
    Eigen::MatrixXd Hin;   ///< Flow(tau, tau_{i+1}) S_{i+1} = S(tau) Hin
    std::size_t below = 0;
    bool on_grid = false;
  };

  static double grid_tol(double tau) { return 1e-11 * std::max(1.0, std::abs(tau)); }

  void check_range(double tau) const {
    if (!(tau >= tau_lo() - grid_tol(tau) && tau <= tau_hi() + grid_tol(tau)))
      fail(ErrorKind::precondition, "tau = " + std::to_string(tau) + " outside the dichotomy grid [" +
                                        std::to_string(tau_lo()) + ", " + std::to_string(tau_hi()) + "]");
  }

  void check_state(const RescaledState& z) const {
    require(z.f.dimension() == dimension() && z.f.l_max() == l_max() && z.f.value_dim() == value_dim() &&
                z.g.compatible(z.f),
            "dichotomy: state does not match the table truncation");
  }

  // Index i with tau_i <= tau < tau_{i+1} (last interval closed).
  std::size_t interval(double tau) const {
    const auto it = std::upper_bound(grid_.begin(), grid_.end(), tau);
    std::size_t i = it == grid_.begin() ? 0 : static_cast<std::size_t>(it - grid_.begin()) - 1;
    return std::min(i, grid_.size() - 2);
  }

  Local local_frames(const Track& tr, double tau) const {
    Local loc;
    if (auto k = grid_index(tau)) {
      loc.U = tr.U[*k];
      loc.S = tr.S[*k];
      loc.C = tr.C[*k];
      loc.below = *k;
      loc.on_grid = true;
      return loc;
    }
    const std::size_t i = interval(tau);
    loc.below = i;
    loc.U = flow(tr, tr.U[i], grid_[i], tau);
    loc.Rin = detail::weighted_qr(tr.w, loc.U);
    loc.S = flow(tr, tr.S[i + 1], grid_[i + 1], tau);
    loc.Hin = detail::weighted_qr(tr.w, loc.S);
    Eigen::MatrixXd M(tr.dim, tr.dim);
    M << loc.U, loc.S;
    loc.C = M.partialPivLu().inverse();
    return loc;
  }

  Eigen::MatrixXd phi_u(const Track& tr, const Eigen::MatrixXd& X, double tau, double tau0) const {
    if (tr.nu == 0) return Eigen::MatrixXd::Zero(tr.dim, X.cols());
    // Coefficients in the frame at the grid point j <= tau0.
    std::size_t j;
    Eigen::MatrixXd c;
    if (auto k = grid_index(tau0)) {
      j = *k;
      c = tr.C[j].topRows(tr.nu) * X;
    } else {
      const Local loc = local_frames(tr, tau0);
      j = loc.below;
      c = loc.Rin.triangularView<Eigen::Upper>().solve(loc.C.topRows(tr.nu) * X);
    }
    std::size_t k;
    if (auto g = grid_index(tau)) {
      k = *g;
    } else {
      k = interval(tau);
    }
    for (std::size_t m = j; m > k; --m) c = tr.R[m - 1].triangularView<Eigen::Upper>().solve(c);
    Eigen::MatrixXd Y = tr.U[k] * c;
    if (!grid_index(tau)) Y = flow(tr, Y, grid_[k], tau);
    return Y;
  }

  Eigen::MatrixXd phi_s(const Track& tr, const Eigen::MatrixXd& X, double tau, double tau0) const {
    if (tr.ns == 0) return Eigen::MatrixXd::Zero(tr.dim, X.cols());
    std::size_t j;
    Eigen::MatrixXd c;
    if (auto k = grid_index(tau0)) {
      j = *k;
      c = tr.C[j].bottomRows(tr.ns) * X;
    } else {
      const Local loc = local_frames(tr, tau0);
      j = loc.below + 1;
      c = loc.Hin.triangularView<Eigen::Upper>().solve(loc.C.bottomRows(tr.ns) * X);
    }
    std::size_t k;
    const auto g = grid_index(tau);
    k = g ? *g : interval(tau) + 1;
    for (std::size_t m = j; m < k; ++m) c = tr.H[m].triangularView<Eigen::Upper>().solve(c);
    Eigen::MatrixXd Y = tr.S[k] * c;
    if (!g) Y = flow(tr, Y, grid_[k], tau);
    return Y;
  }

  std::shared_ptr<const SesOperator> op_;
  double beta_ = 0.0;
  HalfLine side_ = HalfLine::inner;
  OdeOptions ode_;
  std::vector<double> grid_;
  std::vector<Track> tracks_;
  RateCertificate cert_;
  double min_angle_ = 1.0;

  // Track skeletons (coordinates, weights, right-hand sides) for an operator.
  static std::vector<Track> make_tracks(const std::shared_ptr<const SesOperator>& op, double beta,
                                        double step_cap) {
    const int n = op->dimension(), L = op->l_max(), N = op->value_dim();
    const double alpha = op->alpha();
    const auto modes = enumerate_modes(n, L);
    const Eigen::Index h = op->limiting().half_dim();
    std::vector<Track> out;
    if (op->decoupled()) {
      for (int l = 0; l <= L; ++l) {
        Track tr;
        tr.l = l;
        tr.dim = 2 * N;
        const double lam = lb_eigenvalue(n, l);
        tr.w.resize(tr.dim);
        tr.w.head(N).setConstant(std::pow(1.0 + lam, 0.5 * (0.5 + beta)));
        tr.w.tail(N).setConstant(std::pow(1.0 + lam, 0.5 * (-0.5 + beta)));
        for (std::size_t k = 0; k < modes.size(); ++k) {
          if (modes[k].l != l) continue;
          std::vector<Eigen::Index> idx;
          for (int c = 0; c < N; ++c) idx.push_back(static_cast<Eigen::Index>(k) * N + c);
          for (int c = 0; c < N; ++c) idx.push_back(h + static_cast<Eigen::Index>(k) * N + c);
          tr.members.push_back(std::move(idx));
        }
        tr.h_max = step_cap / std::max(1.0, std::abs(alpha) + lam);
        const SesOperator* raw = op.get();
        tr.rhs = [raw, l](double t, const Eigen::MatrixXd& X, Eigen::MatrixXd& dX) {
          dX.noalias() = raw->block_generator(l, t) * X;
        };
        out.push_back(std::move(tr));
      }
    } else {
      Track tr;
      tr.l = -1;
      tr.dim = op->state_dim();
      tr.w = state_weights(n, L, N, beta);
      std::vector<Eigen::Index> idx(static_cast<std::size_t>(tr.dim));
      for (Eigen::Index i = 0; i < tr.dim; ++i) idx[static_cast<std::size_t>(i)] = i;
      tr.members.push_back(std::move(idx));
      tr.h_max = step_cap / std::max(1.0, std::abs(alpha) + lb_eigenvalue(n, L));
      const SesOperator* raw = op.get();
      tr.rhs = [raw](double t, const Eigen::MatrixXd& X, Eigen::MatrixXd& dX) { raw->apply_generator(t, X, dX); };
      out.push_back(std::move(tr));
    }
    return out;
  }

  static std::vector<detail::Coordinate> track_coordinates(const Track& tr, int n, int l_max, int value_dim) {
    if (tr.l < 0) return detail::full_coordinates(n, l_max, value_dim);
    std::vector<detail::Coordinate> cs;
    for (int c = 0; c < value_dim; ++c) cs.push_back({tr.l, c, value_dim + c});
    return cs;
  }

  // Coefficient maps, transversality and the rate certificate from the frames.
  void finish(double transversality_tol) {
    min_angle_ = 1.0;
    cert_ = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(), 0.0};
    for (auto& tr : tracks_) {
      tr.C.resize(grid_.size());
      for (std::size_t k = 0; k < grid_.size(); ++k) {
        Eigen::MatrixXd M(tr.dim, tr.dim);
        M << tr.U[k], tr.S[k];
        if (tr.nu > 0 && tr.ns > 0) {
          const Eigen::MatrixXd cu = tr.w.asDiagonal() * tr.U[k], cs = tr.w.asDiagonal() * tr.S[k];
          const double cosine = Eigen::JacobiSVD<Eigen::MatrixXd>(cu.transpose() * cs).singularValues()(0);
          const double sine = std::sqrt(std::max(0.0, 1.0 - cosine * cosine));
          min_angle_ = std::min(min_angle_, sine);
          if (sine < transversality_tol)
            fail(ErrorKind::dichotomy, "range and kernel of P^u nearly parallel at tau = " + std::to_string(grid_[k]) +
                                           (tr.l >= 0 ? " (degree " + std::to_string(tr.l) + ")" : std::string()));
        }
        tr.C[k] = M.partialPivLu().inverse();
        const Eigen::MatrixXd winv = tr.w.cwiseInverse().asDiagonal();
        if (tr.nu > 0)
          cert_.K = std::max(cert_.K, Eigen::JacobiSVD<Eigen::MatrixXd>(tr.C[k].topRows(tr.nu) * winv).singularValues()(0));
        if (tr.ns > 0)
          cert_.K = std::max(cert_.K, Eigen::JacobiSVD<Eigen::MatrixXd>(tr.C[k].bottomRows(tr.ns) * winv).singularValues()(0));
      }
      for (std::size_t k = 0; k + 1 < grid_.size(); ++k) {
        const double dt = grid_[k + 1] - grid_[k];
        if (tr.nu > 0) {
          const Eigen::MatrixXd Ri = tr.R[k].triangularView<Eigen::Upper>().solve(
              Eigen::MatrixXd::Identity(tr.nu, tr.nu));
          cert_.eta_u = std::min(cert_.eta_u, -std::log(Eigen::JacobiSVD<Eigen::MatrixXd>(Ri).singularValues()(0)) / dt);
        }
        if (tr.ns > 0) {
          const Eigen::MatrixXd Hi = tr.H[k].triangularView<Eigen::Upper>().solve(
              Eigen::MatrixXd::Identity(tr.ns, tr.ns));
          cert_.eta_s = std::min(cert_.eta_s, -std::log(Eigen::JacobiSVD<Eigen::MatrixXd>(Hi).singularValues()(0)) / dt);
        }
      }
    }
    if (!std::isfinite(cert_.eta_u)) cert_.eta_u = 0.0;
    if (!std::isfinite(cert_.eta_s)) cert_.eta_s = 0.0;
  }
};

/// Builds the dichotomy table: unstable frames are the unstable eigenspace
/// of A at the low end of the grid carried forward, stable frames the stable
/// eigenspace of A at the high end carried backward.
inline DichotomyTable build_dichotomy(const PotentialSpec& V, int n, double alpha, int l_max,
                                      DichotomyOptions opt = {}) {
  check_dimension(n);
  require(l_max >= 0, "build_dichotomy: l_max must be >= 0");
  require(opt.dtau > 0.0 && opt.orth_interval > 0.0, "build_dichotomy: steps must be positive");
  require(opt.beta >= 0.0 && opt.beta < 1.0, "build_dichotomy: beta must lie in [0, 1)");
  if (validate_alpha(n, alpha) <= opt.gap_tol)
    fail(ErrorKind::precondition, "alpha = " + std::to_string(alpha) + " is forbidden: -alpha lies in Sigma(n)");

  DichotomyTable table;
  table.op_ = std::make_shared<const SesOperator>(n, alpha, l_max, V);
  table.beta_ = opt.beta;
  table.side_ = opt.side;
  table.ode_ = opt.ode;

  if (!opt.grid.empty()) {
    table.grid_ = opt.grid;
    std::sort(table.grid_.begin(), table.grid_.end());
    require(std::adjacent_find(table.grid_.begin(), table.grid_.end()) == table.grid_.end(),
            "build_dichotomy: grid has repeated points");
  } else {
    double lo, hi;
    if (opt.side == HalfLine::inner) {
      hi = opt.tau_max;
      lo = opt.tau_min ? *opt.tau_min
                       : auto_tau_min(V, n, hi, opt.asymptotic_tol, opt.search_limit, opt.zero_span);
    } else {
      lo = opt.tau_start;
      hi = opt.tau_end ? *opt.tau_end
                       : auto_tau_end(V, n, lo, opt.asymptotic_tol, opt.search_limit, opt.zero_span);
    }
    require(lo < hi, "build_dichotomy: empty tau range");
    const int steps = std::max(1, static_cast<int>(std::ceil((hi - lo) / opt.dtau - 1e-9)));
    for (int k = 0; k <= steps; ++k) table.grid_.push_back(k == steps ? hi : lo + (hi - lo) * k / steps);
  }
  require(table.grid_.size() >= 2, "build_dichotomy: grid needs at least two points");

  table.tracks_ = DichotomyTable::make_tracks(table.op_, opt.beta, opt.step_cap);
  const std::size_t G = table.grid_.size();
  for (auto& tr : table.tracks_) {
    const auto coords = DichotomyTable::track_coordinates(tr, n, l_max, table.value_dim());
    auto [u0, s0] = detail::limiting_frames(n, alpha, tr.dim, coords);
    tr.nu = static_cast<int>(u0.cols());
    tr.ns = static_cast<int>(s0.cols());
    tr.U.assign(G, Eigen::MatrixXd());
    tr.S.assign(G, Eigen::MatrixXd());
    tr.R.assign(G - 1, Eigen::MatrixXd());
    tr.H.assign(G - 1, Eigen::MatrixXd());

    detail::weighted_qr(tr.w, u0);
    tr.U[0] = u0;
    for (std::size_t k = 0; k + 1 < G; ++k) {
      const double a = table.grid_[k], b = table.grid_[k + 1];
      const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / opt.orth_interval - 1e-12)));
      Eigen::MatrixXd X = tr.U[k], R = Eigen::MatrixXd::Identity(tr.nu, tr.nu);
      for (int p = 0; p < pieces; ++p) {
        X = table.flow(tr, X, a + (b - a) * p / pieces, p + 1 == pieces ? b : a + (b - a) * (p + 1) / pieces);
        const Eigen::MatrixXd Rp = detail::weighted_qr(tr.w, X);
        if (detail::condition_number(Rp) > 1e4)
          fail(ErrorKind::dichotomy, "unstable frame rank collapse at tau = " + std::to_string(b));
        R = Rp * R;
      }
      tr.U[k + 1] = X;
      tr.R[k] = R;
    }

    detail::weighted_qr(tr.w, s0);
    tr.S[G - 1] = s0;
    for (std::size_t k = G - 1; k > 0; --k) {
      const double a = table.grid_[k], b = table.grid_[k - 1];
      const int pieces = std::max(1, static_cast<int>(std::ceil((a - b) / opt.orth_interval - 1e-12)));
      Eigen::MatrixXd X = tr.S[k], H = Eigen::MatrixXd::Identity(tr.ns, tr.ns);
      for (int p = 0; p < pieces; ++p) {
        X = table.flow(tr, X, a + (b - a) * p / pieces, p + 1 == pieces ? b : a + (b - a) * (p + 1) / pieces);
        const Eigen::MatrixXd Hp = detail::weighted_qr(tr.w, X);
        if (detail::condition_number(Hp) > 1e4)
          fail(ErrorKind::dichotomy, "stable frame rank collapse at tau = " + std::to_string(b));
        H = Hp * H;
      }
      tr.S[k - 1] = X;
      tr.H[k - 1] = H;
    }
  }
  table.finish(opt.transversality_tol);
  return table;
}

/// Free-function form of DichotomyTable::apply_phi.
inline RescaledState apply_phi(const DichotomyTable& table, const RescaledState& z, double tau, double tau0,
                               Flavor flavor) {
  return table.apply_phi(z, tau, tau0, flavor);
}

// -- text dump -------------------------------------------------------------------

namespace detail {

inline void write_matrix(std::ostream& os, const Eigen::MatrixXd& m) {
  os << m.rows() << ' ' << m.cols() << '\n';
  char buf[32];
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
      os << (j ? " " : "") << buf;
    }
    os << '\n';
  }
}

inline Eigen::MatrixXd read_matrix(std::istream& is) {
  Eigen::Index r = -1, c = -1;
  if (!(is >> r >> c) || r < 0 || c < 0) fail(ErrorKind::io, "dichotomy table: malformed matrix header");
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j)
      if (!(is >> m(i, j))) fail(ErrorKind::io, "dichotomy table: truncated matrix");
  return m;
}

inline void expect_token(std::istream& is, const std::string& want) {
  std::string got;
  if (!(is >> got) || got != want)
    fail(ErrorKind::io, "dichotomy table: expected '" + want + "', found '" + got + "'");
}

}  // namespace detail

inline constexpr int kTableFormatVersion = 1;

/// Versioned text dump: header, grid, certificate, then per track the frames
/// and transition factors. Coefficient maps are recomputed on load.
inline void save_table(const DichotomyTable& t, std::ostream& os) {
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  os << "raddich-dichotomy-table " << kTableFormatVersion << '\n';
  os << "n " << t.dimension() << " value_dim " << t.value_dim() << " l_max " << t.l_max() << '\n';
  os << "alpha " << num(t.alpha()) << " beta " << num(t.beta()) << '\n';
  os << "side " << (t.side() == HalfLine::inner ? "inner" : "outer") << '\n';
  os << "potential " << t.op().potential().description() << '\n';
  os << "shift " << num(t.op().potential().shift()) << '\n';
  os << "ode " << num(t.ode_.rtol) << ' ' << num(t.ode_.atol) << '\n';
  os << "certificate " << num(t.certificate().eta_u) << ' ' << num(t.certificate().eta_s) << ' '
     << num(t.certificate().K) << '\n';
  os << "grid " << t.grid().size() << '\n';
  for (std::size_t k = 0; k < t.grid().size(); ++k) os << (k ? " " : "") << num(t.grid()[k]);
  os << '\n';
  os << "tracks " << t.tracks().size() << '\n';
  for (const auto& tr : t.tracks()) {
    os << "track " << tr.l << ' ' << tr.dim << ' ' << tr.nu << ' ' << tr.ns << ' ' << num(tr.h_max) << '\n';
    for (std::size_t k = 0; k < t.grid().size(); ++k) {
      detail::write_matrix(os, tr.U[k]);
      detail::write_matrix(os, tr.S[k]);
    }
    for (std::size_t k = 0; k + 1 < t.grid().size(); ++k) {
      detail::write_matrix(os, tr.R[k]);
      detail::write_matrix(os, tr.H[k]);
    }
  }
  os << "end\n";
}

/// Reads a dump written by save_table. The potential cannot be serialized, so
/// the caller supplies it; its description and shift must match the dump.
inline DichotomyTable load_table(std::istream& is, const PotentialSpec& V) {
  std::string magic;
  int version = 0;
  if (!(is >> magic >> version) || magic != "raddich-dichotomy-table")
    fail(ErrorKind::io, "dichotomy table: missing header");
  if (version != kTableFormatVersion)
    fail(ErrorKind::io, "dichotomy table: unsupported format version " + std::to_string(version));
  int n = 0, N = 0, L = 0;
  double alpha = 0, beta = 0, shift = 0;
  std::string side, desc;
  detail::expect_token(is, "n");
  is >> n;
  detail::expect_token(is, "value_dim");
  is >> N;
  detail::expect_token(is, "l_max");
  is >> L;
  detail::expect_token(is, "alpha");
  is >> alpha;
  detail::expect_token(is, "beta");
  is >> beta;
  detail::expect_token(is, "side");
  is >> side;
  detail::expect_token(is, "potential");
  std::getline(is >> std::ws, desc);
  detail::expect_token(is, "shift");
  is >> shift;
  if (!is) fail(ErrorKind::io, "dichotomy table: malformed header");
  if (desc != V.description() || shift != V.shift())
    fail(ErrorKind::config, "dichotomy table was built for potential '" + desc + "', not '" + V.description() + "'");
  if (V.value_dim() != N) fail(ErrorKind::config, "dichotomy table: value_dim mismatch");

  DichotomyTable t;
  t.op_ = std::make_shared<const SesOperator>(n, alpha, L, V);
  t.beta_ = beta;
  t.side_ = side == "outer" ? HalfLine::outer : HalfLine::inner;
  detail::expect_token(is, "ode");
  is >> t.ode_.rtol >> t.ode_.atol;
  detail::expect_token(is, "certificate");
  is >> t.cert_.eta_u >> t.cert_.eta_s >> t.cert_.K;
  std::size_t G = 0;
  detail::expect_token(is, "grid");
  is >> G;
  t.grid_.resize(G);
  for (auto& g : t.grid_) is >> g;
  if (!is || G < 2) fail(ErrorKind::io, "dichotomy table: malformed grid");
  std::size_t T = 0;
  detail::expect_token(is, "tracks");
  is >> T;
  t.tracks_ = DichotomyTable::make_tracks(t.op_, beta, 0.1);
  if (T != t.tracks_.size()) fail(ErrorKind::io, "dichotomy table: track count mismatch");
  for (auto& tr : t.tracks_) {
    int l = 0;
    Eigen::Index dim = 0;
    detail::expect_token(is, "track");
    is >> l >> dim >> tr.nu >> tr.ns >> tr.h_max;
    if (!is || l != tr.l || dim != tr.dim) fail(ErrorKind::io, "dichotomy table: track layout mismatch");
    tr.U.resize(G);
    tr.S.resize(G);
    tr.R.resize(G - 1);
    tr.H.resize(G - 1);
    for (std::size_t k = 0; k < G; ++k) {
      tr.U[k] = detail::read_matrix(is);
      tr.S[k] = detail::read_matrix(is);
    }
    for (std::size_t k = 0; k + 1 < G; ++k) {
      tr.R[k] = detail::read_matrix(is);
      tr.H[k] = detail::read_matrix(is);
    }
  }
  detail::expect_token(is, "end");
  const RateCertificate saved = t.cert_;
  t.finish(0.0);
  t.cert_ = saved;
  return t;
}

}  // namespace raddich
