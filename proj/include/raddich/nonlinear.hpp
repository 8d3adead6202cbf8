#pragma once

// Semilinear problems Laplacian(u) - V u = F(x, u) solved by Picard iteration
// on the dichotomy integral equations: the ball problem with a boundary
// condition and the whole-space problem by matching at a common tau.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "raddich/dichotomy.hpp"
#include "raddich/eigen_detector.hpp"
#include "raddich/errors.hpp"
#include "raddich/nonlinearity.hpp"
#include "raddich/potential.hpp"
#include "raddich/ses.hpp"

namespace raddich {

struct NonlinearProblem {
  PotentialSpec V = PotentialSpec::zero();
  Nonlinearity F = Nonlinearity::zero();
  int n = 3;
  double alpha = 0.5;
  int l_max = 0;
  double T = 1.0;  ///< ball radius; infinity for the whole-space problem
  BoundarySubspace boundary = BoundarySubspace::dirichlet();
  double dtau = 0.05;
  double beta = 0.0;
};

struct PicardOptions {
  double tol = 1e-10;    ///< on the relative size of successive updates
  int max_iter = 60;
  int growth_limit = 3;  ///< consecutive growing updates that count as non-contraction
  int lipschitz_samples = 12;
};

struct IterationRecord {
  int iteration = 0;
  double update = 0.0;  ///< max over the grid of the weighted update, relative
  double ratio = 0.0;   ///< update / previous update
};

struct SolutionTrajectory {
  std::vector<RescaledState> states;
  std::vector<IterationRecord> log;
  int iterations = 0;
  bool converged = false;
  double defect = 0.0;           ///< max over the grid of the integral-equation defect
  double tail_bound = 0.0;       ///< estimate of the truncated infinite tail
  double lipschitz = 0.0;        ///< sampled Lipschitz constant of the rescaled nonlinearity
  double boundary_defect = 0.0;  ///< weighted size of the constrained components at the end point
  double match_defect = 0.0;     ///< jump at the matching point (whole-space problem)

  std::vector<double> taus() const {
    std::vector<double> out;
    for (const auto& s : states) out.push_back(s.tau);
    return out;
  }
};

namespace detail {

// Weights of the interpolatory rule on [a, b] through the given nodes.
inline Eigen::VectorXd panel_weights(const std::vector<double>& nodes, double a, double b) {
  const Eigen::Index m = static_cast<Eigen::Index>(nodes.size());
  const double c = 0.5 * (a + b), s = b - a;
  Eigen::MatrixXd V(m, m);
  Eigen::VectorXd mom(m);
  for (Eigen::Index p = 0; p < m; ++p) {
    for (Eigen::Index q = 0; q < m; ++q) V(p, q) = std::pow((nodes[static_cast<std::size_t>(q)] - c) / s, static_cast<double>(p));
    mom[p] = s * (std::pow(0.5, p + 1.0) - std::pow(-0.5, p + 1.0)) / (p + 1.0);
  }
  return V.colPivHouseholderQr().solve(mom);
}

/// Fixed-point map of the dichotomy integral equation on one table:
///   h(tau) = Phi^u(tau, tau_hi) a_u + Phi^s(tau, tau_lo) a_s
///          + int_{tau_lo}^{tau} Phi^s(tau, s) N(s) ds - int_{tau}^{tau_hi} Phi^u(tau, s) N(s) ds,
/// with N(s) = (0, e^{(alpha+2)s} F(e^s, ., e^{-alpha s} f~(s))). Integrals use
/// composite six-node interpolatory panels (sixth order) in the frame
/// coordinates of each track.
class HalfLineMap {
 public:
  static constexpr std::size_t kPanelNodes = 6;

  HalfLineMap(const DichotomyTable& table, std::shared_ptr<const NonlinearEvaluator> ev)
      : table_(table), ev_(std::move(ev)) {
    require(ev_->dimension() == table.dimension() && ev_->l_max() == table.l_max(),
            "nonlinear solver: nonlinearity and dichotomy truncations differ");
    const auto& g = table.grid();
    G_ = g.size();
    half_ = table.op().limiting().half_dim();
    w_ = state_weights(table.dimension(), table.l_max(), table.value_dim(), table.beta());
    for (std::size_t k = 0; k + 1 < G_; ++k) {
      Panel p;
      const std::size_t m = std::min<std::size_t>(kPanelNodes, G_);
      std::size_t start = k >= (m - 1) / 2 ? k - (m - 1) / 2 : 0;
      start = std::min(start, G_ - m);
      std::vector<double> nodes;
      for (std::size_t q = 0; q < m; ++q) {
        p.idx.push_back(start + q);
        nodes.push_back(g[start + q]);
      }
      p.w = panel_weights(nodes, g[k], g[k + 1]);
      panels_.push_back(std::move(p));
    }
    for (const auto& tr : table.tracks()) {
      TrackOps ops;
      for (std::size_t k = 0; k + 1 < G_; ++k) {
        ops.Rinv.push_back(tr.nu ? Eigen::MatrixXd(tr.R[k].triangularView<Eigen::Upper>().solve(
                                       Eigen::MatrixXd::Identity(tr.nu, tr.nu)))
                                 : Eigen::MatrixXd());
        ops.Hinv.push_back(tr.ns ? Eigen::MatrixXd(tr.H[k].triangularView<Eigen::Upper>().solve(
                                       Eigen::MatrixXd::Identity(tr.ns, tr.ns)))
                                 : Eigen::MatrixXd());
      }
      ops_.push_back(std::move(ops));
    }
  }

  const DichotomyTable& table() const { return table_; }
  std::size_t size() const { return G_; }
  const Eigen::VectorXd& weights() const { return w_; }
  /// True when the map does not depend on its argument (F = 0).
  bool constant() const { return ev_->nonlinearity().is_zero(); }

  double norm(const Eigen::VectorXcd& x) const { return w_.cast<cplx>().cwiseProduct(x).norm(); }

  /// N(tau_k, x_k) as a full state vector.
  Eigen::VectorXcd forcing(std::size_t k, const Eigen::VectorXcd& x) const {
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(x.size());
    if (ev_->nonlinearity().is_zero()) return out;
    const RescaledState s = table_.as_state(x, table_.grid()[k]);
    out.tail(half_) = ev_->rescaled(s.tau, s.f, table_.alpha()).coeffs();
    return out;
  }

  std::vector<Eigen::VectorXcd> apply(const std::vector<Eigen::VectorXcd>& x, const Eigen::VectorXcd& anchor_u,
                                      const Eigen::VectorXcd& anchor_s) const {
    std::vector<Eigen::VectorXcd> N(G_);
    for (std::size_t k = 0; k < G_; ++k) N[k] = forcing(k, x[k]);
    return apply_forcing(N, anchor_u, anchor_s);
  }

  std::vector<Eigen::VectorXcd> apply_forcing(const std::vector<Eigen::VectorXcd>& N, const Eigen::VectorXcd& anchor_u,
                                              const Eigen::VectorXcd& anchor_s) const {
    const Eigen::Index D = 2 * half_;
    std::vector<Eigen::VectorXcd> out(G_, Eigen::VectorXcd::Zero(D));
    for (std::size_t t = 0; t < table_.tracks().size(); ++t) {
      const auto& tr = table_.tracks()[t];
      const auto& ops = ops_[t];
      const Eigen::Index cols = 2 * static_cast<Eigen::Index>(tr.members.size());
      std::vector<Eigen::MatrixXd> cu(G_), cs(G_);
      for (std::size_t k = 0; k < G_; ++k) {
        const Eigen::MatrixXd X = table_.gather(tr, N[k]);
        cu[k] = tr.C[k].topRows(tr.nu) * X;
        cs[k] = tr.C[k].bottomRows(tr.ns) * X;
      }
      auto move_u = [&](std::size_t to, std::size_t from, Eigen::MatrixXd c) {
        for (; from < to; ++from) c = tr.R[from].triangularView<Eigen::Upper>() * c;
        for (; from > to; --from) c = ops.Rinv[from - 1] * c;
        return c;
      };
      auto move_s = [&](std::size_t to, std::size_t from, Eigen::MatrixXd c) {
        for (; from < to; ++from) c = ops.Hinv[from] * c;
        for (; from > to; --from) c = tr.H[from - 1].triangularView<Eigen::Upper>() * c;
        return c;
      };
      std::vector<Eigen::MatrixXd> Is(G_), Iu(G_), au(G_), as(G_);
      Is[0] = Eigen::MatrixXd::Zero(tr.ns, cols);
      for (std::size_t k = 0; k + 1 < G_; ++k) {
        Eigen::MatrixXd acc = ops.Hinv[k] * Is[k];
        const Panel& p = panels_[k];
        for (std::size_t q = 0; q < p.idx.size(); ++q)
          acc += p.w[static_cast<Eigen::Index>(q)] * move_s(k + 1, p.idx[q], cs[p.idx[q]]);
        Is[k + 1] = acc;
      }
      Iu[G_ - 1] = Eigen::MatrixXd::Zero(tr.nu, cols);
      for (std::size_t k = G_ - 1; k-- > 0;) {
        Eigen::MatrixXd acc = ops.Rinv[k] * Iu[k + 1];
        const Panel& p = panels_[k];
        for (std::size_t q = 0; q < p.idx.size(); ++q)
          acc += p.w[static_cast<Eigen::Index>(q)] * move_u(k, p.idx[q], cu[p.idx[q]]);
        Iu[k] = acc;
      }
      au[G_ - 1] = tr.C[G_ - 1].topRows(tr.nu) * table_.gather(tr, anchor_u);
      for (std::size_t k = G_ - 1; k-- > 0;) au[k] = ops.Rinv[k] * au[k + 1];
      as[0] = tr.C[0].bottomRows(tr.ns) * table_.gather(tr, anchor_s);
      for (std::size_t k = 0; k + 1 < G_; ++k) as[k + 1] = ops.Hinv[k] * as[k];
      for (std::size_t k = 0; k < G_; ++k) {
        const Eigen::MatrixXd Y = tr.U[k] * (au[k] - Iu[k]) + tr.S[k] * (as[k] + Is[k]);
        table_.scatter(tr, Y, out[k]);
      }
    }
    return out;
  }

  /// Sampled Lipschitz constant of N with respect to the state near x.
  double lipschitz(const std::vector<Eigen::VectorXcd>& x, int samples) const {
    if (ev_->nonlinearity().is_zero() || samples <= 0) return 0.0;
    std::mt19937_64 rng(0x5eed);
    std::normal_distribution<double> nd;
    double L = 0.0;
    const std::size_t stride = std::max<std::size_t>(1, G_ / static_cast<std::size_t>(samples));
    for (std::size_t k = 0; k < G_; k += stride) {
      Eigen::VectorXcd d = Eigen::VectorXcd::Zero(2 * half_);
      for (Eigen::Index i = 0; i < half_; ++i) d[i] = nd(rng);
      const double scale = 1e-6 * std::max(1e-3, norm(x[k]));
      d *= scale / norm(d);
      const double diff = norm(forcing(k, x[k] + d) - forcing(k, x[k]));
      L = std::max(L, diff / norm(d));
    }
    return L;
  }

 private:
  struct Panel {
    std::vector<std::size_t> idx;
    Eigen::VectorXd w;
  };
  struct TrackOps {
    std::vector<Eigen::MatrixXd> Rinv, Hinv;
  };

  const DichotomyTable& table_;
  std::shared_ptr<const NonlinearEvaluator> ev_;
  std::size_t G_ = 0;
  Eigen::Index half_ = 0;
  Eigen::VectorXd w_;
  std::vector<Panel> panels_;
  std::vector<TrackOps> ops_;
};

using Trajectory = std::vector<Eigen::VectorXcd>;

struct PicardResult {
  Trajectory x;
  std::vector<IterationRecord> log;
  int iterations = 0;
  double defect = 0.0;
};

/// Generic Picard loop x <- sweep(x) with contraction monitoring. The map is
/// applied once when it does not depend on x.
template <class Sweep>
PicardResult picard_loop(Sweep sweep, const HalfLineMap& norm_map, Trajectory x, const PicardOptions& opt,
                         bool constant) {
  require(opt.tol > 0.0 && opt.max_iter >= 1, "picard: tol must be positive and max_iter >= 1");
  PicardResult r;
  auto gap = [&](const Trajectory& a, const Trajectory& b) {
    double d = 0.0, s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
      d = std::max(d, norm_map.norm(a[k] - b[k]));
      s = std::max(s, norm_map.norm(a[k]));
    }
    return d / std::max(1.0, s);
  };
  if (constant) {
    r.x = sweep(x);
    r.log.push_back({1, gap(r.x, x), 0.0});
    r.iterations = 1;
    return r;
  }
  double prev = std::numeric_limits<double>::infinity();
  int growing = 0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    Trajectory next = sweep(x);
    const double upd = gap(next, x);
    if (!std::isfinite(upd)) fail(ErrorKind::solver, "Picard iteration diverged (non-finite update)");
    r.log.push_back({it, upd, std::isfinite(prev) && prev > 0.0 ? upd / prev : 0.0});
    x = std::move(next);
    r.iterations = it;
    if (upd < opt.tol) {
      r.x = std::move(x);
      r.defect = gap(sweep(r.x), r.x);
      return r;
    }
    growing = upd > prev ? growing + 1 : 0;
    if (growing >= opt.growth_limit)
      fail(ErrorKind::solver, "Picard iteration is not contracting (update grew " + std::to_string(growing) +
                                  " times in a row, now " + std::to_string(upd) + ")");
    prev = upd;
  }
  fail(ErrorKind::solver, "Picard iteration did not reach tol = " + std::to_string(opt.tol) + " in " +
                              std::to_string(opt.max_iter) + " iterations");
}

inline Trajectory zero_trajectory(const HalfLineMap& map) {
  return Trajectory(map.size(), Eigen::VectorXcd::Zero(map.weights().size()));
}

/// Homogeneous trajectories Phi^u(., tau_hi) U_j (unstable anchors) or
/// Phi^s(., tau_lo) S_j (stable anchors), one per column.
inline std::vector<Trajectory> homogeneous(const HalfLineMap& map, const Eigen::MatrixXd& cols, Flavor flavor) {
  std::vector<Trajectory> out;
  const Trajectory zero = zero_trajectory(map);
  const Eigen::VectorXcd z = Eigen::VectorXcd::Zero(cols.rows());
  for (Eigen::Index j = 0; j < cols.cols(); ++j) {
    const Eigen::VectorXcd c = cols.col(j).cast<cplx>();
    out.push_back(map.apply_forcing(zero, flavor == Flavor::unstable ? c : z, flavor == Flavor::stable ? c : z));
  }
  return out;
}

/// Solver for M c = rhs (complex rhs, real M) that reports singular M.
class LinearCondition {
 public:
  LinearCondition(const Eigen::MatrixXd& M, double singular_tol, const std::string& what)
      : svd_(M, Eigen::ComputeThinU | Eigen::ComputeThinV) {
    const Eigen::VectorXd s = svd_.singularValues();
    // Columns are weighted-orthonormal frames, so singular values are O(1)
    // and an absolute threshold is meaningful.
    sigma_min_ = s.size() ? s[s.size() - 1] : 1.0;
    if (s.size() && sigma_min_ <= singular_tol)
      fail(ErrorKind::solver, what + ": linear condition singular at truncation level (sigma_min = " +
                                  std::to_string(sigma_min_) + ")");
  }
  Eigen::VectorXcd solve(const Eigen::VectorXcd& rhs) const {
    Eigen::VectorXcd out(svd_.cols());
    out.real() = svd_.solve(Eigen::VectorXd(rhs.real()));
    out.imag() = svd_.solve(Eigen::VectorXd(rhs.imag()));
    return out;
  }
  double sigma_min() const { return sigma_min_; }

 private:
  Eigen::JacobiSVD<Eigen::MatrixXd> svd_;
  double sigma_min_ = 1.0;
};

inline void add_combination(Trajectory& x, const std::vector<Trajectory>& basis, const Eigen::VectorXcd& c) {
  for (std::size_t j = 0; j < basis.size(); ++j) {
    const cplx cj = c[static_cast<Eigen::Index>(j)];
    if (cj == cplx(0.0)) continue;
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += cj * basis[j][k];
  }
}

inline SolutionTrajectory to_trajectory(const HalfLineMap& map, const PicardResult& r, const PicardOptions& opt,
                                        double tail_rate, bool tail_at_low_end) {
  SolutionTrajectory out;
  const auto& g = map.table().grid();
  for (std::size_t k = 0; k < r.x.size(); ++k) out.states.push_back(map.table().as_state(r.x[k], g[k]));
  out.log = r.log;
  out.iterations = r.iterations;
  out.converged = true;
  out.defect = r.defect;
  const std::size_t end = tail_at_low_end ? 0 : r.x.size() - 1;
  out.tail_bound = map.table().certificate().K * map.norm(map.forcing(end, r.x[end])) / std::max(tail_rate, 1e-3);
  out.lipschitz = map.lipschitz(r.x, opt.lipschitz_samples);
  return out;
}

inline void check_problem_table(const NonlinearProblem& p, const DichotomyTable& t) {
  require(t.dimension() == p.n && t.l_max() == p.l_max && std::abs(t.alpha() - p.alpha) < 1e-15,
          "nonlinear solver: dichotomy table does not match the problem (n, l_max, alpha)");
  require(t.value_dim() == p.F.value_dim || p.F.is_zero(), "nonlinear solver: value dimensions differ");
}

inline Trajectory initial_or_zero(const HalfLineMap& map, const std::vector<RescaledState>* init) {
  if (!init || init->empty()) return zero_trajectory(map);
  require(init->size() == map.size(), "nonlinear solver: initial trajectory does not match the grid");
  Trajectory x;
  for (const auto& s : *init) x.push_back(to_vector(s));
  return x;
}

}  // namespace detail

/// Dichotomy table for the ball problem on [tau_min, log T] with the problem grid step.
inline DichotomyTable build_ball_table(const NonlinearProblem& p, std::optional<double> tau_min = std::nullopt) {
  require(std::isfinite(p.T) && p.T > 0.0, "build_ball_table: T must be finite and positive");
  DichotomyOptions o;
  o.tau_max = std::log(p.T);
  o.tau_min = tau_min;
  o.dtau = p.dtau;
  o.beta = p.beta;
  return build_dichotomy(p.V, p.n, p.alpha, p.l_max, o);
}

/// Picard iteration for the solution bounded as tau -> -infinity with
/// unstable data h_star at tau = log T held fixed.
inline SolutionTrajectory picard_bounded_ball(const NonlinearProblem& p, const RescaledState& h_star,
                                              const DichotomyTable& table, const PicardOptions& opt = {},
                                              const std::vector<RescaledState>* initial = nullptr) {
  detail::check_problem_table(p, table);
  require(table.side() == HalfLine::inner, "picard_bounded_ball: needs an inner (-inf, log T] table");
  require(std::abs(table.tau_hi() - std::log(p.T)) < 1e-9, "picard_bounded_ball: table must end at log T");
  const double angle = table.range_angle(h_star, table.tau_hi(), Flavor::unstable);
  if (angle > 1e-6)
    fail(ErrorKind::precondition, "picard_bounded_ball: h_star is not in the range of P^u(log T) (sine " +
                                      std::to_string(angle) + ")");
  auto ev = std::make_shared<const NonlinearEvaluator>(p.F, p.n, p.l_max);
  const detail::HalfLineMap map(table, ev);
  const Eigen::VectorXcd anchor = to_vector(h_star);
  const Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(anchor.size());
  const detail::PicardResult r = detail::picard_loop(
      [&](const detail::Trajectory& x) { return map.apply(x, anchor, zero); }, map,
      detail::initial_or_zero(map, initial), opt, map.constant());
  SolutionTrajectory out = detail::to_trajectory(map, r, opt, p.alpha + 2.0, true);
  out.boundary_defect = p.boundary.membership(out.states.back(), table.beta());
  return out;
}

struct BoundaryOptions {
  PicardOptions picard;
  double singular_tol = 1e-10;  ///< smallest singular value of the linear condition that counts as singular
  const std::vector<RescaledState>* initial = nullptr;
};

struct BoundarySolution {
  RescaledState h_star;
  SolutionTrajectory trajectory;
  double sigma_min = 1.0;  ///< smallest singular value of the weighted linear boundary condition
};

/// Picard iteration in which each sweep also chooses h_star in R(P^u(log T))
/// so that the end point lies in the boundary subspace. The condition is
/// linear in h_star, so every sweep solves it exactly; the iteration is the
/// fixed-point form of the boundary-value problem. For the whole boundary
/// subspace it reduces to picard_bounded_ball with h_star = 0.
inline BoundarySolution solve_boundary_condition(const NonlinearProblem& p, const DichotomyTable& table,
                                                 const BoundaryOptions& opt = {}) {
  detail::check_problem_table(p, table);
  require(table.side() == HalfLine::inner, "solve_boundary_condition: needs an inner table");
  require(std::abs(table.tau_hi() - std::log(p.T)) < 1e-9, "solve_boundary_condition: table must end at log T");
  auto ev = std::make_shared<const NonlinearEvaluator>(p.F, p.n, p.l_max);
  const detail::HalfLineMap map(table, ev);
  const Eigen::MatrixXd U = table.frame(table.tau_hi(), Flavor::unstable).vectors;
  const Eigen::Index half = table.op().limiting().half_dim();
  const Eigen::MatrixXd B = p.boundary.constraint(half) * map.weights().asDiagonal();
  const Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(2 * half);

  BoundarySolution out;
  detail::PicardResult r;
  Eigen::VectorXcd c = Eigen::VectorXcd::Zero(U.cols());
  if (B.rows() == 0) {
    r = detail::picard_loop([&](const detail::Trajectory& x) { return map.apply(x, zero, zero); }, map,
                            detail::initial_or_zero(map, opt.initial), opt.picard, map.constant());
  } else {
    const auto basis = detail::homogeneous(map, U, Flavor::unstable);
    const detail::LinearCondition cond(B * U, opt.singular_tol, "solve_boundary_condition");
    out.sigma_min = cond.sigma_min();
    auto sweep = [&](const detail::Trajectory& x) {
      detail::Trajectory y = map.apply(x, zero, zero);
      c = cond.solve(-(B.cast<cplx>() * y.back()));
      detail::add_combination(y, basis, c);
      return y;
    };
    r = detail::picard_loop(sweep, map, detail::initial_or_zero(map, opt.initial), opt.picard, map.constant());
    sweep(r.x);  // c for the converged trajectory
  }
  out.h_star = table.as_state((U * c.real()).cast<cplx>() + cplx(0.0, 1.0) * (U * c.imag()).cast<cplx>(),
                              table.tau_hi());
  out.trajectory = detail::to_trajectory(map, r, opt.picard, p.alpha + 2.0, true);
  out.trajectory.boundary_defect = p.boundary.membership(out.trajectory.states.back(), table.beta());
  return out;
}

/// Inner table on (-inf, tau_match] and outer table on [tau_match, +inf) for the whole-space problem.
inline std::pair<DichotomyTable, DichotomyTable> build_whole_space_tables(const NonlinearProblem& p,
                                                                          double tau_match = 0.0,
                                                                          std::optional<double> tau_min = std::nullopt,
                                                                          std::optional<double> tau_end = std::nullopt) {
  DichotomyOptions in;
  in.tau_max = tau_match;
  in.tau_min = tau_min;
  in.dtau = p.dtau;
  in.beta = p.beta;
  DichotomyOptions out = in;
  out.side = HalfLine::outer;
  out.tau_start = tau_match;
  out.tau_end = tau_end;
  return {build_dichotomy(p.V, p.n, p.alpha, p.l_max, in), build_dichotomy(p.V, p.n, p.alpha, p.l_max, out)};
}

struct MatchOptions {
  PicardOptions picard;
  double singular_tol = 1e-10;
  /// Starting trajectories on the inner and outer grids (zero when empty).
  const std::vector<RescaledState>* initial_minus = nullptr;
  const std::vector<RescaledState>* initial_plus = nullptr;
};

/// Whole-space solution bounded at both ends. Each sweep applies the inner and
/// outer integral maps and chooses the inner unstable data and the outer
/// stable data so that the two sides agree at the matching tau. Returns the
/// glued trajectory on the union of the grids.
inline SolutionTrajectory match_whole_space(const NonlinearProblem& p, const DichotomyTable& minus,
                                            const DichotomyTable& plus, const MatchOptions& opt = {}) {
  detail::check_problem_table(p, minus);
  detail::check_problem_table(p, plus);
  require(minus.side() == HalfLine::inner && plus.side() == HalfLine::outer,
          "match_whole_space: needs an inner and an outer table");
  require(std::abs(minus.tau_hi() - plus.tau_lo()) < 1e-12, "match_whole_space: tables must meet at one tau");
  auto ev = std::make_shared<const NonlinearEvaluator>(p.F, p.n, p.l_max);
  const detail::HalfLineMap mm(minus, ev), mp(plus, ev);
  const Eigen::MatrixXd Um = minus.frame(minus.tau_hi(), Flavor::unstable).vectors;
  const Eigen::MatrixXd Sp = plus.frame(plus.tau_lo(), Flavor::stable).vectors;
  const Eigen::Index D = minus.op().state_dim(), du = Um.cols(), ds = Sp.cols();
  const Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(D);
  const auto basis_m = detail::homogeneous(mm, Um, Flavor::unstable);
  const auto basis_p = detail::homogeneous(mp, Sp, Flavor::stable);
  Eigen::MatrixXd M(D, du + ds);
  M << Um, -Sp;
  const detail::LinearCondition cond(mm.weights().asDiagonal() * M, opt.singular_tol, "match_whole_space");
  const std::size_t Gm = mm.size();

  auto sweep = [&](const detail::Trajectory& x) {
    const detail::Trajectory xm(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(Gm));
    const detail::Trajectory xp(x.begin() + static_cast<std::ptrdiff_t>(Gm), x.end());
    detail::Trajectory ym = mm.apply(xm, zero, zero), yp = mp.apply(xp, zero, zero);
    const Eigen::VectorXcd c = cond.solve(mm.weights().cast<cplx>().cwiseProduct(yp.front() - ym.back()));
    detail::add_combination(ym, basis_m, c.head(du));
    detail::add_combination(yp, basis_p, c.tail(ds));
    ym.insert(ym.end(), yp.begin(), yp.end());
    return ym;
  };
  detail::Trajectory x0 = detail::initial_or_zero(mm, opt.initial_minus);
  const detail::Trajectory x0p = detail::initial_or_zero(mp, opt.initial_plus);
  x0.insert(x0.end(), x0p.begin(), x0p.end());
  const detail::PicardResult r = detail::picard_loop(sweep, mm, std::move(x0), opt.picard, mm.constant());

  const detail::Trajectory xm(r.x.begin(), r.x.begin() + static_cast<std::ptrdiff_t>(Gm));
  const detail::Trajectory xp(r.x.begin() + static_cast<std::ptrdiff_t>(Gm), r.x.end());
  SolutionTrajectory out;
  for (std::size_t k = 0; k < xm.size(); ++k) out.states.push_back(minus.as_state(xm[k], minus.grid()[k]));
  for (std::size_t k = 1; k < xp.size(); ++k) out.states.push_back(plus.as_state(xp[k], plus.grid()[k]));
  out.log = r.log;
  out.iterations = r.iterations;
  out.converged = true;
  out.defect = r.defect;
  out.match_defect = mm.norm(xp.front() - xm.back());
  out.tail_bound =
      std::max(minus.certificate().K * mm.norm(mm.forcing(0, xm.front())) / (p.alpha + 2.0),
               plus.certificate().K * mp.norm(mp.forcing(xp.size() - 1, xp.back())) /
                   std::max(plus.certificate().eta_u, 1e-3));
  out.lipschitz = std::max(mm.lipschitz(xm, opt.picard.lipschitz_samples), mp.lipschitz(xp, opt.picard.lipschitz_samples));
  return out;
}

}  // namespace raddich
