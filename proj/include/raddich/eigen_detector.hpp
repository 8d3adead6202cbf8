#pragma once

// Dirichlet eigenvalues of -Laplacian + V on the ball of radius t, detected as
// nontrivial intersections of the unstable subspace E^u(t) with the Dirichlet
// subspace (f = 0), through an Evans-style determinant and a lambda scan.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "raddich/dichotomy.hpp"
#include "raddich/errors.hpp"
#include "raddich/ode.hpp"
#include "raddich/potential.hpp"
#include "raddich/ses.hpp"
#include "raddich/spectral.hpp"

namespace raddich {

/// Boundary subspace B of the trace space, stored as orthonormal constraint
/// rows acting on weighted coordinates: z in B iff C (w * z) = 0.
class BoundarySubspace {
 public:
  enum class Kind {
    dirichlet,  ///< f = 0
    neumann,    ///< g = 0
    whole       ///< no condition
  };

  static BoundarySubspace dirichlet() { return BoundarySubspace(Kind::dirichlet); }
  static BoundarySubspace neumann() { return BoundarySubspace(Kind::neumann); }
  static BoundarySubspace whole() { return BoundarySubspace(Kind::whole); }

  Kind kind() const { return kind_; }
  std::string name() const {
    return kind_ == Kind::dirichlet ? "dirichlet" : kind_ == Kind::neumann ? "neumann" : "whole";
  }

  /// Constraint rows for a state of dimension 2h with h = half.
  Eigen::MatrixXd constraint(Eigen::Index half) const {
    switch (kind_) {
      case Kind::dirichlet: {
        Eigen::MatrixXd c = Eigen::MatrixXd::Zero(half, 2 * half);
        c.leftCols(half).setIdentity();
        return c;
      }
      case Kind::neumann: {
        Eigen::MatrixXd c = Eigen::MatrixXd::Zero(half, 2 * half);
        c.rightCols(half).setIdentity();
        return c;
      }
      case Kind::whole:
        break;
    }
    return Eigen::MatrixXd::Zero(0, 2 * half);
  }

  /// Weighted size of the constrained components of z.
  double membership(const RescaledState& z, double beta = 0.0) const {
    if (kind_ == Kind::whole) return 0.0;
    return kind_ == Kind::dirichlet ? sobolev_norm(z.f, 0.5 + beta) : sobolev_norm(z.g, -0.5 + beta);
  }
  double membership(const TraceState& x) const {
    if (kind_ == Kind::whole) return 0.0;
    return kind_ == Kind::dirichlet ? sobolev_norm(x.f, 0.5) : sobolev_norm(x.g, -0.5);
  }
  bool contains(const TraceState& x, double tol) const { return membership(x) <= tol * std::max(1.0, state_norm(x)); }

 private:
  explicit BoundarySubspace(Kind k) : kind_(k) {}
  Kind kind_;
};

/// The Dirichlet subspace: traces with vanishing Dirichlet component.
inline BoundarySubspace dirichlet_subspace() { return BoundarySubspace::dirichlet(); }

/// Singular values of the constrained block of a weighted-orthonormal frame.
inline Eigen::VectorXd boundary_singular_values(const SubspaceFrame& frame, const BoundarySubspace& B) {
  if (frame.size() == 0) return Eigen::VectorXd();
  const Eigen::VectorXd w = state_weights(frame.n, frame.l_max, frame.value_dim, frame.beta);
  const Eigen::MatrixXd m = B.constraint(frame.vectors.rows() / 2) * (w.asDiagonal() * frame.vectors);
  if (m.rows() == 0) return Eigen::VectorXd();
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
}

/// dim(span(frame) intersect B) at truncation level: the frame columns minus
/// the numerical rank of the constrained block.
inline int intersection_dimension(const SubspaceFrame& frame, const BoundarySubspace& B, double tol) {
  const int k = frame.size();
  if (k == 0) return 0;
  const Eigen::VectorXd s = boundary_singular_values(frame, B);
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] >= tol) ++rank;
  return k - rank;
}

// -- Evans determinant -------------------------------------------------------------

struct EvansOptions {
  double alpha = 0.5;
  double beta = 0.0;
  std::optional<double> tau_min;  ///< automatic from the potential and lambda when empty
  double asymptotic_tol = 1e-12;
  double zero_span = 6.0;
  double search_limit = 60.0;
  double orth_interval = 0.5;
  double step_cap = 0.1;
  OdeOptions ode{1e-12, 1e-15};
  BoundarySubspace boundary = BoundarySubspace::dirichlet();
};

namespace detail {

inline void check_evans_inputs(int n, double t, const EvansOptions& opt) {
  check_dimension(n);
  require(t > 0.0, "evans_determinant: t must be positive");
  require(opt.beta >= 0.0 && opt.beta < 1.0, "evans_determinant: beta must lie in [0, 1)");
  if (!alpha_in_trace_window(n, opt.alpha))
    fail(ErrorKind::precondition, "evans_determinant: alpha = " + std::to_string(opt.alpha) +
                                      " outside the trace window 0 < alpha < n - 2");
}

// Left end of the propagation: fixed by the caller or chosen so that
// e^{2 tau} sup|V - lambda| is negligible for every lambda in [lo, hi].
inline double evans_tau_min(const PotentialSpec& V, int n, double tau, double lo, double hi, const EvansOptions& opt) {
  if (opt.tau_min) {
    require(*opt.tau_min < tau, "evans_determinant: tau_min must lie below log t");
    return *opt.tau_min;
  }
  auto one = [&](double lam) {
    return auto_tau_min(V.shifted(lam), n, tau, opt.asymptotic_tol, opt.search_limit, opt.zero_span);
  };
  return std::min(one(lo), one(hi));
}

// Weighted-orthonormal unstable frame of the degree-l block at tau.
inline Eigen::MatrixXd block_unstable_frame(const SesOperator& op, int l, double tau_min, double tau,
                                            const EvansOptions& opt, Eigen::VectorXd& w) {
  const int n = op.dimension(), N = op.value_dim();
  const double lam = lb_eigenvalue(n, l);
  w.resize(2 * N);
  w.head(N).setConstant(std::pow(1.0 + lam, 0.5 * (0.5 + opt.beta)));
  w.tail(N).setConstant(std::pow(1.0 + lam, 0.5 * (-0.5 + opt.beta)));
  std::vector<Coordinate> coords;
  for (int c = 0; c < N; ++c) coords.push_back({l, c, N + c});
  Eigen::MatrixXd X = limiting_frames(n, op.alpha(), 2 * N, coords).first;
  weighted_qr(w, X);
  OdeOptions o = opt.ode;
  o.h_max = std::min(o.h_max, opt.step_cap / std::max(1.0, std::abs(op.alpha()) + lam));
  auto rhs = [&op, l](double s, const Eigen::MatrixXd& Y, Eigen::MatrixXd& dY) { dY.noalias() = op.block_generator(l, s) * Y; };
  const int pieces = std::max(1, static_cast<int>(std::ceil((tau - tau_min) / opt.orth_interval - 1e-12)));
  for (int p = 0; p < pieces; ++p) {
    const double a = tau_min + (tau - tau_min) * p / pieces;
    const double b = p + 1 == pieces ? tau : tau_min + (tau - tau_min) * (p + 1) / pieces;
    integrate_dopri5(rhs, X, a, b, o);
    weighted_qr(w, X);
  }
  return X;
}

inline double constrained_det(const Eigen::MatrixXd& C, const Eigen::VectorXd& w, const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd m = C * (w.asDiagonal() * X);
  if (m.rows() != m.cols())
    fail(ErrorKind::precondition, "evans_determinant: boundary constraint and unstable frame sizes differ");
  if (m.rows() == 0) return 1.0;
  return m.determinant();
}

}  // namespace detail

/// Per-block determinants: one entry per degree l = 0..l_max for decoupled
/// potentials, a single entry (full state) otherwise.
inline std::vector<double> evans_blocks(double lambda, const PotentialSpec& V, double t, int n, int l_max,
                                        const EvansOptions& opt = {}, std::optional<double> tau_min = std::nullopt) {
  detail::check_evans_inputs(n, t, opt);
  require(l_max >= 0, "evans_determinant: l_max must be >= 0");
  const double tau = std::log(t);
  const double t0 = tau_min ? *tau_min : detail::evans_tau_min(V, n, tau, lambda, lambda, opt);
  const PotentialSpec W = V.shifted(lambda);
  const SesOperator op(n, opt.alpha, l_max, W);
  std::vector<double> out;
  if (op.decoupled()) {
    const int N = op.value_dim();
    const Eigen::MatrixXd C = opt.boundary.constraint(N);
    for (int l = 0; l <= l_max; ++l) {
      Eigen::VectorXd w;
      const Eigen::MatrixXd X = detail::block_unstable_frame(op, l, t0, tau, opt, w);
      out.push_back(detail::constrained_det(C, w, X));
    }
    return out;
  }
  SubspaceFrame frame = spectral_projections_A(n, opt.alpha, l_max, op.value_dim(), opt.beta).first;
  frame.tau = t0;
  const PropagationResult r = propagate_subspace(frame, tau, op, opt.orth_interval, opt.ode);
  const Eigen::VectorXd w = state_weights(n, l_max, op.value_dim(), opt.beta);
  out.push_back(detail::constrained_det(opt.boundary.constraint(op.limiting().half_dim()), w, r.frame.vectors));
  return out;
}

/// Unstable frame of V - lambda at tau = log t (full state).
inline SubspaceFrame unstable_frame_at(double lambda, const PotentialSpec& V, double t, int n, int l_max,
                                       const EvansOptions& opt = {}, std::optional<double> tau_min = std::nullopt) {
  detail::check_evans_inputs(n, t, opt);
  const double tau = std::log(t);
  const double t0 = tau_min ? *tau_min : detail::evans_tau_min(V, n, tau, lambda, lambda, opt);
  const SesOperator op(n, opt.alpha, l_max, V.shifted(lambda));
  SubspaceFrame frame = spectral_projections_A(n, opt.alpha, l_max, op.value_dim(), opt.beta).first;
  frame.tau = t0;
  return propagate_subspace(frame, tau, op, opt.orth_interval, opt.ode).frame;
}

/// Normalized determinant of the boundary-constrained block of E^u(t) for
/// V - lambda. Zero iff E^u(t) meets the boundary subspace at truncation level.
/// For decoupled potentials it is the product of block determinants, each
/// raised to the number of modes sharing the degree.
inline double evans_determinant(double lambda, const PotentialSpec& V, double t, int n, int l_max,
                                const EvansOptions& opt = {}) {
  const std::vector<double> d = evans_blocks(lambda, V, t, n, l_max, opt);
  if (!V.decoupled()) return d[0];
  double p = 1.0;
  for (int l = 0; l <= l_max; ++l) p *= std::pow(d[static_cast<std::size_t>(l)], modes_of_degree(n, l));
  return p;
}

// -- scan ------------------------------------------------------------------------

struct EigenRoot {
  double lambda = 0.0;
  int multiplicity = 0;
  int l = -1;                 ///< degree for decoupled potentials, -1 otherwise
  double smallest_sv = 0.0;   ///< smallest constrained singular value at the root
  double sv_gap = 0.0;        ///< smallest singular value kept as nonzero
};

struct ScanSample {
  double lambda;
  double det;
  int block_l;
  int bracket_id;  ///< -1 unless the sample opens a sign-change bracket
};

struct EigenScanResult {
  std::vector<EigenRoot> eigenvalues;
  std::vector<ScanSample> samples;
  double lambda_lo = 0.0, lambda_hi = 0.0;
  int steps = 0;
  double refine_tol = 0.0;
  double t = 1.0;
  double tau_min = 0.0;
};

struct ScanOptions {
  EvansOptions evans;
  double refine_tol = 1e-9;
  double intersection_tol = 1e-6;
  int threads = 1;
};

namespace detail {

// Runs fn(i) for i in [0, count) on up to `threads` workers; results land by index.
template <class Fn>
void parallel_for(int count, int threads, Fn fn) {
  threads = std::max(1, std::min(threads, count));
  if (threads == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < count; i += threads) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Sign-change scan of the Evans determinant on a uniform lambda grid, per
/// degree block for decoupled potentials and on the full determinant otherwise,
/// with bisection refinement to refine_tol.
inline EigenScanResult scan_eigenvalues(const PotentialSpec& V, double t, int n, int l_max, double lambda_lo,
                                        double lambda_hi, int steps, const ScanOptions& opt = {}) {
  require(std::isfinite(lambda_lo) && std::isfinite(lambda_hi) && lambda_lo < lambda_hi,
          "scan_eigenvalues: lambda range must be finite and increasing");
  require(steps >= 2, "scan_eigenvalues: steps must be >= 2");
  require(opt.refine_tol > 0.0, "scan_eigenvalues: refine_tol must be positive");
  detail::check_evans_inputs(n, t, opt.evans);
  const double tau = std::log(t);
  const double t0 = detail::evans_tau_min(V, n, tau, lambda_lo, lambda_hi, opt.evans);

  EigenScanResult res;
  res.lambda_lo = lambda_lo;
  res.lambda_hi = lambda_hi;
  res.steps = steps;
  res.refine_tol = opt.refine_tol;
  res.t = t;
  res.tau_min = t0;

  auto lambda_at = [&](int i) { return i == steps ? lambda_hi : lambda_lo + (lambda_hi - lambda_lo) * i / steps; };
  std::vector<std::vector<double>> dets(static_cast<std::size_t>(steps) + 1);
  detail::parallel_for(steps + 1, opt.threads, [&](int i) {
    dets[static_cast<std::size_t>(i)] = evans_blocks(lambda_at(i), V, t, n, l_max, opt.evans, t0);
  });
  const std::size_t B = dets[0].size();

  for (std::size_t b = 0; b < B; ++b) {
    double scale = 0.0;
    for (const auto& d : dets) scale = std::max(scale, std::abs(d[b]));
    if (std::abs(dets.front()[b]) <= 1e-10 * scale || std::abs(dets.back()[b]) <= 1e-10 * scale)
      fail(ErrorKind::precondition, "scan_eigenvalues: a range endpoint is a root; shift the lambda range");
  }

  struct Bracket {
    std::size_t block;
    double lo, hi, dlo;
  };
  std::vector<Bracket> brackets;
  for (std::size_t b = 0; b < B; ++b)
    for (int i = 0; i <= steps; ++i) {
      const double d = dets[static_cast<std::size_t>(i)][b];
      int id = -1;
      if (i < steps) {
        const double e = dets[static_cast<std::size_t>(i) + 1][b];
        if ((d < 0) != (e < 0)) {
          id = static_cast<int>(brackets.size());
          brackets.push_back({b, lambda_at(i), lambda_at(i + 1), d});
        }
      }
      res.samples.push_back({lambda_at(i), d, V.decoupled() ? static_cast<int>(b) : -1, id});
    }

  res.eigenvalues.resize(brackets.size());
  detail::parallel_for(static_cast<int>(brackets.size()), opt.threads, [&](int k) {
    Bracket br = brackets[static_cast<std::size_t>(k)];
    while (br.hi - br.lo > opt.refine_tol) {
      const double mid = 0.5 * (br.lo + br.hi);
      double dm;
      if (V.decoupled()) {
        const SesOperator op(n, opt.evans.alpha, l_max, V.shifted(mid));
        Eigen::VectorXd w;
        const Eigen::MatrixXd X = detail::block_unstable_frame(op, static_cast<int>(br.block), t0, tau, opt.evans, w);
        dm = detail::constrained_det(opt.evans.boundary.constraint(op.value_dim()), w, X);
      } else {
        dm = evans_blocks(mid, V, t, n, l_max, opt.evans, t0)[0];
      }
      if (dm == 0.0) {
        br.lo = br.hi = mid;
        break;
      }
      if ((dm < 0) == (br.dlo < 0)) {
        br.lo = mid;
        br.dlo = dm;
      } else {
        br.hi = mid;
      }
    }
    EigenRoot root;
    root.lambda = 0.5 * (br.lo + br.hi);
    Eigen::VectorXd s;
    int copies = 1;
    if (V.decoupled()) {
      root.l = static_cast<int>(br.block);
      copies = modes_of_degree(n, root.l);
      const SesOperator op(n, opt.evans.alpha, l_max, V.shifted(root.lambda));
      Eigen::VectorXd w;
      const Eigen::MatrixXd X = detail::block_unstable_frame(op, root.l, t0, tau, opt.evans, w);
      const Eigen::MatrixXd m = opt.evans.boundary.constraint(op.value_dim()) * (w.asDiagonal() * X);
      s = Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues();
    } else {
      s = boundary_singular_values(unstable_frame_at(root.lambda, V, t, n, l_max, opt.evans, t0), opt.evans.boundary);
    }
    root.multiplicity = 0;
    root.smallest_sv = s.size() ? s.minCoeff() : 0.0;
    root.sv_gap = 0.0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (s[i] < opt.intersection_tol) {
        ++root.multiplicity;
      } else {
        root.sv_gap = root.sv_gap == 0.0 ? s[i] : std::min(root.sv_gap, s[i]);
      }
    }
    // A sign change certifies at least one crossing even when the threshold misses it.
    root.multiplicity = copies * std::max(root.multiplicity, 1);
    res.eigenvalues[static_cast<std::size_t>(k)] = root;
  });
  std::stable_sort(res.eigenvalues.begin(), res.eigenvalues.end(),
                   [](const EigenRoot& a, const EigenRoot& b) { return a.lambda < b.lambda; });
  return res;
}

}  // namespace raddich
