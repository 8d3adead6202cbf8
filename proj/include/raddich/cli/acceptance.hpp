#pragma once

// The ten acceptance criteria at their stated tolerances. Shared by the
// `verify` command and the acceptance test binary.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "raddich/dichotomy.hpp"
#include "raddich/eigen_detector.hpp"
#include "raddich/nonlinear.hpp"
#include "raddich/oracles.hpp"
#include "raddich/ses.hpp"
#include "raddich/spectral.hpp"

namespace raddich::acceptance {

struct CheckResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

namespace detail {

inline std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

inline Eigen::MatrixXd closed_form_matrix(const DichotomyTable& t, double tau, Flavor flavor) {
  const Eigen::Index D = t.op().state_dim();
  Eigen::MatrixXd P(D, D);
  for (Eigen::Index j = 0; j < D; ++j) {
    Eigen::VectorXcd e = Eigen::VectorXcd::Zero(D);
    e[j] = 1.0;
    P.col(j) = to_vector(closed_form_projection(t.as_state(e, tau), flavor)).real();
  }
  return P;
}

inline RescaledState mode_state(int n, int l_max, int l, double alpha, double tau, double g_over_f) {
  const SphereField y = SphereField::basis(n, l_max, {l, 0});
  return RescaledState{tau, alpha, y, g_over_f * y};
}

}  // namespace detail

/// 1. Free dichotomy projections against the closed form.
inline CheckResult closed_form_dichotomy() {
  CheckResult r{1, "closed-form dichotomy reproduction (V = 0, n = 3, alpha = 0.5, L = 8)", false, "", 0.0};
  const auto t0 = std::chrono::steady_clock::now();
  DichotomyOptions o;
  o.tau_max = 0.0;
  o.tau_min = -6.0;
  const DichotomyTable table = build_dichotomy(PotentialSpec::zero(), 3, 0.5, 8, o);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const double tau = -6.0 + 6.0 * i / 49.0;
    const Eigen::MatrixXd P = table.projection_matrix(tau, Flavor::unstable);
    worst = std::max(worst, (P - detail::closed_form_matrix(table, tau, Flavor::unstable)).cwiseAbs().maxCoeff());
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.pass = worst < 1e-9 && r.seconds < 10.0;
  r.detail = detail::fmt("max coefficient deviation %.3e (< 1e-9), %.2f s (< 10 s)", worst, r.seconds);
  return r;
}

/// 2. Evolution of single modes at the rates alpha + l and alpha - l - 1.
inline CheckResult evolution_rates() {
  CheckResult r{2, "single-mode evolution rates (l <= 8, |tau - tau0| <= 5)", false, "", 0.0};
  const auto t0 = std::chrono::steady_clock::now();
  const double alpha = 0.5;
  const int L = 8;
  DichotomyOptions o;
  o.tau_max = 0.0;
  o.tau_min = -6.0;
  const DichotomyTable table = build_dichotomy(PotentialSpec::zero(), 3, alpha, L, o);
  double worst = 0.0;
  for (int l = 0; l <= L; ++l)
    for (double d : {0.3, 1.0, 2.5, 5.0}) {
      for (double tau0 : {0.0, -0.7}) {
        const RescaledState z = detail::mode_state(3, L, l, alpha, tau0, l);
        const RescaledState y = table.apply_phi(z, tau0 - d, tau0, Flavor::unstable);
        const double e = std::exp(-(alpha + l) * d);
        worst = std::max(worst, state_norm(y.f - e * z.f, y.g - e * z.g) / (e * state_norm(z)));
      }
      for (double tau0 : {-6.0, -5.3}) {
        const RescaledState z = detail::mode_state(3, L, l, alpha, tau0, -(l + 1.0));
        const RescaledState y = table.apply_phi(z, tau0 + d, tau0, Flavor::stable);
        const double e = std::exp((alpha - l - 1.0) * d);
        worst = std::max(worst, state_norm(y.f - e * z.f, y.g - e * z.g) / (e * state_norm(z)));
      }
    }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.pass = worst < 1e-8;
  r.detail = detail::fmt("max relative error %.3e (< 1e-8)", worst);
  return r;
}

/// 3. Dirichlet eigenvalues of the unit ball against squared Bessel zeros.
inline CheckResult eigenvalue_oracle(int threads = 1) {
  CheckResult r{3, "eigenvalue oracle on [1, 35] (V = 0, n = 3, t = 1, L = 4)", false, "", 0.0};
  const auto t0 = std::chrono::steady_clock::now();
  ScanOptions so;
  so.threads = threads;
  const EigenScanResult res = scan_eigenvalues(PotentialSpec::zero(), 1.0, 3, 4, 1.0, 35.0, 68, so);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double want[] = {std::pow(bessel_zero(0, 1), 2), std::pow(bessel_zero(1, 1), 2), std::pow(bessel_zero(2, 1), 2)};
  const int mult[] = {1, 3, 5};
  bool ok = res.eigenvalues.size() == 3;
  double worst = 0.0;
  std::string found;
  for (std::size_t i = 0; i < res.eigenvalues.size(); ++i) {
    const auto& e = res.eigenvalues[i];
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%.9f(x%d)", i ? ", " : "", e.lambda, e.multiplicity);
    found += buf;
    if (i < 3) {
      worst = std::max(worst, std::abs(e.lambda - want[i]));
      ok = ok && e.multiplicity == mult[i];
    }
  }
  r.pass = ok && worst < 1e-6 && r.seconds < 60.0;
  r.detail = "found {" + found + "}; " + detail::fmt("max |lambda - z^2| %.3e (< 1e-6), %.2f s (< 60 s)", worst, r.seconds);
  return r;
}

/// 4. Decay of the coupling B(tau) for V = 1 + |x|.
inline CheckResult perturbation_decay() {
  CheckResult r{4, "perturbation decay ||B(tau)|| <= C e^{2 tau} for V = 1 + |x|", false, "", 0.0};
  const auto t0 = std::chrono::steady_clock::now();
  const PotentialSpec V = PotentialSpec::radial_polynomial({1.0, 1.0});
  const int L = 8;
  std::vector<double> taus, ratio, dev;
  double C = 0.0;
  for (int i = 0; i <= 60; ++i) {
    const double tau = -6.0 + 0.1 * i;
    const double b = assemble_B(tau, V, 3, L).norm();
    taus.push_back(tau);
    ratio.push_back(b / std::exp(2.0 * tau));
    C = std::max(C, ratio.back());
    dev.push_back(std::abs(b / (std::exp(2.0 * tau) * V.sup_norm(std::exp(tau), 3)) - 1.0));
  }
  bool bounded = true;
  for (double q : ratio) bounded = bounded && q <= C * (1.0 + 1e-12);
  const double worst = *std::max_element(dev.begin(), dev.end());
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.pass = bounded && worst < 0.05;
  r.detail = detail::fmt("fitted C = %.4f, max deviation of ||B|| / (e^{2 tau} sup|V|) from 1: %.3e (< 5%%)", C, worst);
  return r;
}

/// 5. Resolvent bound C / (1 + |mu|), with C fitted at mu = 1.
inline CheckResult resolvent_decay() {
  CheckResult r{5, "resolvent decay ||(A - i mu)^{-1}|| <= C / (1 + |mu|) (L = 16)", false, "", 0.0};
  const auto t0 = std::chrono::steady_clock::now();
  const double mus[] = {1.0, 10.0, 100.0};
  double norms[3];
  for (int i = 0; i < 3; ++i) norms[i] = resolvent_A(mus[i], 3, 0.5, 16).norm();
  const double C = norms[0] * (1.0 + mus[0]);
  bool ok = true;
  for (int i = 0; i < 3; ++i) ok = ok && norms[i] * (1.0 + mus[i]) <= C * (1.0 + 1e-12);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.pass = ok;
  r.detail = detail::fmt("C = %.4f; (1 + mu) ||R|| = %.4f, %.4f at mu = 10, 100", C, norms[1] * 11.0, norms[2] * 101.0) +
             (ok ? "; no violation" : "; violated");
  return r;
}

/// 6. Conservation of the Wronskian for V = t^2.
inline CheckResult wronskian_conservation() {
  CheckResult r{6, "Wronskian conservation along integrated solutions (V = t^2, tau in [-5, 0])", false, "", 0.0};
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int l = 0; l <= 2; ++l) {
    const double lam = lb_eigenvalue(3, l);
    auto rhs = [&](double t, const Eigen::MatrixXd& X, Eigen::MatrixXd& dX) {
      dX.resize(2, X.cols());
      dX.row(0) = X.row(1);
      dX.row(1) = (t * t + lam / (t * t)) * X.row(0) - (2.0 / t) * X.row(1);
    };
    const double ta = std::exp(-5.0);
    Eigen::MatrixXd X(2, 2);
    X << std::pow(ta, l), std::pow(ta, -l - 1.0), l * std::pow(ta, l - 1.0), -(l + 1.0) * std::pow(ta, -l - 2.0);
    const SphereField y = SphereField::basis(3, 2, {l, 0});
    auto w_of = [&](double t) {
      return wronskian(TraceState{t, X(0, 0) * y, X(1, 0) * y}, TraceState{t, X(0, 1) * y, X(1, 1) * y}).real();
    };
    const double w0 = w_of(ta);
    double t = ta;
    for (int k = 1; k <= 50; ++k) {
      const double next = std::exp(-5.0 + 0.1 * k);
      integrate_dopri5(rhs, X, t, next, {1e-13, 1e-300});
      t = next;
      worst = std::max(worst, std::abs(w_of(t) - w0) / std::abs(w0));
    }
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.pass = worst < 1e-8;
  r.detail = detail::fmt("max relative drift %.3e (< 1e-8) over l = 0, 1, 2", worst);
  return r;
}

/// 7. Manufactured cubic-forced Dirichlet problem on the unit ball.
inline CheckResult manufactured_nonlinear() {
  CheckResult r{7, "nonlinear manufactured solution (cubic-forced, T = 1, Dirichlet, L = 4)", false, "", 0.0};
  const auto t0 = std::chrono::steady_clock::now();
  const ManufacturedProblem mp = manufactured_problem("cubic-forced", 3, 4);
  NonlinearProblem p;
  p.V = mp.V;
  p.F = mp.F;
  p.T = mp.T;
  p.l_max = 4;
  const DichotomyTable table = build_ball_table(p, -8.0);
  const BoundarySolution bs = solve_boundary_condition(p, table);
  double worst = 0.0;
  for (const auto& s : bs.trajectory.states) {
    const RescaledState e = mp.exact.rescaled(s.tau, p.alpha);
    worst = std::max(worst, state_norm(s.f - e.f, s.g - e.g));
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.pass = bs.trajectory.iterations <= 25 && worst < 1e-5;
  r.detail = detail::fmt("%.0f iterations (<= 25), sup defect %.3e (< 1e-5)", bs.trajectory.iterations, worst);
  return r;
}

/// 8. Only the zero solution is bounded on the whole line.
inline CheckResult liouville(int trials = 20, std::uint64_t seed = 1) {
  CheckResult r{8, "Liouville property (V = 0, F = 0, 20 random initializations)", false, "", 0.0};
  const auto t0 = std::chrono::steady_clock::now();
  NonlinearProblem p;
  p.T = std::numeric_limits<double>::infinity();
  p.boundary = BoundarySubspace::whole();
  p.l_max = 4;
  const auto [minus, plus] = build_whole_space_tables(p);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  auto random_states = [&](const DichotomyTable& t) {
    std::vector<RescaledState> out;
    for (double tau : t.grid()) {
      Eigen::VectorXcd v(t.op().state_dim());
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = nd(rng);
      out.push_back(t.as_state(v, tau));
    }
    return out;
  };
  double worst = 0.0;
  for (int k = 0; k < trials; ++k) {
    const auto im = random_states(minus), ip = random_states(plus);
    MatchOptions opt;
    opt.initial_minus = &im;
    opt.initial_plus = &ip;
    const SolutionTrajectory sol = match_whole_space(p, minus, plus, opt);
    for (const auto& s : sol.states) worst = std::max(worst, state_norm(s));
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.pass = worst < 1e-10;
  r.detail = detail::fmt("max trajectory norm %.3e (< 1e-10) over %.0f trials", worst, trials);
  return r;
}

/// 9. Admissible alpha window: (0, n - 2) for n = 3, empty for n = 2.
inline CheckResult alpha_window() {
  CheckResult r{9, "alpha-window validation (n = 3 accepts (0, 1), n = 2 window empty)", false, "", 0.0};
  const auto t0 = std::chrono::steady_clock::now();
  int bad = 0, count = 0;
  for (int i = -40; i <= 80; ++i) {
    const double a = 0.025 * i + 0.0125;  // off the lattice of forbidden values
    const bool want3 = a > 0.0 && a < 1.0;
    bad += alpha_in_trace_window(3, a) != want3;
    bad += alpha_in_trace_window(2, a);
    count += 2;
  }
  for (double a : {0.0, 1.0, -1.0, 2.0}) {
    bad += validate_alpha(3, a) > 0.0;  // -alpha in Sigma(3)
    bad += alpha_in_trace_window(3, a);
    count += 2;
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.pass = bad == 0;
  r.detail = detail::fmt("%.0f of %.0f interval checks agree", count - bad, count);
  return r;
}

/// 10. Trace residuals of every oracle solution and the trace characterization
/// of the unstable subspace.
inline CheckResult trace_roundtrip() {
  CheckResult r{10, "trace roundtrip (oracle residuals, harmonic traces in R(P^u) / ker(P^u))", false, "", 0.0};
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<ExactSolution> all;
  for (int n : {2, 3})
    for (int l = 0; l <= 3; ++l) {
      const ModeIndex k = n == 3 ? ModeIndex{l, l > 0 ? -1 : 0} : ModeIndex{l, l > 0 ? 1 : 0};
      all.push_back(harmonic_solution(k, HarmonicBranch::growing, n, 3));
      all.push_back(harmonic_solution(k, HarmonicBranch::decaying, n, 3));
    }
  for (int l = 0; l <= 2; ++l) all.push_back(bessel_solution({l, 0}, 7.0, 2));
  all.push_back(fundamental_solution(2));
  all.push_back(fundamental_solution(3));
  for (const auto& name : manufactured_names()) all.push_back(manufactured_problem(name, 3, 2).exact);
  double res = 0.0;
  for (const auto& s : all) res = std::max(res, ses_residual(s.sample(2001), s.V, s.forcing(), 4));

  const int L = 4;
  const double alpha = 0.5;
  DichotomyOptions o;
  o.tau_max = std::log(2.0);
  o.tau_min = -6.0;
  const DichotomyTable table = build_dichotomy(PotentialSpec::zero(), 3, alpha, L, o);
  double up = 0.0, down = 0.0;
  for (double t : {0.5, 1.0, 2.0})
    for (const ModeIndex& k : enumerate_modes(3, L)) {
      const RescaledState g = rescale_forward(harmonic_trace(k, HarmonicBranch::growing, t, 3, L), alpha);
      const RescaledState d = rescale_forward(harmonic_trace(k, HarmonicBranch::decaying, t, 3, L), alpha);
      up = std::max(up, table.range_angle(g, std::log(t), Flavor::unstable));
      down = std::max(down, table.range_angle(d, std::log(t), Flavor::stable));
    }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.pass = res < 1e-6 && up < 1e-8 && down < 1e-8;
  r.detail = detail::fmt("max ses_residual %.3e (< 1e-6); growing-trace angle %.3e, decaying-trace angle %.3e (< 1e-8)",
                         res, up, down);
  return r;
}

/// All criteria, or the listed subset, in order.
inline std::vector<CheckResult> run_all(const std::vector<int>& only = {}, int threads = 1) {
  const std::vector<std::function<CheckResult()>> checks{
      closed_form_dichotomy, evolution_rates,        [threads] { return eigenvalue_oracle(threads); },
      perturbation_decay,    resolvent_decay,        wronskian_conservation,
      manufactured_nonlinear, [] { return liouville(); }, alpha_window,
      trace_roundtrip};
  std::vector<CheckResult> out;
  for (std::size_t i = 0; i < checks.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    try {
      out.push_back(checks[i]());
    } catch (const std::exception& e) {
      out.push_back({id, "criterion " + std::to_string(id), false, std::string("error: ") + e.what(), 0.0});
    }
  }
  return out;
}

inline std::string format_line(const CheckResult& r) {
  return std::string(r.pass ? "PASS" : "FAIL") + "  [" + std::to_string(r.id) + "] " + r.name + ": " + r.detail;
}

}  // namespace raddich::acceptance
