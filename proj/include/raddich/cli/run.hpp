#pragma once

// Orchestration of the command-line tool: one runner per command, each
// writing CSV data, SVG plots and a short summary into the output directory.

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "raddich/cli/acceptance.hpp"
#include "raddich/cli/config.hpp"
#include "raddich/cli/output.hpp"
#include "raddich/dichotomy.hpp"
#include "raddich/eigen_detector.hpp"
#include "raddich/nonlinear.hpp"
#include "raddich/ode.hpp"
#include "raddich/oracles.hpp"
#include "raddich/ses.hpp"

namespace raddich::cli {

/// Process exit status for each error class.
inline int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::precondition:
    case ErrorKind::config: return 2;
    case ErrorKind::dichotomy: return 3;
    case ErrorKind::solver: return 4;
    case ErrorKind::io: return 5;
  }
  return 1;
}

namespace detail {

namespace fs = std::filesystem;

struct Context {
  const RunConfig& config;
  fs::path dir;
  std::string hash;
  std::ostream& out;
  std::vector<std::string> summary;

  void note(const std::string& line) {
    out << line << '\n';
    summary.push_back(line);
  }

  void finish() const {
    std::ofstream os = open_output(dir / "summary.txt");
    os << "# config_hash=" << hash << '\n';
    for (const auto& l : summary) os << l << '\n';
    os.flush();
    if (!os) fail(ErrorKind::io, "write to " + (dir / "summary.txt").string() + " failed");
  }
};

inline std::string fmt(const char* f, double v) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

inline std::string mode_label(const ModeIndex& k, int c, int N) {
  std::string s = "l" + std::to_string(k.l) + "_m" + std::to_string(k.m);
  if (N > 1) s += "_c" + std::to_string(c);
  return s;
}

/// tau, then re/im of every f~ coefficient, then re/im of every g~ coefficient.
inline std::vector<std::string> state_columns(int n, int l_max, int N) {
  std::vector<std::string> cols{"tau"};
  for (const char* part : {"f", "g"})
    for (const ModeIndex& k : enumerate_modes(n, l_max))
      for (int c = 0; c < N; ++c) {
        cols.push_back(std::string(part) + "_re_" + mode_label(k, c, N));
        cols.push_back(std::string(part) + "_im_" + mode_label(k, c, N));
      }
  return cols;
}

inline std::vector<double> state_row(const RescaledState& s) {
  std::vector<double> row{s.tau};
  for (const SphereField* fld : {&s.f, &s.g})
    for (Eigen::Index i = 0; i < fld->size(); ++i) {
      row.push_back(fld->coeffs()[i].real());
      row.push_back(fld->coeffs()[i].imag());
    }
  return row;
}

inline void write_trajectory(const Context& ctx, const fs::path& name, const std::vector<RescaledState>& states) {
  const auto& c = ctx.config;
  CsvWriter csv(ctx.dir / name, ctx.hash, state_columns(c.n, c.l_max, c.N));
  for (const auto& s : states) csv.row(state_row(s));
  csv.close();
}

/// One series per f~ coefficient (first component), skipping coefficients that vanish identically.
inline std::vector<Series> coefficient_fan(const std::vector<RescaledState>& states, bool log_scale) {
  std::vector<Series> out;
  if (states.empty()) return out;
  const int n = states[0].f.dimension(), N = states[0].f.value_dim();
  const auto modes = enumerate_modes(n, states[0].f.l_max());
  for (std::size_t j = 0; j < modes.size(); ++j) {
    Series s;
    s.name = mode_label(modes[j], 0, 1);
    bool nonzero = false;
    for (const auto& st : states) {
      const cplx v = st.f.coeffs()[static_cast<Eigen::Index>(j) * N];
      nonzero = nonzero || std::abs(v) > 0.0;
      s.x.push_back(st.tau);
      s.y.push_back(log_scale ? std::log10(std::max(std::abs(v), 1e-300)) : v.real());
    }
    if (nonzero) out.push_back(std::move(s));
  }
  return out;
}

inline double weighted_operator_norm(const Eigen::VectorXd& w, const Eigen::MatrixXd& P) {
  const Eigen::MatrixXd M = w.asDiagonal() * P * w.cwiseInverse().asDiagonal();
  return Eigen::JacobiSVD<Eigen::MatrixXd>(M).singularValues()(0);
}

/// P_A^u from the eigenframes of A: identity on the unstable frame, zero on the stable one.
inline Eigen::MatrixXd limiting_projection(const RunConfig& c) {
  const auto [u, s] = spectral_projections_A(c.n, c.alpha, c.l_max, c.N, c.beta);
  Eigen::MatrixXd M(u.vectors.rows(), u.size() + s.size());
  M << u.vectors, s.vectors;
  return u.vectors * M.partialPivLu().solve(Eigen::MatrixXd::Identity(M.rows(), M.cols())).topRows(u.size());
}

// -- commands ----------------------------------------------------------------------

inline int run_evolve(Context& ctx) {
  const auto& c = ctx.config;
  const auto& e = c.evolve;
  const PotentialSpec V = make_potential(c);
  const SesOperator op(c.n, c.alpha, c.l_max, V);
  const double tau0 = std::log(e.t0), tau1 = std::log(e.t1);

  SphereField f(c.n, c.l_max, c.N), g(c.n, c.l_max, c.N);
  std::optional<ExactSolution> exact;
  if (e.initial == "harmonic") {
    const HarmonicBranch branch = e.branch == "growing" ? HarmonicBranch::growing : HarmonicBranch::decaying;
    exact = harmonic_solution(e.mode, branch, c.n, c.l_max);
    const TraceState h = exact->trace(e.t0);
    for (int j = 0; j < f.mode_count(); ++j) {
      f.coeff(j, 0) = h.f.coeff(j);
      g.coeff(j, 0) = h.g.coeff(j);
    }
    if (!V.identically_zero() || c.N != 1) exact.reset();
  } else {
    for (const auto& m : e.modes) {
      f.coeff(mode_position(c.n, m.mode), 0) = m.f;
      g.coeff(mode_position(c.n, m.mode), 0) = m.g;
    }
  }
  const RescaledState z0 = rescale_forward(TraceState{e.t0, f, g}, c.alpha);

  const Eigen::VectorXcd v0 = to_vector(z0);
  Eigen::MatrixXd X(v0.size(), 2);
  X.col(0) = v0.real();
  X.col(1) = v0.imag();
  OdeOptions ode{e.rtol, e.atol};
  ode.h_max = 0.1 / std::max(1.0, std::abs(c.alpha) + lb_eigenvalue(c.n, c.l_max));
  auto rhs = [&op](double t, const Eigen::MatrixXd& Y, Eigen::MatrixXd& dY) { op.apply_generator(t, Y, dY); };

  std::vector<RescaledState> traj;
  double tau = tau0;
  for (int i = 0; i < e.samples; ++i) {
    const double next = i + 1 == e.samples ? tau1 : tau0 + (tau1 - tau0) * i / (e.samples - 1.0);
    integrate_dopri5(rhs, X, tau, next, ode);
    tau = next;
    const Eigen::VectorXcd v = X.col(0).cast<cplx>() + cplx(0.0, 1.0) * X.col(1).cast<cplx>();
    traj.push_back(rescaled_from_vector(v, tau, c.alpha, c.n, c.l_max, c.N));
  }
  write_trajectory(ctx, "evolve_trajectory.csv", traj);

  ctx.note("evolve: " + std::to_string(traj.size()) + " samples on tau in [" + num(tau0) + ", " + num(tau1) + "]");
  ctx.note("rses_residual (order 6): " + fmt("%.3e", rses_residual(traj, V, {}, 6)));
  if (exact) {
    double worst = 0.0;
    for (const auto& s : traj) {
      const RescaledState x = exact->rescaled(s.tau, c.alpha);
      worst = std::max(worst, state_norm(s.f - x.f, s.g - x.g) / std::max(1e-300, state_norm(x)));
    }
    ctx.note("max relative deviation from the exact harmonic: " + fmt("%.3e", worst));
  }
  write_svg(ctx.dir / "evolve_fan.svg",
            {"coefficient fan", "tau", "log10 |f~ coefficient|", coefficient_fan(traj, true), {}});
  return 0;
}

inline int run_dichotomy(Context& ctx) {
  const auto& c = ctx.config;
  const auto& d = c.dichotomy;
  const PotentialSpec V = make_potential(c);
  DichotomyOptions o;
  o.side = d.side == "inner" ? HalfLine::inner : HalfLine::outer;
  o.tau_max = d.tau_max;
  o.tau_min = d.tau_min;
  o.tau_start = d.tau_start;
  o.tau_end = d.tau_end;
  o.dtau = d.dtau;
  o.beta = c.beta;
  const DichotomyTable table = build_dichotomy(V, c.n, c.alpha, c.l_max, o);

  const Eigen::VectorXd w = state_weights(c.n, c.l_max, c.N, c.beta);
  const Eigen::MatrixXd PA = limiting_projection(c);
  const bool closed = V.identically_zero() && c.n == 3 && c.N == 1;
  std::vector<std::string> cols{"tau", "norm_Pu", "norm_Ps", "limit_deviation"};
  if (closed) cols.push_back("closed_form_deviation");
  CsvWriter csv(ctx.dir / "dichotomy_projection.csv", ctx.hash, cols);

  Series norm_u{"||P^u||", {}, {}}, dev{"log10 ||P^u - P^u_A||", {}, {}};
  double worst_limit = 0.0, worst_closed = 0.0;
  for (int i = 0; i < d.samples; ++i) {
    const double tau = i + 1 == d.samples ? table.tau_hi()
                                          : table.tau_lo() + (table.tau_hi() - table.tau_lo()) * i / (d.samples - 1.0);
    const Eigen::MatrixXd Pu = table.projection_matrix(tau, Flavor::unstable);
    const Eigen::MatrixXd Ps = table.projection_matrix(tau, Flavor::stable);
    const double lim = (Pu - PA).cwiseAbs().maxCoeff();
    worst_limit = std::max(worst_limit, lim);
    std::vector<double> row{tau, weighted_operator_norm(w, Pu), weighted_operator_norm(w, Ps), lim};
    if (closed) {
      const double cf = (Pu - acceptance::detail::closed_form_matrix(table, tau, Flavor::unstable)).cwiseAbs().maxCoeff();
      worst_closed = std::max(worst_closed, cf);
      row.push_back(cf);
    }
    csv.row(row);
    norm_u.x.push_back(tau);
    norm_u.y.push_back(row[1]);
    dev.x.push_back(tau);
    dev.y.push_back(std::log10(std::max(lim, 1e-17)));
  }
  csv.close();
  if (d.dump_table) {
    std::ofstream os = open_output(ctx.dir / "dichotomy_table.txt");
    save_table(table, os);
    os.flush();
    if (!os) fail(ErrorKind::io, "write to dichotomy_table.txt failed");
  }

  const auto& cert = table.certificate();
  ctx.note("dichotomy: " + d.side + " table on tau in [" + num(table.tau_lo()) + ", " + num(table.tau_hi()) + "], " +
           std::to_string(table.grid().size()) + " grid points, dim E^u = " + std::to_string(table.unstable_dim()) +
           ", dim E^s = " + std::to_string(table.stable_dim()));
  ctx.note("rate certificate: eta_u = " + fmt("%.6g", cert.eta_u) + ", eta_s = " + fmt("%.6g", cert.eta_s) +
           ", K = " + fmt("%.6g", cert.K));
  ctx.note("min transversality: " + fmt("%.6g", table.min_transversality()));
  ctx.note("max deviation from the limiting projection: " + fmt("%.3e", worst_limit));
  if (closed) ctx.note("max deviation from the closed-form projection: " + fmt("%.3e", worst_closed));
  write_svg(ctx.dir / "dichotomy_projection.svg",
            {"projection norm vs tau", "tau", "value", {norm_u, dev}, {}});
  return 0;
}

inline int run_eigen_scan(Context& ctx) {
  const auto& c = ctx.config;
  const auto& s = c.eigen_scan;
  const PotentialSpec V = make_potential(c);
  ScanOptions so;
  so.evans.alpha = c.alpha;
  so.evans.beta = c.beta;
  so.evans.tau_min = s.tau_min;
  so.evans.boundary = s.boundary == "neumann" ? BoundarySubspace::neumann() : BoundarySubspace::dirichlet();
  so.refine_tol = s.refine_tol;
  so.intersection_tol = s.intersection_tol;
  so.threads = c.threads;
  const EigenScanResult res = scan_eigenvalues(V, s.t, c.n, c.l_max, s.lambda_lo, s.lambda_hi, s.steps, so);

  CsvWriter roots(ctx.dir / "eigen_roots.csv", ctx.hash, {"lambda", "multiplicity", "l"});
  for (const auto& r : res.eigenvalues) roots.row({r.lambda, static_cast<double>(r.multiplicity), static_cast<double>(r.l)});
  roots.close();
  CsvWriter samples(ctx.dir / "eigen_scan.csv", ctx.hash, {"lambda", "det", "block_l", "bracket_id"});
  std::map<int, Series> blocks;
  for (const auto& p : res.samples) {
    samples.row({p.lambda, p.det, static_cast<double>(p.block_l), static_cast<double>(p.bracket_id)});
    Series& ser = blocks[p.block_l];
    ser.name = p.block_l < 0 ? "coupled" : "l = " + std::to_string(p.block_l);
    ser.x.push_back(p.lambda);
    ser.y.push_back(p.det);
  }
  samples.close();

  ctx.note("eigen-scan: " + std::to_string(res.eigenvalues.size()) + " eigenvalues in [" + num(s.lambda_lo) + ", " +
           num(s.lambda_hi) + "] at t = " + num(s.t) + ", tau_min = " + num(res.tau_min));
  std::vector<double> marks;
  for (const auto& r : res.eigenvalues) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "  lambda = %.12f  multiplicity %d  l = %d  smallest sv %.3e", r.lambda,
                  r.multiplicity, r.l, r.smallest_sv);
    ctx.note(buf);
    marks.push_back(r.lambda);
  }
  PlotSpec plot{"determinant vs lambda", "lambda", "det", {}, marks};
  for (auto& [l, ser] : blocks) plot.series.push_back(std::move(ser));
  write_svg(ctx.dir / "eigen_scan.svg", plot);
  return 0;
}

inline void write_iteration_log(const Context& ctx, const SolutionTrajectory& sol, double sigma_min) {
  json j;
  j["config_hash"] = ctx.hash;
  j["iterations"] = sol.iterations;
  j["converged"] = sol.converged;
  j["defect"] = sol.defect;
  j["tail_bound"] = sol.tail_bound;
  j["lipschitz"] = sol.lipschitz;
  j["boundary_defect"] = sol.boundary_defect;
  j["match_defect"] = sol.match_defect;
  j["sigma_min"] = sigma_min;
  j["log"] = json::array();
  for (const auto& r : sol.log) j["log"].push_back({{"iteration", r.iteration}, {"update", r.update}, {"ratio", r.ratio}});
  std::ofstream os = open_output(ctx.dir / "nonlinear_iterations.json");
  os << j.dump(2) << '\n';
  os.flush();
  if (!os) fail(ErrorKind::io, "write to nonlinear_iterations.json failed");
}

inline BoundarySubspace boundary_of(const std::string& b) {
  if (b == "neumann") return BoundarySubspace::neumann();
  if (b == "whole") return BoundarySubspace::whole();
  return BoundarySubspace::dirichlet();
}

inline int run_nonlinear(Context& ctx) {
  const auto& c = ctx.config;
  const auto& s = c.nonlinear;
  NonlinearProblem p;
  p.V = make_potential(c);
  p.F = make_nonlinearity(c);
  p.n = c.n;
  p.alpha = c.alpha;
  p.l_max = c.l_max;
  p.dtau = s.dtau;
  p.beta = c.beta;
  p.boundary = boundary_of(s.boundary);
  std::optional<ManufacturedProblem> mp;
  if (!s.manufactured.empty()) {
    mp = manufactured_problem(s.manufactured, c.n, c.l_max);
    p.V = mp->V;
    p.F = mp->F;
  }
  PicardOptions po;
  po.tol = s.tol;
  po.max_iter = s.max_iter;

  SolutionTrajectory sol;
  double sigma_min = 1.0;
  if (s.problem == "ball") {
    p.T = s.T;
    const DichotomyTable table = build_ball_table(p, s.tau_min);
    BoundaryOptions bo;
    bo.picard = po;
    const BoundarySolution bs = solve_boundary_condition(p, table, bo);
    sol = bs.trajectory;
    sigma_min = bs.sigma_min;
    ctx.note("nonlinear: ball of radius " + num(s.T) + ", boundary " + p.boundary.name() + ", tau in [" +
             num(table.tau_lo()) + ", " + num(table.tau_hi()) + "]");
  } else {
    p.T = std::numeric_limits<double>::infinity();
    p.boundary = BoundarySubspace::whole();
    const auto [minus, plus] = build_whole_space_tables(p, s.tau_match, s.tau_min, s.tau_end);
    MatchOptions mo;
    mo.picard = po;
    sol = match_whole_space(p, minus, plus, mo);
    ctx.note("nonlinear: whole space, tau in [" + num(minus.tau_lo()) + ", " + num(plus.tau_hi()) + "], matched at " +
             num(s.tau_match));
  }
  write_trajectory(ctx, "nonlinear_trajectory.csv", sol.states);
  write_iteration_log(ctx, sol, sigma_min);

  ctx.note("converged in " + std::to_string(sol.iterations) + " iterations; fixed-point defect " +
           fmt("%.3e", sol.defect) + ", tail bound " + fmt("%.3e", sol.tail_bound) + ", sampled Lipschitz constant " +
           fmt("%.3e", sol.lipschitz));
  if (s.problem == "ball") ctx.note("boundary defect " + fmt("%.3e", sol.boundary_defect) + ", sigma_min " + fmt("%.3e", sigma_min));
  else ctx.note("match defect " + fmt("%.3e", sol.match_defect));

  PlotSpec plot{"nonlinear solution coefficients", "tau", "Re f~ coefficient", coefficient_fan(sol.states, false), {}};
  if (mp) {
    double worst = 0.0;
    Series ex{"exact", {}, {}, true};
    for (const auto& st : sol.states) {
      const RescaledState e = mp->exact.rescaled(st.tau, c.alpha);
      worst = std::max(worst, state_norm(st.f - e.f, st.g - e.g));
      ex.x.push_back(st.tau);
      ex.y.push_back(e.f.coeff(0).real());
    }
    ctx.note("manufactured '" + s.manufactured + "': sup defect against the exact traces " + fmt("%.3e", worst));
    plot.series.push_back(std::move(ex));
  }
  write_svg(ctx.dir / "nonlinear_fan.svg", plot);
  return 0;
}

inline int run_liouville(Context& ctx) {
  const auto& c = ctx.config;
  const auto& L = c.liouville;
  NonlinearProblem p;
  p.V = make_potential(c);
  p.F = make_nonlinearity(c);
  p.n = c.n;
  p.alpha = c.alpha;
  p.l_max = c.l_max;
  p.dtau = L.dtau;
  p.beta = c.beta;
  p.T = std::numeric_limits<double>::infinity();
  p.boundary = BoundarySubspace::whole();
  const auto [minus, plus] = build_whole_space_tables(p);

  std::mt19937_64 rng(L.seed);
  std::normal_distribution<double> nd(0.0, L.amplitude);
  auto random_states = [&](const DichotomyTable& t, double& size) {
    std::vector<RescaledState> out;
    for (double tau : t.grid()) {
      Eigen::VectorXcd v(t.op().state_dim());
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = nd(rng);
      out.push_back(t.as_state(v, tau));
      size = std::max(size, state_norm(out.back(), c.beta));
    }
    return out;
  };
  CsvWriter csv(ctx.dir / "liouville.csv", ctx.hash,
                {"trial", "iterations", "initial_max_norm", "final_max_norm", "match_defect"});
  Series fin{"final", {}, {}, true};
  double worst = 0.0;
  for (int k = 0; k < L.trials; ++k) {
    double size = 0.0;
    const auto im = random_states(minus, size), ip = random_states(plus, size);
    MatchOptions mo;
    mo.initial_minus = &im;
    mo.initial_plus = &ip;
    const SolutionTrajectory sol = match_whole_space(p, minus, plus, mo);
    double norm = 0.0;
    for (const auto& s : sol.states) norm = std::max(norm, state_norm(s, c.beta));
    worst = std::max(worst, norm);
    csv.row({static_cast<double>(k), static_cast<double>(sol.iterations), size, norm, sol.match_defect});
    fin.x.push_back(k);
    fin.y.push_back(std::log10(std::max(norm, 1e-300)));
  }
  csv.close();
  ctx.note("liouville-demo: " + std::to_string(L.trials) + " random starts, max final trajectory norm " + fmt("%.3e", worst));
  write_svg(ctx.dir / "liouville.svg", {"bounded whole-line solutions", "trial", "log10 max norm", {fin}, {}});
  return 0;
}

inline int run_verify(Context& ctx) {
  const auto results = acceptance::run_all(ctx.config.verify.only, ctx.config.threads);
  int passed = 0;
  for (const auto& r : results) {
    ctx.note(acceptance::format_line(r));
    passed += r.pass;
  }
  ctx.note(std::to_string(passed) + " of " + std::to_string(results.size()) + " criteria passed");
  return passed == static_cast<int>(results.size()) ? 0 : 1;
}

}  // namespace detail

/// Runs the configured command, writing artifacts into config.out_dir.
/// Library errors propagate as raddich::Error; see exit_code.
inline int run(const RunConfig& config, std::ostream& out = std::cout) {
  detail::Context ctx{config, config.out_dir, hex(config_hash(config)), out, {}};
  std::error_code ec;
  std::filesystem::create_directories(ctx.dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create output directory " + ctx.dir.string() + ": " + ec.message());
  int status = 0;
  switch (config.command) {
    case Command::evolve: status = detail::run_evolve(ctx); break;
    case Command::dichotomy: status = detail::run_dichotomy(ctx); break;
    case Command::eigen_scan: status = detail::run_eigen_scan(ctx); break;
    case Command::nonlinear: status = detail::run_nonlinear(ctx); break;
    case Command::liouville_demo: status = detail::run_liouville(ctx); break;
    case Command::verify: status = detail::run_verify(ctx); break;
  }
  ctx.finish();
  return status;
}

/// run() with errors reported on `err` and mapped to exit codes.
inline int run_guarded(const RunConfig& config, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  try {
    return run(config, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace raddich::cli
