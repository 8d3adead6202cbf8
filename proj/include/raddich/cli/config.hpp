#pragma once

// JSON run configuration for the command-line tool: parsing, validation and
// construction of the potential and nonlinearity objects.

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "raddich/errors.hpp"
#include "raddich/nonlinearity.hpp"
#include "raddich/oracles.hpp"
#include "raddich/potential.hpp"
#include "raddich/spectral.hpp"

namespace raddich::cli {

using nlohmann::json;

enum class Command { evolve, dichotomy, eigen_scan, nonlinear, liouville_demo, verify };

inline const std::map<std::string, Command>& command_names() {
  static const std::map<std::string, Command> m{{"evolve", Command::evolve},
                                                {"dichotomy", Command::dichotomy},
                                                {"eigen-scan", Command::eigen_scan},
                                                {"nonlinear", Command::nonlinear},
                                                {"liouville-demo", Command::liouville_demo},
                                                {"verify", Command::verify}};
  return m;
}

inline std::string to_string(Command c) {
  for (const auto& [name, cmd] : command_names())
    if (cmd == c) return name;
  return "?";
}

struct ModeValue {
  ModeIndex mode;
  double f = 0.0;
  double g = 0.0;
};

struct PotentialConfig {
  std::string kind = "zero";  ///< zero | constant | polynomial | table | expansion
  double value = 0.0;
  std::vector<double> coeffs;
  std::vector<double> t, v;
  std::vector<PotentialSpec::ExpansionTerm> terms;
  double shift = 0.0;
};

struct NonlinearityConfig {
  std::string kind = "zero";  ///< zero | power | polynomial
  double coeff = 1.0;
  int exponent = 3;
  std::vector<double> coeffs;  ///< polynomial in u, increasing degree
  double validity = std::numeric_limits<double>::infinity();
};

struct EvolveConfig {
  double t0 = 0.5, t1 = 2.0;
  int samples = 101;
  std::string initial = "harmonic";  ///< harmonic | modes
  ModeIndex mode{1, 0};
  std::string branch = "growing";
  std::vector<ModeValue> modes;
  double rtol = 1e-12, atol = 1e-15;
};

struct DichotomyConfig {
  std::string side = "inner";
  double tau_max = 0.0;
  std::optional<double> tau_min;
  double tau_start = 0.0;
  std::optional<double> tau_end;
  double dtau = 0.05;
  int samples = 50;
  bool dump_table = true;
};

struct EigenScanConfig {
  double t = 1.0;
  double lambda_lo = 1.0, lambda_hi = 35.0;
  int steps = 68;
  double refine_tol = 1e-9;
  double intersection_tol = 1e-6;
  std::string boundary = "dirichlet";
  std::optional<double> tau_min;
};

struct NonlinearConfig {
  std::string problem = "ball";  ///< ball | whole
  std::string manufactured;       ///< optional manufactured problem name
  double T = 1.0;
  std::string boundary = "dirichlet";
  std::optional<double> tau_min;
  std::optional<double> tau_end;
  double tau_match = 0.0;
  double dtau = 0.05;
  double tol = 1e-10;
  int max_iter = 60;
};

struct LiouvilleConfig {
  int trials = 20;
  std::uint64_t seed = 1;
  double amplitude = 1.0;
  double dtau = 0.05;
};

struct VerifyConfig {
  std::vector<int> only;  ///< subset of criteria to run; all when empty
};

struct RunConfig {
  Command command = Command::verify;
  int n = 3;
  int N = 1;
  double alpha = 0.5;
  double beta = 0.0;
  int l_max = 4;
  PotentialConfig potential;
  NonlinearityConfig nonlinearity;
  EvolveConfig evolve;
  DichotomyConfig dichotomy;
  EigenScanConfig eigen_scan;
  NonlinearConfig nonlinear;
  LiouvilleConfig liouville;
  VerifyConfig verify;
  std::string out_dir = "out";
  int threads = 1;
  json source;  ///< parsed document, used for the config hash
};

// -- parsing ----------------------------------------------------------------------

namespace detail {

inline std::pair<std::size_t, std::size_t> line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

class Reader {
 public:
  explicit Reader(std::vector<std::string>& errors) : errors_(errors) {}

  void error(const std::string& path, const std::string& what) { errors_.push_back(path + ": " + what); }

  void allow(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) {
      error(path.empty() ? "<root>" : path, "expected an object");
      return;
    }
    const std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!ok.count(it.key())) error(join(path, it.key()), "unknown key");
  }

  template <class T>
  void read(const json& obj, const std::string& path, const char* key, T& out) {
    if (!obj.is_object() || !obj.contains(key)) return;
    try {
      out = obj.at(key).get<T>();
    } catch (const json::exception&) {
      error(join(path, key), std::string("expected ") + type_name<T>());
    }
  }

  template <class T>
  void read(const json& obj, const std::string& path, const char* key, std::optional<T>& out) {
    if (!obj.is_object() || !obj.contains(key) || obj.at(key).is_null()) return;
    T v{};
    read(obj, path, key, v);
    out = v;
  }

  static std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

 private:
  template <class T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, bool>) return "a boolean";
    else if constexpr (std::is_integral_v<T>) return "an integer";
    else if constexpr (std::is_floating_point_v<T>) return "a number";
    else if constexpr (std::is_same_v<T, std::string>) return "a string";
    else return "an array of numbers";
  }

  std::vector<std::string>& errors_;
};

inline void read_mode(Reader& r, const json& j, const std::string& path, ModeIndex& m) {
  r.read(j, path, "l", m.l);
  r.read(j, path, "m", m.m);
}

inline void read_potential(Reader& r, const json& j, PotentialConfig& p) {
  const std::string path = "potential";
  r.allow(j, path, {"kind", "value", "coeffs", "t", "v", "terms", "shift"});
  r.read(j, path, "kind", p.kind);
  r.read(j, path, "value", p.value);
  r.read(j, path, "coeffs", p.coeffs);
  r.read(j, path, "t", p.t);
  r.read(j, path, "v", p.v);
  r.read(j, path, "shift", p.shift);
  if (j.contains("terms")) {
    if (!j.at("terms").is_array()) {
      r.error("potential.terms", "expected an array");
    } else {
      for (std::size_t i = 0; i < j.at("terms").size(); ++i) {
        const json& tj = j.at("terms")[i];
        const std::string tp = "potential.terms[" + std::to_string(i) + "]";
        r.allow(tj, tp, {"l", "m", "poly"});
        PotentialSpec::ExpansionTerm term;
        read_mode(r, tj, tp, term.mode);
        r.read(tj, tp, "poly", term.poly);
        p.terms.push_back(term);
      }
    }
  }
}

inline void read_nonlinearity(Reader& r, const json& j, NonlinearityConfig& F) {
  const std::string path = "nonlinearity";
  r.allow(j, path, {"kind", "coeff", "exponent", "coeffs", "validity"});
  r.read(j, path, "kind", F.kind);
  r.read(j, path, "coeff", F.coeff);
  r.read(j, path, "exponent", F.exponent);
  r.read(j, path, "coeffs", F.coeffs);
  r.read(j, path, "validity", F.validity);
}

inline void read_sections(Reader& r, const json& doc, RunConfig& c) {
  if (doc.contains("evolve")) {
    const json& j = doc.at("evolve");
    r.allow(j, "evolve", {"t0", "t1", "samples", "initial", "mode", "branch", "modes", "rtol", "atol"});
    auto& e = c.evolve;
    r.read(j, "evolve", "t0", e.t0);
    r.read(j, "evolve", "t1", e.t1);
    r.read(j, "evolve", "samples", e.samples);
    r.read(j, "evolve", "initial", e.initial);
    r.read(j, "evolve", "branch", e.branch);
    r.read(j, "evolve", "rtol", e.rtol);
    r.read(j, "evolve", "atol", e.atol);
    if (j.is_object() && j.contains("mode")) {
      r.allow(j.at("mode"), "evolve.mode", {"l", "m"});
      read_mode(r, j.at("mode"), "evolve.mode", e.mode);
    }
    if (j.is_object() && j.contains("modes")) {
      if (!j.at("modes").is_array()) {
        r.error("evolve.modes", "expected an array");
      } else {
        for (std::size_t i = 0; i < j.at("modes").size(); ++i) {
          const json& mj = j.at("modes")[i];
          const std::string mp = "evolve.modes[" + std::to_string(i) + "]";
          r.allow(mj, mp, {"l", "m", "f", "g"});
          ModeValue mv;
          read_mode(r, mj, mp, mv.mode);
          r.read(mj, mp, "f", mv.f);
          r.read(mj, mp, "g", mv.g);
          e.modes.push_back(mv);
        }
      }
    }
  }
  if (doc.contains("dichotomy")) {
    const json& j = doc.at("dichotomy");
    r.allow(j, "dichotomy", {"side", "tau_max", "tau_min", "tau_start", "tau_end", "dtau", "samples", "dump_table"});
    auto& d = c.dichotomy;
    r.read(j, "dichotomy", "side", d.side);
    r.read(j, "dichotomy", "tau_max", d.tau_max);
    r.read(j, "dichotomy", "tau_min", d.tau_min);
    r.read(j, "dichotomy", "tau_start", d.tau_start);
    r.read(j, "dichotomy", "tau_end", d.tau_end);
    r.read(j, "dichotomy", "dtau", d.dtau);
    r.read(j, "dichotomy", "samples", d.samples);
    r.read(j, "dichotomy", "dump_table", d.dump_table);
  }
  if (doc.contains("eigen_scan")) {
    const json& j = doc.at("eigen_scan");
    r.allow(j, "eigen_scan",
            {"t", "lambda_lo", "lambda_hi", "steps", "refine_tol", "intersection_tol", "boundary", "tau_min"});
    auto& s = c.eigen_scan;
    r.read(j, "eigen_scan", "t", s.t);
    r.read(j, "eigen_scan", "lambda_lo", s.lambda_lo);
    r.read(j, "eigen_scan", "lambda_hi", s.lambda_hi);
    r.read(j, "eigen_scan", "steps", s.steps);
    r.read(j, "eigen_scan", "refine_tol", s.refine_tol);
    r.read(j, "eigen_scan", "intersection_tol", s.intersection_tol);
    r.read(j, "eigen_scan", "boundary", s.boundary);
    r.read(j, "eigen_scan", "tau_min", s.tau_min);
  }
  if (doc.contains("nonlinear")) {
    const json& j = doc.at("nonlinear");
    r.allow(j, "nonlinear",
            {"problem", "manufactured", "T", "boundary", "tau_min", "tau_end", "tau_match", "dtau", "tol", "max_iter"});
    auto& s = c.nonlinear;
    r.read(j, "nonlinear", "problem", s.problem);
    r.read(j, "nonlinear", "manufactured", s.manufactured);
    r.read(j, "nonlinear", "T", s.T);
    r.read(j, "nonlinear", "boundary", s.boundary);
    r.read(j, "nonlinear", "tau_min", s.tau_min);
    r.read(j, "nonlinear", "tau_end", s.tau_end);
    r.read(j, "nonlinear", "tau_match", s.tau_match);
    r.read(j, "nonlinear", "dtau", s.dtau);
    r.read(j, "nonlinear", "tol", s.tol);
    r.read(j, "nonlinear", "max_iter", s.max_iter);
  }
  if (doc.contains("liouville")) {
    const json& j = doc.at("liouville");
    r.allow(j, "liouville", {"trials", "seed", "amplitude", "dtau"});
    r.read(j, "liouville", "trials", c.liouville.trials);
    r.read(j, "liouville", "seed", c.liouville.seed);
    r.read(j, "liouville", "amplitude", c.liouville.amplitude);
    r.read(j, "liouville", "dtau", c.liouville.dtau);
  }
  if (doc.contains("verify")) {
    const json& j = doc.at("verify");
    r.allow(j, "verify", {"only"});
    r.read(j, "verify", "only", c.verify.only);
  }
}

inline bool known_boundary(const std::string& b) { return b == "dirichlet" || b == "neumann" || b == "whole"; }

inline void validate(const RunConfig& c, std::vector<std::string>& errs) {
  auto bad = [&](const std::string& path, const std::string& what) { errs.push_back(path + ": " + what); };
  if (c.n != 2 && c.n != 3) bad("n", "dimension must be 2 or 3");
  if (c.N < 1) bad("N", "value dimension must be >= 1");
  if (c.l_max < 0) bad("l_max", "must be >= 0");
  if (!(c.beta >= 0.0 && c.beta < 1.0)) bad("beta", "must lie in [0, 1)");
  if (!std::isfinite(c.alpha)) {
    bad("alpha", "must be finite");
  } else if ((c.n == 2 || c.n == 3) && validate_alpha(c.n, c.alpha) <= 1e-12) {
    bad("alpha", "-alpha lies in the shift set Sigma(" + std::to_string(c.n) +
                     ") = {k <= 2 - n} u {k >= 0}, so A(alpha) has a zero eigenvalue");
  }
  if (c.threads < 1) bad("threads", "must be >= 1");

  const auto& p = c.potential;
  static const std::set<std::string> pk{"zero", "constant", "polynomial", "table", "expansion"};
  if (!pk.count(p.kind)) bad("potential.kind", "unknown kind '" + p.kind + "'");
  if (p.kind == "polynomial" && p.coeffs.empty()) bad("potential.coeffs", "polynomial needs coefficients");
  if (p.kind == "table") {
    if (p.t.size() < 2 || p.t.size() != p.v.size()) bad("potential.t", "table needs >= 2 samples with matching v");
    for (std::size_t i = 1; i < p.t.size(); ++i)
      if (!(p.t[i] > p.t[i - 1])) {
        bad("potential.t", "sample radii must be strictly increasing");
        break;
      }
  }
  if (p.kind == "expansion") {
    if (p.terms.empty()) bad("potential.terms", "expansion needs terms");
    for (const auto& t : p.terms) {
      if (t.mode.l < 0 || std::abs(t.mode.m) > t.mode.l) bad("potential.terms", "invalid (l, m)");
      if (t.poly.empty()) bad("potential.terms", "empty polynomial");
    }
  }
  if (!std::isfinite(p.shift)) bad("potential.shift", "must be finite");

  const auto& F = c.nonlinearity;
  if (F.kind != "zero" && F.kind != "power" && F.kind != "polynomial")
    bad("nonlinearity.kind", "unknown kind '" + F.kind + "'");
  if (F.kind == "power" && F.exponent < 2) bad("nonlinearity.exponent", "must be >= 2");
  if (F.kind == "polynomial" && F.coeffs.empty()) bad("nonlinearity.coeffs", "polynomial needs coefficients");
  if (c.N != 1 && (p.kind != "zero" || (F.kind != "zero" && F.kind != "power")))
    bad("N", "vector-valued fields are supported with potential 'zero' and nonlinearity 'zero' or 'power' only");

  switch (c.command) {
    case Command::evolve: {
      const auto& e = c.evolve;
      if (!(e.t0 > 0.0 && e.t1 > e.t0)) bad("evolve.t0", "need 0 < t0 < t1");
      if (e.samples < 7) bad("evolve.samples", "must be >= 7");
      if (e.initial != "harmonic" && e.initial != "modes") bad("evolve.initial", "must be 'harmonic' or 'modes'");
      if (e.initial == "harmonic") {
        if (e.branch != "growing" && e.branch != "decaying") bad("evolve.branch", "must be 'growing' or 'decaying'");
        if (e.mode.l < 0 || e.mode.l > c.l_max) bad("evolve.mode", "degree must lie in [0, l_max]");
      } else {
        if (e.modes.empty()) bad("evolve.modes", "need at least one mode");
        for (const auto& m : e.modes)
          if (m.mode.l < 0 || m.mode.l > c.l_max) bad("evolve.modes", "degree must lie in [0, l_max]");
      }
      if (!(e.rtol > 0.0 && e.atol > 0.0)) bad("evolve.rtol", "tolerances must be positive");
      break;
    }
    case Command::dichotomy: {
      const auto& d = c.dichotomy;
      if (d.side != "inner" && d.side != "outer") bad("dichotomy.side", "must be 'inner' or 'outer'");
      if (d.side == "inner" && d.tau_min && !(*d.tau_min < d.tau_max))
        bad("dichotomy.tau_min", "grid must be increasing (tau_min < tau_max)");
      if (d.side == "outer" && d.tau_end && !(*d.tau_end > d.tau_start))
        bad("dichotomy.tau_end", "grid must be increasing (tau_start < tau_end)");
      if (!(d.dtau > 0.0)) bad("dichotomy.dtau", "must be positive");
      if (d.samples < 2) bad("dichotomy.samples", "must be >= 2");
      break;
    }
    case Command::eigen_scan: {
      const auto& s = c.eigen_scan;
      if (!(s.t > 0.0)) bad("eigen_scan.t", "must be positive");
      if (!(s.lambda_hi > s.lambda_lo)) bad("eigen_scan.lambda_hi", "grid must be increasing");
      if (s.steps < 2) bad("eigen_scan.steps", "must be >= 2");
      if (!(s.refine_tol > 0.0)) bad("eigen_scan.refine_tol", "must be positive");
      if (!known_boundary(s.boundary) || s.boundary == "whole")
        bad("eigen_scan.boundary", "must be 'dirichlet' or 'neumann'");
      if (c.n == 2) bad("n", "the eigenvalue scan needs an alpha window, which is empty for n = 2");
      break;
    }
    case Command::nonlinear: {
      const auto& s = c.nonlinear;
      if (s.problem != "ball" && s.problem != "whole") bad("nonlinear.problem", "must be 'ball' or 'whole'");
      if (!s.manufactured.empty()) {
        const auto names = manufactured_names();
        if (std::find(names.begin(), names.end(), s.manufactured) == names.end())
          bad("nonlinear.manufactured", "unknown manufactured problem '" + s.manufactured + "'");
        if (c.N != 1) bad("nonlinear.manufactured", "manufactured problems are scalar, N must be 1");
      }
      if (s.problem == "ball" && !(s.T > 0.0 && std::isfinite(s.T))) bad("nonlinear.T", "must be finite and positive");
      if (!known_boundary(s.boundary)) bad("nonlinear.boundary", "must be 'dirichlet', 'neumann' or 'whole'");
      if (s.problem == "ball" && s.tau_min && !(*s.tau_min < std::log(s.T)))
        bad("nonlinear.tau_min", "grid must be increasing (tau_min < log T)");
      if (s.problem == "whole" && s.tau_min && !(*s.tau_min < s.tau_match))
        bad("nonlinear.tau_min", "grid must be increasing (tau_min < tau_match)");
      if (s.problem == "whole" && s.tau_end && !(*s.tau_end > s.tau_match))
        bad("nonlinear.tau_end", "grid must be increasing (tau_match < tau_end)");
      if (!(s.dtau > 0.0)) bad("nonlinear.dtau", "must be positive");
      if (!(s.tol > 0.0)) bad("nonlinear.tol", "must be positive");
      if (s.max_iter < 1) bad("nonlinear.max_iter", "must be >= 1");
      break;
    }
    case Command::liouville_demo:
      if (c.liouville.trials < 1) bad("liouville.trials", "must be >= 1");
      if (!(c.liouville.dtau > 0.0)) bad("liouville.dtau", "must be positive");
      break;
    case Command::verify:
      for (int id : c.verify.only)
        if (id < 1 || id > 10) bad("verify.only", "criteria are numbered 1 to 10");
      break;
  }
}

}  // namespace detail

/// Parses and validates a JSON run configuration. Syntax errors report line
/// and column; validation collects every violated condition.
inline RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    std::string msg = e.what();
    // Drop the library's own "[json.exception...] parse error at line L, column C: " prefix.
    if (const auto col_at = msg.find("column "); col_at != std::string::npos) {
      if (const auto pos = msg.find(": ", col_at); pos != std::string::npos) msg = msg.substr(pos + 2);
    } else if (const auto pos = msg.find("] "); pos != std::string::npos) {
      msg = msg.substr(pos + 2);
    }
    fail(ErrorKind::config, "parse error at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + msg);
  }
  if (!doc.is_object()) fail(ErrorKind::config, "parse error at line 1, column 1: top level must be an object");
  if (!doc.contains("command")) fail(ErrorKind::config, "parse error: missing required key 'command'");

  std::vector<std::string> errs;
  detail::Reader r(errs);
  RunConfig c;
  c.source = doc;
  r.allow(doc, "", {"command", "n", "N", "alpha", "beta", "l_max", "potential", "nonlinearity", "evolve", "dichotomy",
                    "eigen_scan", "nonlinear", "liouville", "verify", "out_dir", "threads"});
  std::string cmd;
  r.read(doc, "", "command", cmd);
  const auto& names = command_names();
  if (auto it = names.find(cmd); it != names.end()) {
    c.command = it->second;
  } else {
    std::string list;
    for (const auto& [name, unused] : names) list += (list.empty() ? "" : ", ") + name;
    errs.push_back("command: unknown command '" + cmd + "' (expected one of " + list + ")");
  }
  r.read(doc, "", "n", c.n);
  r.read(doc, "", "N", c.N);
  r.read(doc, "", "alpha", c.alpha);
  r.read(doc, "", "beta", c.beta);
  r.read(doc, "", "l_max", c.l_max);
  r.read(doc, "", "out_dir", c.out_dir);
  r.read(doc, "", "threads", c.threads);
  if (doc.contains("potential")) detail::read_potential(r, doc.at("potential"), c.potential);
  if (doc.contains("nonlinearity")) detail::read_nonlinearity(r, doc.at("nonlinearity"), c.nonlinearity);
  detail::read_sections(r, doc, c);
  if (errs.empty()) detail::validate(c, errs);
  if (!errs.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errs) msg += "\n  - " + e;
    fail(ErrorKind::config, msg);
  }
  return c;
}

// -- construction -------------------------------------------------------------------

inline PotentialSpec make_potential(const RunConfig& c) {
  const auto& p = c.potential;
  PotentialSpec V = PotentialSpec::zero(c.N);
  if (p.kind == "constant") V = PotentialSpec::constant(p.value);
  else if (p.kind == "polynomial") V = PotentialSpec::radial_polynomial(p.coeffs);
  else if (p.kind == "table") V = PotentialSpec::radial_table(p.t, p.v);
  else if (p.kind == "expansion") V = PotentialSpec::harmonic_expansion(c.n, p.terms);
  return p.shift != 0.0 ? V.shifted(p.shift) : V;
}

inline Nonlinearity make_nonlinearity(const RunConfig& c) {
  const auto& F = c.nonlinearity;
  Nonlinearity out = Nonlinearity::zero(c.N);
  if (F.kind == "power") {
    out = Nonlinearity::power(F.coeff, F.exponent, c.N);
  } else if (F.kind == "polynomial") {
    const std::vector<double> a = F.coeffs;
    out = Nonlinearity::scalar(
        [a](double, const SpherePoint&, double u) {
          double s = 0.0;
          for (auto it = a.rbegin(); it != a.rend(); ++it) s = s * u + *it;
          return s;
        },
        "polynomial in u", a[0] != 0.0, static_cast<int>(a.size()) - 1);
  }
  out.validity = F.validity;
  return out;
}

/// FNV-1a 64-bit hash of the canonical (key-sorted, compact) config dump.
inline std::uint64_t config_hash(const RunConfig& c) {
  const std::string s = c.source.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace raddich::cli
