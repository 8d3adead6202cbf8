#pragma once

// CSV and static SVG emission for the command-line tool.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "raddich/errors.hpp"

namespace raddich::cli {

/// Shortest round-trip decimal form of a double.
inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) fail(ErrorKind::io, "cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::io, "cannot open " + path.string() + " for writing");
  return os;
}

/// CSV with a leading comment line carrying the config hash and a header row.
class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::string& hash, const std::vector<std::string>& columns)
      : path_(path), os_(open_output(path)), cols_(columns.size()) {
    os_ << "# config_hash=" << hash << '\n';
    for (std::size_t i = 0; i < columns.size(); ++i) os_ << (i ? "," : "") << columns[i];
    os_ << '\n';
  }

  void row(const std::vector<double>& values) {
    require(values.size() == cols_, "CsvWriter: row width does not match the header");
    for (std::size_t i = 0; i < values.size(); ++i) os_ << (i ? "," : "") << num(values[i]);
    os_ << '\n';
  }

  void close() {
    os_.flush();
    if (!os_) fail(ErrorKind::io, "write to " + path_.string() + " failed");
  }

  ~CsvWriter() { os_.flush(); }

 private:
  std::filesystem::path path_;
  std::ofstream os_;
  std::size_t cols_;
};

struct Series {
  std::string name;
  std::vector<double> x, y;
  bool markers = false;  ///< draw points instead of a polyline
};

struct PlotSpec {
  std::string title, xlabel, ylabel;
  std::vector<Series> series;
  std::vector<double> vlines;  ///< vertical reference lines
};

namespace detail {

// Ticks at 1, 2 or 5 times a power of ten covering [lo, hi].
inline std::vector<double> nice_ticks(double lo, double hi, int target = 6) {
  if (!(hi > lo)) return {lo};
  const double raw = (hi - lo) / target;
  const double p = std::pow(10.0, std::floor(std::log10(raw)));
  double step = p;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * p >= raw) {
      step = m * p;
      break;
    }
  std::vector<double> out;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  return out;
}

inline std::string esc(const std::string& s) {
  std::string o;
  for (char c : s) {
    if (c == '<') o += "&lt;";
    else if (c == '>') o += "&gt;";
    else if (c == '&') o += "&amp;";
    else o += c;
  }
  return o;
}

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace detail

/// SVG 1.1 line plot with a fixed 640 x 400 viewBox.
inline void write_svg(const std::filesystem::path& path, const PlotSpec& plot) {
  constexpr double W = 640, H = 400, L = 70, R = 20, T = 40, B = 50;
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo, ylo = xlo, yhi = -xlo;
  for (const auto& s : plot.series)
    for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i]);
      yhi = std::max(yhi, s.y[i]);
    }
  if (!std::isfinite(xlo)) xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  if (xhi == xlo) xhi = xlo + 1;
  if (yhi == ylo) yhi = ylo + 1, ylo -= 1;
  const double pad = 0.05 * (yhi - ylo);
  ylo -= pad;
  yhi += pad;
  auto X = [&](double x) { return L + (x - xlo) / (xhi - xlo) * (W - L - R); };
  auto Y = [&](double y) { return H - B - (y - ylo) / (yhi - ylo) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"};

  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"0 0 640 400\" width=\"640\" height=\"400\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"640\" height=\"400\" fill=\"white\"/>\n"
     << "<text x=\"320\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
     << detail::esc(plot.title) << "</text>\n"
     << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
     << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (double t : detail::nice_ticks(xlo, xhi)) {
    os << "<line x1=\"" << X(t) << "\" y1=\"" << H - B << "\" x2=\"" << X(t) << "\" y2=\"" << H - B + 5
       << "\" stroke=\"black\"/>\n<text x=\"" << X(t) << "\" y=\"" << H - B + 18
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << detail::fmt(t) << "</text>\n";
  }
  for (double t : detail::nice_ticks(ylo, yhi)) {
    os << "<line x1=\"" << L - 5 << "\" y1=\"" << Y(t) << "\" x2=\"" << L << "\" y2=\"" << Y(t)
       << "\" stroke=\"black\"/>\n<text x=\"" << L - 8 << "\" y=\"" << Y(t) + 4
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << detail::fmt(t) << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << detail::esc(plot.xlabel)
     << "</text>\n<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << (T + H - B) / 2 << ")\" font-family=\"sans-serif\" font-size=\"12\">" << detail::esc(plot.ylabel) << "</text>\n";
  if (ylo < 0.0 && yhi > 0.0)
    os << "<line x1=\"" << L << "\" y1=\"" << Y(0) << "\" x2=\"" << W - R << "\" y2=\"" << Y(0)
       << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
  for (double v : plot.vlines)
    if (v >= xlo && v <= xhi)
      os << "<line x1=\"" << X(v) << "\" y1=\"" << T << "\" x2=\"" << X(v) << "\" y2=\"" << H - B
         << "\" stroke=\"#bbb\" stroke-dasharray=\"2 3\"/>\n";
  for (std::size_t k = 0; k < plot.series.size(); ++k) {
    const auto& s = plot.series[k];
    const char* col = colors[k % 8];
    if (s.markers) {
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
        if (std::isfinite(s.x[i]) && std::isfinite(s.y[i]))
          os << "<circle cx=\"" << X(s.x[i]) << "\" cy=\"" << Y(s.y[i]) << "\" r=\"3\" fill=\"" << col << "\"/>\n";
    } else {
      os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.3\" points=\"";
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i)
        if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) os << X(s.x[i]) << ',' << Y(s.y[i]) << ' ';
      os << "\"/>\n";
    }
    if (plot.series.size() > 1 && k < 8)
      os << "<text x=\"" << W - R - 8 << "\" y=\"" << T + 16 + 14 * static_cast<double>(k)
         << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" << col << "\">"
         << detail::esc(s.name) << "</text>\n";
  }
  os << "</svg>\n";
  std::ofstream f = open_output(path);
  f << os.str();
  f.flush();
  if (!f) fail(ErrorKind::io, "write to " + path.string() + " failed");
}

}  // namespace raddich::cli
