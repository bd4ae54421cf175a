// io.hpp -- run configuration, CSV/JSON/SVG emission, snapshot dumps, and the
// run manifest.  Everything here is deterministic for a fixed input: numbers
// are printed with snprintf %.17g (17 significant digits, '.' separator) and
// rows end with '\n', so identical results produce byte-identical files.

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "rabi/experiments.hpp"

namespace rabi {

inline std::string format_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns)
      : path_(path) {
    out_.open(path, std::ios::binary);
    if (!out_) throw std::runtime_error("cannot open " + path.string());
    for (size_t i = 0; i < columns.size(); ++i) {
      if (i) out_ << ',';
      out_ << columns[i];
    }
    out_ << '\n';
  }

  void row(const std::vector<double>& values) {
    for (size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ',';
      out_ << format_g17(values[i]);
    }
    out_ << '\n';
  }

  void row(const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << csv_escape(cells[i]);
    }
    out_ << '\n';
  }

  void close() {
    out_.close();
    if (out_.fail()) throw std::runtime_error("write failed for " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

// ---------------------------------------------------------------------------
// Binary snapshot dump: uint64 dimension, uint64 sample count, then per sample
// `dimension` pairs of little-endian doubles (re, im).

static_assert(std::endian::native == std::endian::little,
              "snapshot dump assumes a little-endian host");

inline void write_snapshots(const std::filesystem::path& path, const Trajectory& traj) {
  if (traj.snapshots.empty())
    throw std::invalid_argument("write_snapshots: trajectory has no snapshots");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  const uint64_t dim = static_cast<uint64_t>(traj.snapshots.front().size());
  const uint64_t count = static_cast<uint64_t>(traj.snapshots.size());
  out.write(reinterpret_cast<const char*>(&dim), sizeof dim);
  out.write(reinterpret_cast<const char*>(&count), sizeof count);
  for (const auto& snap : traj.snapshots) {
    if (static_cast<uint64_t>(snap.size()) != dim)
      throw std::invalid_argument("write_snapshots: mixed snapshot dimensions");
    out.write(reinterpret_cast<const char*>(snap.data()),
              static_cast<std::streamsize>(dim * sizeof(Complex)));
  }
  out.close();
  if (out.fail()) throw std::runtime_error("write failed for " + path.string());
}

inline std::vector<Eigen::VectorXcd> read_snapshots(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  uint64_t dim = 0, count = 0;
  in.read(reinterpret_cast<char*>(&dim), sizeof dim);
  in.read(reinterpret_cast<char*>(&count), sizeof count);
  std::vector<Eigen::VectorXcd> snaps(count);
  for (auto& snap : snaps) {
    snap.resize(static_cast<Eigen::Index>(dim));
    in.read(reinterpret_cast<char*>(snap.data()),
            static_cast<std::streamsize>(dim * sizeof(Complex)));
  }
  if (in.fail()) throw std::runtime_error("truncated snapshot file " + path.string());
  return snaps;
}

// ---------------------------------------------------------------------------
// Minimal deterministic SVG charts

namespace svg {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

namespace detail {

inline const char* kPalette[10] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                                   "#17becf", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22"};

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&')
      out += "&amp;";
    else if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else
      out += c;
  }
  return out;
}

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string label_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct Axis {
  double lo = 0.0, hi = 1.0;
  bool log = false;
  double pix_lo = 0.0, pix_hi = 1.0;

  double map(double v) const {
    const double a = log ? std::log10(lo) : lo;
    const double b = log ? std::log10(hi) : hi;
    const double t = ((log ? std::log10(v) : v) - a) / (b - a);
    return pix_lo + t * (pix_hi - pix_lo);
  }
};

inline void expand_range(double& lo, double& hi, bool log) {
  if (!(lo < hi)) {
    if (log) {
      lo = lo / 2.0;
      hi = hi * 2.0;
    } else {
      lo -= 1.0;
      hi += 1.0;
    }
  }
}

inline std::vector<double> linear_ticks(double lo, double hi) {
  const double raw = (hi - lo) / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double norm = raw / mag;
  const double step = mag * (norm < 1.5 ? 1.0 : norm < 3.5 ? 2.0 : norm < 7.5 ? 5.0 : 10.0);
  std::vector<double> ticks;
  for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * step; v += step)
    ticks.push_back(std::abs(v) < 1e-12 * step ? 0.0 : v);
  return ticks;
}

inline std::vector<double> log_ticks(double lo, double hi) {
  std::vector<double> ticks;
  const int d0 = static_cast<int>(std::floor(std::log10(lo)));
  const int d1 = static_cast<int>(std::ceil(std::log10(hi)));
  const bool dense = d1 - d0 <= 2;
  for (int d = d0; d <= d1; ++d)
    for (double m : dense ? std::vector<double>{1.0, 2.0, 5.0} : std::vector<double>{1.0}) {
      const double v = m * std::pow(10.0, d);
      if (v >= lo * (1 - 1e-12) && v <= hi * (1 + 1e-12)) ticks.push_back(v);
    }
  return ticks;
}

inline bool plottable(double v, bool log) { return std::isfinite(v) && (!log || v > 0.0); }

}  // namespace detail

// Polyline chart; NaN (or non-positive values on a log axis) break the line.
inline void write_line_chart(const std::filesystem::path& path, const std::string& title,
                             const std::string& x_label, const std::string& y_label,
                             const std::vector<Series>& series, bool log_x = false,
                             bool log_y = false) {
  using namespace detail;
  const double W = 880, H = 560, ml = 78, mr = 24, mt = 40, mb = 56;
  double xlo = 0, xhi = 0, ylo = 0, yhi = 0;
  bool any = false;
  for (const auto& s : series)
    for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!plottable(s.x[i], log_x) || !plottable(s.y[i], log_y)) continue;
      if (!any) {
        xlo = xhi = s.x[i];
        ylo = yhi = s.y[i];
        any = true;
      } else {
        xlo = std::min(xlo, s.x[i]);
        xhi = std::max(xhi, s.x[i]);
        ylo = std::min(ylo, s.y[i]);
        yhi = std::max(yhi, s.y[i]);
      }
    }
  if (!any) {
    xlo = ylo = log_x || log_y ? 0.1 : 0.0;
    xhi = yhi = 1.0;
  }
  expand_range(xlo, xhi, log_x);
  expand_range(ylo, yhi, log_y);
  Axis ax{xlo, xhi, log_x, ml, W - mr};
  Axis ay{ylo, yhi, log_y, H - mb, mt};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << num(W / 2) << "\" y=\"22\" font-family=\"monospace\" font-size=\"15\" "
         "text-anchor=\"middle\">"
      << escape(title) << "</text>\n";

  const auto xticks = log_x ? log_ticks(xlo, xhi) : linear_ticks(xlo, xhi);
  const auto yticks = log_y ? log_ticks(ylo, yhi) : linear_ticks(ylo, yhi);
  for (double v : xticks) {
    const double px = ax.map(v);
    out << "<line x1=\"" << num(px) << "\" y1=\"" << num(mt) << "\" x2=\"" << num(px)
        << "\" y2=\"" << num(H - mb) << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << num(px) << "\" y=\"" << num(H - mb + 18)
        << "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\">"
        << label_num(v) << "</text>\n";
  }
  for (double v : yticks) {
    const double py = ay.map(v);
    out << "<line x1=\"" << num(ml) << "\" y1=\"" << num(py) << "\" x2=\"" << num(W - mr)
        << "\" y2=\"" << num(py) << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << num(ml - 6) << "\" y=\"" << num(py + 4)
        << "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">" << label_num(v)
        << "</text>\n";
  }
  out << "<rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\"" << num(W - ml - mr)
      << "\" height=\"" << num(H - mt - mb)
      << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  out << "<text x=\"" << num((ml + W - mr) / 2) << "\" y=\"" << num(H - 12)
      << "\" font-family=\"monospace\" font-size=\"13\" text-anchor=\"middle\">"
      << escape(x_label) << "</text>\n";
  out << "<text x=\"18\" y=\"" << num((mt + H - mb) / 2)
      << "\" font-family=\"monospace\" font-size=\"13\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 18 "
      << num((mt + H - mb) / 2) << ")\">" << escape(y_label) << "</text>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % 10];
    std::string d;
    bool pen_down = false;
    for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
      if (!plottable(s.x[i], log_x) || !plottable(s.y[i], log_y)) {
        pen_down = false;
        continue;
      }
      d += pen_down ? " L " : " M ";
      d += num(ax.map(s.x[i])) + "," + num(ay.map(s.y[i]));
      pen_down = true;
    }
    if (!d.empty())
      out << "<path d=\"" << d << "\" fill=\"none\" stroke=\"" << color
          << "\" stroke-width=\"1.3\"/>\n";
  }
  if (series.size() <= 10) {
    for (size_t si = 0; si < series.size(); ++si) {
      const double ly = mt + 16 + 16.0 * si;
      out << "<line x1=\"" << num(W - mr - 150) << "\" y1=\"" << num(ly) << "\" x2=\""
          << num(W - mr - 126) << "\" y2=\"" << num(ly) << "\" stroke=\"" << kPalette[si % 10]
          << "\" stroke-width=\"2\"/>\n";
      out << "<text x=\"" << num(W - mr - 120) << "\" y=\"" << num(ly + 4)
          << "\" font-family=\"monospace\" font-size=\"11\">" << escape(series[si].label)
          << "</text>\n";
    }
  }
  out << "</svg>\n";
  out.close();
  if (out.fail()) throw std::runtime_error("write failed for " + path.string());
}

namespace detail {

inline std::string heat_color(double t) {
  // five-anchor dark-violet -> yellow ramp
  static const double anchors[5][3] = {{0.267, 0.005, 0.329},
                                       {0.229, 0.322, 0.545},
                                       {0.127, 0.566, 0.551},
                                       {0.369, 0.787, 0.382},
                                       {0.993, 0.906, 0.144}};
  t = std::clamp(t, 0.0, 1.0);
  const double seg = t * 4.0;
  const int i = std::min(3, static_cast<int>(seg));
  const double f = seg - i;
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x",
                static_cast<int>(255.0 * (anchors[i][0] + f * (anchors[i + 1][0] - anchors[i][0]))),
                static_cast<int>(255.0 * (anchors[i][1] + f * (anchors[i + 1][1] - anchors[i][1]))),
                static_cast<int>(255.0 * (anchors[i][2] + f * (anchors[i + 1][2] - anchors[i][2]))));
  return buf;
}

inline std::vector<double> cell_edges(const std::vector<double>& centers, bool log) {
  std::vector<double> c(centers);
  if (log)
    for (auto& v : c) v = std::log10(v);
  std::vector<double> e(c.size() + 1);
  if (c.size() == 1) {
    e[0] = c[0] - 0.5;
    e[1] = c[0] + 0.5;
  } else {
    e[0] = c[0] - (c[1] - c[0]) / 2.0;
    for (size_t i = 1; i < c.size(); ++i) e[i] = (c[i - 1] + c[i]) / 2.0;
    e[c.size()] = c.back() + (c.back() - c[c.size() - 2]) / 2.0;
  }
  return e;
}

}  // namespace detail

// Grid heatmap; values are row-major with x outer: values[ix * ys.size() + iy].
inline void write_heatmap(const std::filesystem::path& path, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<double>& xs, const std::vector<double>& ys,
                          const std::vector<double>& values, bool log_x = false) {
  using namespace detail;
  if (xs.empty() || ys.empty() || values.size() != xs.size() * ys.size())
    throw std::invalid_argument("write_heatmap: grid/value size mismatch");
  const double W = 880, H = 560, ml = 78, mr = 110, mt = 40, mb = 56;
  double vlo = 0, vhi = 1;
  bool any = false;
  for (double v : values)
    if (std::isfinite(v)) {
      if (!any) {
        vlo = vhi = v;
        any = true;
      } else {
        vlo = std::min(vlo, v);
        vhi = std::max(vhi, v);
      }
    }
  if (!(vlo < vhi)) vhi = vlo + 1.0;

  const auto xe = cell_edges(xs, log_x);
  const auto ye = cell_edges(ys, false);
  const double x0 = xe.front(), x1 = xe.back(), y0 = ye.front(), y1 = ye.back();
  auto px = [&](double v) { return ml + (v - x0) / (x1 - x0) * (W - ml - mr); };
  auto py = [&](double v) { return (H - mb) - (v - y0) / (y1 - y0) * (H - mt - mb); };

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
  out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << num(W / 2) << "\" y=\"22\" font-family=\"monospace\" font-size=\"15\" "
         "text-anchor=\"middle\">"
      << escape(title) << "</text>\n";
  for (size_t ix = 0; ix < xs.size(); ++ix)
    for (size_t iy = 0; iy < ys.size(); ++iy) {
      const double v = values[ix * ys.size() + iy];
      const std::string color =
          std::isfinite(v) ? heat_color((v - vlo) / (vhi - vlo)) : std::string("#bbbbbb");
      const double rx = px(xe[ix]), rw = px(xe[ix + 1]) - rx;
      const double ry = py(ye[iy + 1]), rh = py(ye[iy]) - ry;
      out << "<rect x=\"" << num(rx) << "\" y=\"" << num(ry) << "\" width=\"" << num(rw)
          << "\" height=\"" << num(rh) << "\" fill=\"" << color << "\"/>\n";
    }
  // axis tick labels on the cell centers closest to nice positions: use edges' range
  const auto xticks = log_x ? log_ticks(std::pow(10.0, x0), std::pow(10.0, x1))
                            : linear_ticks(x0, x1);
  for (double v : xticks) {
    const double p = px(log_x ? std::log10(v) : v);
    out << "<text x=\"" << num(p) << "\" y=\"" << num(H - mb + 18)
        << "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"middle\">"
        << label_num(v) << "</text>\n";
  }
  for (double v : linear_ticks(y0, y1)) {
    out << "<text x=\"" << num(ml - 6) << "\" y=\"" << num(py(v) + 4)
        << "\" font-family=\"monospace\" font-size=\"11\" text-anchor=\"end\">" << label_num(v)
        << "</text>\n";
  }
  out << "<rect x=\"" << num(ml) << "\" y=\"" << num(mt) << "\" width=\"" << num(W - ml - mr)
      << "\" height=\"" << num(H - mt - mb)
      << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
  out << "<text x=\"" << num((ml + W - mr) / 2) << "\" y=\"" << num(H - 12)
      << "\" font-family=\"monospace\" font-size=\"13\" text-anchor=\"middle\">"
      << escape(x_label) << "</text>\n";
  out << "<text x=\"18\" y=\"" << num((mt + H - mb) / 2)
      << "\" font-family=\"monospace\" font-size=\"13\" text-anchor=\"middle\" "
         "transform=\"rotate(-90 18 "
      << num((mt + H - mb) / 2) << ")\">" << escape(y_label) << "</text>\n";
  // color bar
  const double bx = W - mr + 26, bw = 16, by = mt, bh = H - mt - mb;
  for (int i = 0; i < 64; ++i) {
    const double t = (i + 0.5) / 64.0;
    out << "<rect x=\"" << num(bx) << "\" y=\"" << num(by + bh - (i + 1) * bh / 64.0)
        << "\" width=\"" << num(bw) << "\" height=\"" << num(bh / 64.0 + 0.5) << "\" fill=\""
        << heat_color(t) << "\"/>\n";
  }
  out << "<text x=\"" << num(bx + bw + 4) << "\" y=\"" << num(by + 10)
      << "\" font-family=\"monospace\" font-size=\"11\">" << label_num(vhi) << "</text>\n";
  out << "<text x=\"" << num(bx + bw + 4) << "\" y=\"" << num(by + bh)
      << "\" font-family=\"monospace\" font-size=\"11\">" << label_num(vlo) << "</text>\n";
  out << "</svg>\n";
  out.close();
  if (out.fail()) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace svg

// ---------------------------------------------------------------------------
// Run configuration

struct RunConfig {
  std::string subcommand = "figures";
  std::string output_dir = "out";
  // working point (evolve / metrics / bounds)
  double lambda = 0.2 / std::sqrt(10.0);
  double alpha = std::sqrt(10.0);
  std::string horizon = "3rev";  // "<k>rev", "<k>per", or a plain time
  std::string pair = "quantum";  // evolve: quantum | semiclassical
  // spectrum scan
  double spectrum_lambda_max = 0.5;
  int spectrum_lambda_count = 101;
  int spectrum_levels = 12;  // per parity sector
  int spectrum_n_max = 120;
  // splitting scan
  double delta = 0.05;
  int n_max_level = 60;
  int fit_min_n = 10;
  // sweep grids
  double lambda_min = 1e-3;
  double lambda_max = 0.3;
  int lambda_count = 24;
  double alpha_min = 1.0;
  double alpha_max = 30.0;
  int alpha_count = 24;
  std::vector<double> lambdas;  // explicit list; overrides the range when non-empty
  std::vector<double> A_values = {0.05, 0.1, 0.2, 0.3};
  double A = 0.2;
  int n_periods = 20;
  double horizon_cap = 3e5;
  // numerics
  double step_tol = 1e-9;
  int max_lab_dim = 4200;
  int samples_per_period = 64;
  int sweep_samples_per_period = 20;
  double omega_max_corr = 3.0;
  // emission
  bool csv = true;
  bool json = true;
  bool svg = true;
  bool snapshots = false;
  int workers = 0;
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"subcommand", c.subcommand},
                     {"output_dir", c.output_dir},
                     {"lambda", c.lambda},
                     {"alpha", c.alpha},
                     {"horizon", c.horizon},
                     {"pair", c.pair},
                     {"spectrum_lambda_max", c.spectrum_lambda_max},
                     {"spectrum_lambda_count", c.spectrum_lambda_count},
                     {"spectrum_levels", c.spectrum_levels},
                     {"spectrum_n_max", c.spectrum_n_max},
                     {"delta", c.delta},
                     {"n_max_level", c.n_max_level},
                     {"fit_min_n", c.fit_min_n},
                     {"lambda_min", c.lambda_min},
                     {"lambda_max", c.lambda_max},
                     {"lambda_count", c.lambda_count},
                     {"alpha_min", c.alpha_min},
                     {"alpha_max", c.alpha_max},
                     {"alpha_count", c.alpha_count},
                     {"lambdas", c.lambdas},
                     {"A_values", c.A_values},
                     {"A", c.A},
                     {"n_periods", c.n_periods},
                     {"horizon_cap", c.horizon_cap},
                     {"step_tol", c.step_tol},
                     {"max_lab_dim", c.max_lab_dim},
                     {"samples_per_period", c.samples_per_period},
                     {"sweep_samples_per_period", c.sweep_samples_per_period},
                     {"omega_max_corr", c.omega_max_corr},
                     {"csv", c.csv},
                     {"json", c.json},
                     {"svg", c.svg},
                     {"snapshots", c.snapshots},
                     {"workers", c.workers}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
  const RunConfig d;
  c.subcommand = j.value("subcommand", d.subcommand);
  c.output_dir = j.value("output_dir", d.output_dir);
  c.lambda = j.value("lambda", d.lambda);
  c.alpha = j.value("alpha", d.alpha);
  c.horizon = j.value("horizon", d.horizon);
  c.pair = j.value("pair", d.pair);
  c.spectrum_lambda_max = j.value("spectrum_lambda_max", d.spectrum_lambda_max);
  c.spectrum_lambda_count = j.value("spectrum_lambda_count", d.spectrum_lambda_count);
  c.spectrum_levels = j.value("spectrum_levels", d.spectrum_levels);
  c.spectrum_n_max = j.value("spectrum_n_max", d.spectrum_n_max);
  c.delta = j.value("delta", d.delta);
  c.n_max_level = j.value("n_max_level", d.n_max_level);
  c.fit_min_n = j.value("fit_min_n", d.fit_min_n);
  c.lambda_min = j.value("lambda_min", d.lambda_min);
  c.lambda_max = j.value("lambda_max", d.lambda_max);
  c.lambda_count = j.value("lambda_count", d.lambda_count);
  c.alpha_min = j.value("alpha_min", d.alpha_min);
  c.alpha_max = j.value("alpha_max", d.alpha_max);
  c.alpha_count = j.value("alpha_count", d.alpha_count);
  c.lambdas = j.value("lambdas", d.lambdas);
  c.A_values = j.value("A_values", d.A_values);
  c.A = j.value("A", d.A);
  c.n_periods = j.value("n_periods", d.n_periods);
  c.horizon_cap = j.value("horizon_cap", d.horizon_cap);
  c.step_tol = j.value("step_tol", d.step_tol);
  c.max_lab_dim = j.value("max_lab_dim", d.max_lab_dim);
  c.samples_per_period = j.value("samples_per_period", d.samples_per_period);
  c.sweep_samples_per_period = j.value("sweep_samples_per_period", d.sweep_samples_per_period);
  c.omega_max_corr = j.value("omega_max_corr", d.omega_max_corr);
  c.csv = j.value("csv", d.csv);
  c.json = j.value("json", d.json);
  c.svg = j.value("svg", d.svg);
  c.snapshots = j.value("snapshots", d.snapshots);
  c.workers = j.value("workers", d.workers);
}

inline std::string config_hash(const RunConfig& c) {
  const std::string s = nlohmann::json(c).dump();
  uint64_t h = 1469598103934665603ull;  // FNV-1a 64
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << j.dump(2) << '\n';
  out.close();
  if (out.fail()) throw std::runtime_error("write failed for " + path.string());
}

inline void write_manifest(const std::filesystem::path& dir, const RunConfig& cfg,
                           const std::vector<std::string>& outputs, double wall_seconds) {
  nlohmann::json m;
  m["config"] = cfg;
  m["config_hash"] = config_hash(cfg);
  m["versions"] = {{"rabisim", "1.0.0"},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." +
                                 std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"compiler", __VERSION__}};
  m["wall_time_seconds"] = wall_seconds;
  m["outputs"] = outputs;
  write_json_file(dir / "manifest.json", m);
}

// ---------------------------------------------------------------------------
// Result writers.  Each returns the list of file names written into dir.

inline std::vector<std::string> write_dynamics_outputs(const std::filesystem::path& dir,
                                                       const Trajectory& full,
                                                       const Trajectory& rwa, bool with_svg,
                                                       bool with_snapshots = false) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  CsvWriter csv(dir / "dynamics.csv", {"t", "p_excited_full", "p_excited_rwa"});
  for (int i = 0; i < full.grid.n_samples; ++i)
    csv.row(std::vector<double>{full.grid.time(i), full.excited_population[i],
                                rwa.excited_population[i]});
  csv.close();
  files.push_back("dynamics.csv");
  if (with_snapshots) {
    write_snapshots(dir / "snapshots_full.bin", full);
    write_snapshots(dir / "snapshots_rwa.bin", rwa);
    files.push_back("snapshots_full.bin");
    files.push_back("snapshots_rwa.bin");
  }
  if (with_svg) {
    std::vector<double> t(full.grid.n_samples);
    for (int i = 0; i < full.grid.n_samples; ++i) t[i] = full.grid.time(i);
    svg::write_line_chart(dir / "dynamics.svg", "excited-state population", "t", "P+",
                          {{"full", t, full.excited_population},
                           {"rwa", t, rwa.excited_population}});
    files.push_back("dynamics.svg");
  }
  return files;
}

inline std::vector<std::string> write_metrics_outputs(const std::filesystem::path& dir,
                                                      const DynamicsComparison& cmp,
                                                      bool with_json, bool with_svg) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  const auto& m = cmp.metrics;
  {
    CsvWriter csv(dir / "metrics.csv", {"t", "norm_diff", "trace_dist_state", "trace_dist_spin",
                                        "bound_q", "bound_sc"});
    for (size_t i = 0; i < m.t.size(); ++i)
      csv.row(std::vector<double>{m.t[i], m.norm_diff[i], m.trace_dist_state[i],
                                  m.trace_dist_spin[i], m.bound_q[i], m.bound_sc[i]});
    csv.close();
    files.push_back("metrics.csv");
  }
  {
    CsvWriter csv(dir / "fft.csv", {"omega", "amp_full", "amp_rwa"});
    for (size_t i = 0; i < cmp.fft_q_full.omega.size(); ++i)
      csv.row(std::vector<double>{cmp.fft_q_full.omega[i], cmp.fft_q_full.amplitude[i],
                                  cmp.fft_q_rwa.amplitude[i]});
    csv.close();
    files.push_back("fft.csv");
  }
  {
    CsvWriter csv(dir / "metrics_semiclassical.csv",
                  {"t", "norm_diff", "trace_dist_state", "propagator_diff", "propagator_bound"});
    for (size_t i = 0; i < m.t.size(); ++i)
      csv.row(std::vector<double>{m.t[i], cmp.sc_norm_diff[i], cmp.sc_trace_dist[i],
                                  cmp.propagator_diff[i], cmp.propagator_bound[i]});
    csv.close();
    files.push_back("metrics_semiclassical.csv");
  }
  {
    CsvWriter csv(dir / "fft_semiclassical.csv", {"omega", "amp_full", "amp_rwa"});
    for (size_t i = 0; i < cmp.fft_sc_full.omega.size(); ++i)
      csv.row(std::vector<double>{cmp.fft_sc_full.omega[i], cmp.fft_sc_full.amplitude[i],
                                  cmp.fft_sc_rwa.amplitude[i]});
    csv.close();
    files.push_back("fft_semiclassical.csv");
  }
  {
    auto dyn = write_dynamics_outputs(dir, cmp.q_full, cmp.q_rwa, with_svg);
    files.insert(files.end(), dyn.begin(), dyn.end());
  }
  {
    CsvWriter csv(dir / "dynamics_semiclassical.csv", {"t", "p_excited_full", "p_excited_rwa"});
    for (int i = 0; i < cmp.grid.n_samples; ++i)
      csv.row(std::vector<double>{cmp.grid.time(i), cmp.sc_full.excited_population[i],
                                  cmp.sc_rwa.excited_population[i]});
    csv.close();
    files.push_back("dynamics_semiclassical.csv");
  }
  if (with_json) {
    const nlohmann::json params{{"lambda", cmp.params.lambda},
                                {"alpha", cmp.field.alpha},
                                {"A", cmp.drive.A},
                                {"omega0", cmp.params.omega0},
                                {"Omega", cmp.params.Omega}};
    write_json_file(dir / "summary.json",
                    {{"r", cmp.r_q},
                     {"one_minus_r2", cmp.one_minus_r2_q},
                     {"horizon", cmp.grid.t_end},
                     {"params", params},
                     {"rabi_marks", cmp.rabi_marks},
                     {"amplitude_marks", cmp.amplitude_marks},
                     {"aw_level", cmp.aw.level},
                     {"aw_horizon_periods", cmp.aw.horizon_periods}});
    files.push_back("summary.json");
    write_json_file(dir / "summary_semiclassical.json",
                    {{"r", cmp.r_sc},
                     {"one_minus_r2", cmp.one_minus_r2_sc},
                     {"horizon", cmp.grid.t_end},
                     {"params",
                      {{"A", cmp.drive.A}, {"omega0", cmp.drive.omega0}, {"Omega", cmp.drive.Omega}}}});
    files.push_back("summary_semiclassical.json");
  }
  if (with_svg) {
    svg::write_line_chart(dir / "metrics.svg", "full-vs-rwa distances and bounds", "t", "value",
                          {{"norm_diff", m.t, m.norm_diff},
                           {"trace_dist_state", m.t, m.trace_dist_state},
                           {"trace_dist_spin", m.t, m.trace_dist_spin},
                           {"bound_q", m.t, m.bound_q},
                           {"bound_sc", m.t, m.bound_sc}});
    files.push_back("metrics.svg");
    svg::write_line_chart(dir / "fft.svg", "population spectra", "omega", "amplitude",
                          {{"full", cmp.fft_q_full.omega, cmp.fft_q_full.amplitude},
                           {"rwa", cmp.fft_q_rwa.omega, cmp.fft_q_rwa.amplitude}});
    files.push_back("fft.svg");
    svg::write_line_chart(dir / "metrics_semiclassical.svg",
                          "semiclassical pair distances and bound", "t", "value",
                          {{"norm_diff", m.t, cmp.sc_norm_diff},
                           {"trace_dist_state", m.t, cmp.sc_trace_dist},
                           {"propagator_diff", m.t, cmp.propagator_diff},
                           {"propagator_bound", m.t, cmp.propagator_bound}});
    files.push_back("metrics_semiclassical.svg");
    svg::write_line_chart(dir / "fft_semiclassical.svg", "semiclassical population spectra",
                          "omega", "amplitude",
                          {{"full", cmp.fft_sc_full.omega, cmp.fft_sc_full.amplitude},
                           {"rwa", cmp.fft_sc_rwa.omega, cmp.fft_sc_rwa.amplitude}});
    files.push_back("fft_semiclassical.svg");
  }
  return files;
}

inline std::vector<std::string> write_spectrum_outputs(const std::filesystem::path& dir,
                                                       const std::vector<SpectrumScanRow>& rows,
                                                       bool with_svg) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  CsvWriter csv(dir / "spectrum.csv", {"lambda", "sector", "branch", "energy_full", "energy_rwa"});
  for (const auto& r : rows)
    csv.row(std::vector<double>{r.lambda, static_cast<double>(r.sector),
                                static_cast<double>(r.branch), r.energy_full, r.energy_rwa});
  csv.close();
  files.push_back("spectrum.csv");
  if (with_svg && !rows.empty()) {
    // one polyline per (sector, branch) and model
    std::map<std::pair<int, int>, svg::Series> full, rwa;
    for (const auto& r : rows) {
      auto& sf = full[{r.sector, r.branch}];
      sf.x.push_back(r.lambda);
      sf.y.push_back(r.energy_full);
      auto& sr = rwa[{r.sector, r.branch}];
      sr.x.push_back(r.lambda);
      sr.y.push_back(r.energy_rwa);
    }
    std::vector<svg::Series> series;
    for (auto& [key, s] : full) {
      s.label = "full";
      series.push_back(std::move(s));
    }
    for (auto& [key, s] : rwa) {
      s.label = "rwa";
      series.push_back(std::move(s));
    }
    svg::write_line_chart(dir / "spectrum.svg", "energy levels vs coupling", "lambda", "energy",
                          series);
    files.push_back("spectrum.svg");
  }
  return files;
}

inline std::vector<std::string> write_splitting_outputs(const std::filesystem::path& dir,
                                                        const SplittingScan& scan, bool with_json,
                                                        bool with_svg) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  {
    CsvWriter csv(dir / "splittings.csv", {"n", "sign", "lambda_s", "delta", "fit_coefficient"});
    for (const auto& row : scan.rows) {
      csv.row(std::vector<std::string>{std::to_string(row.n), "minus",
                                       format_g17(row.lambda_minus), format_g17(scan.delta),
                                       format_g17(scan.fit_minus.coefficient)});
      csv.row(std::vector<std::string>{std::to_string(row.n), "plus",
                                       format_g17(row.lambda_plus), format_g17(scan.delta),
                                       format_g17(scan.fit_plus.coefficient)});
    }
    csv.close();
    files.push_back("splittings.csv");
  }
  {
    CsvWriter csv(dir / "breakdown_points.csv", {"n", "lambda_c_rwa", "lambda_c_pusc"});
    for (const auto& row : scan.rows)
      csv.row(std::vector<double>{static_cast<double>(row.n), row.lambda_c_rwa,
                                  row.lambda_c_pusc});
    csv.close();
    files.push_back("breakdown_points.csv");
  }
  if (with_json) {
    auto fit_json = [](const InverseSqrtFit& f) {
      return nlohmann::json{{"coefficient", f.coefficient},
                            {"rms_residual", f.rms_residual},
                            {"free_prefactor", f.free_prefactor},
                            {"free_exponent", f.free_exponent}};
    };
    write_json_file(dir / "splitting_summary.json", {{"delta", scan.delta},
                                                     {"fit_min_n", scan.fit_min_n},
                                                     {"fit_minus", fit_json(scan.fit_minus)},
                                                     {"fit_plus", fit_json(scan.fit_plus)},
                                                     {"fit_error", scan.fit_error}});
    files.push_back("splitting_summary.json");
  }
  if (with_svg) {
    svg::Series minus{"lambda_s minus", {}, {}}, plus{"lambda_s plus", {}, {}},
        rwa{"lambda_c rwa", {}, {}}, pusc{"lambda_c pusc", {}, {}};
    for (const auto& row : scan.rows) {
      minus.x.push_back(row.n);
      minus.y.push_back(row.lambda_minus);
      plus.x.push_back(row.n);
      plus.y.push_back(row.lambda_plus);
      rwa.x.push_back(row.n);
      rwa.y.push_back(row.lambda_c_rwa);
      pusc.x.push_back(row.n);
      pusc.y.push_back(row.lambda_c_pusc);
    }
    svg::write_line_chart(dir / "splittings.svg", "splitting points vs level", "n", "lambda",
                          {minus, plus, rwa, pusc}, true, true);
    files.push_back("splittings.svg");
  }
  return files;
}

inline std::vector<std::string> write_contour_outputs(const std::filesystem::path& dir,
                                                      const SweepResult& result, bool with_svg) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  {
    CsvWriter csv(dir / "contour.csv", {"lambda", "alpha", "A", "one_minus_r2_q"});
    for (const auto& cell : result.rows)
      csv.row(std::vector<double>{cell.lambda, cell.alpha, cell.A, cell.one_minus_r2_q});
    csv.close();
    files.push_back("contour.csv");
  }
  {
    CsvWriter csv(dir / "contour_details.csv",
                  {"lambda", "alpha", "A", "t_end", "horizon_capped", "displaced",
                   "one_minus_r2_q", "error"});
    for (const auto& cell : result.rows)
      csv.row(std::vector<std::string>{format_g17(cell.lambda), format_g17(cell.alpha),
                                       format_g17(cell.A), format_g17(cell.t_end),
                                       cell.horizon_capped ? "1" : "0",
                                       cell.displaced ? "1" : "0",
                                       format_g17(cell.one_minus_r2_q), cell.error});
    csv.close();
    files.push_back("contour_details.csv");
  }
  if (with_svg && !result.rows.empty()) {
    std::vector<double> xs, ys;
    for (const auto& cell : result.rows) {
      if (xs.empty() || xs.back() != cell.lambda) xs.push_back(cell.lambda);
    }
    const size_t na = result.rows.size() / xs.size();
    for (size_t i = 0; i < na; ++i) ys.push_back(result.rows[i].alpha);
    std::vector<double> vals(result.rows.size());
    for (size_t i = 0; i < result.rows.size(); ++i) vals[i] = result.rows[i].one_minus_r2_q;
    svg::write_heatmap(dir / "contour.svg", "1 - r_q^2 over (lambda, alpha)", "lambda", "alpha",
                       xs, ys, vals, true);
    files.push_back("contour.svg");
  }
  return files;
}

inline std::vector<std::string> write_slices_outputs(const std::filesystem::path& dir,
                                                     const SweepResult& result, bool with_svg) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  CsvWriter csv(dir / "slices.csv", {"A", "lambda", "alpha", "one_minus_r2_q", "one_minus_r2_sc"});
  for (const auto& cell : result.rows)
    csv.row(std::vector<double>{cell.A, cell.lambda, cell.alpha, cell.one_minus_r2_q,
                                cell.one_minus_r2_sc});
  csv.close();
  files.push_back("slices.csv");
  if (with_svg && !result.rows.empty()) {
    std::map<double, svg::Series> q_series, sc_series;
    for (const auto& cell : result.rows) {
      auto& q = q_series[cell.A];
      q.x.push_back(cell.lambda);
      q.y.push_back(cell.one_minus_r2_q);
      auto& sc = sc_series[cell.A];
      sc.x.push_back(cell.lambda);
      sc.y.push_back(cell.one_minus_r2_sc);
    }
    std::vector<svg::Series> series;
    for (auto& [A, s] : q_series) {
      s.label = "q A=" + std::string(format_g17(A)).substr(0, 6);
      series.push_back(std::move(s));
    }
    for (auto& [A, s] : sc_series) {
      s.label = "sc A=" + std::string(format_g17(A)).substr(0, 6);
      series.push_back(std::move(s));
    }
    svg::write_line_chart(dir / "slices.svg", "1 - r^2 along constant-A slices", "lambda",
                          "1 - r^2", series, true, false);
    files.push_back("slices.svg");
  }
  return files;
}

inline std::vector<std::string> write_convergence_outputs(const std::filesystem::path& dir,
                                                          const ConvergenceStudy& study,
                                                          bool with_svg) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  {
    CsvWriter csv(dir / "convergence.csv",
                  {"lambda", "A", "one_minus_r2_q", "one_minus_r2_sc", "ratio", "max_pop_dev"});
    for (const auto& row : study.rows)
      csv.row(std::vector<double>{row.lambda, row.A, row.one_minus_r2_q, row.one_minus_r2_sc,
                                  row.ratio, row.max_pop_dev});
    csv.close();
    files.push_back("convergence.csv");
  }
  std::vector<double> t(study.grid.n_samples);
  for (int i = 0; i < study.grid.n_samples; ++i) t[i] = study.grid.time(i);
  for (size_t k = 0; k < study.rows.size(); ++k) {
    const auto& row = study.rows[k];
    if (!row.error.empty() || row.p_full.empty()) continue;
    const std::string name = "convergence_traj_" + std::to_string(k + 1) + ".csv";
    CsvWriter csv(dir / name, {"t", "p_q_full", "p_q_rwa", "p_sc_full", "p_sc_rwa", "trace_state",
                               "trace_spin", "trace_sc"});
    for (int i = 0; i < study.grid.n_samples; ++i)
      csv.row(std::vector<double>{t[i], row.p_full[i], row.p_rwa[i], study.p_sc_full[i],
                                  study.p_sc_rwa[i], row.trace_state[i], row.trace_spin[i],
                                  study.trace_sc[i]});
    csv.close();
    files.push_back(name);
    if (with_svg) {
      const std::string svg_name = "convergence_traj_" + std::to_string(k + 1) + ".svg";
      svg::write_line_chart(dir / svg_name,
                            "populations, lambda=" + format_g17(row.lambda), "t", "P+",
                            {{"q full", t, row.p_full},
                             {"q rwa", t, row.p_rwa},
                             {"sc full", t, study.p_sc_full},
                             {"sc rwa", t, study.p_sc_rwa}});
      files.push_back(svg_name);
    }
  }
  if (with_svg && !study.rows.empty()) {
    svg::Series ratio{"ratio", {}, {}}, dev{"max_pop_dev", {}, {}}, q{"1-r2 q", {}, {}},
        sc{"1-r2 sc", {}, {}};
    for (const auto& row : study.rows) {
      ratio.x.push_back(row.lambda);
      ratio.y.push_back(row.ratio);
      dev.x.push_back(row.lambda);
      dev.y.push_back(row.max_pop_dev);
      q.x.push_back(row.lambda);
      q.y.push_back(row.one_minus_r2_q);
      sc.x.push_back(row.lambda);
      sc.y.push_back(row.one_minus_r2_sc);
    }
    svg::write_line_chart(dir / "convergence.svg", "semiclassical-limit convergence", "lambda",
                          "value", {ratio, dev, q, sc}, true, false);
    files.push_back("convergence.svg");
  }
  return files;
}

inline std::vector<std::string> write_bounds_outputs(const std::filesystem::path& dir,
                                                     const ModelParams& p, double alpha,
                                                     const TimeGrid& grid, bool with_svg) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  const double A = p.lambda * alpha;
  const auto moments = burgarth_moments(FieldSpec::coherent(alpha));
  const AwBound aw = bound_aw(A, p.omega0);
  CsvWriter csv(dir / "bounds.csv", {"t", "bound_q", "bound_sc", "aw_level"});
  std::vector<double> t(grid.n_samples), bq(grid.n_samples), bsc(grid.n_samples);
  for (int i = 0; i < grid.n_samples; ++i) {
    t[i] = grid.time(i);
    bq[i] = bound_burgarth_q(p, moments, t[i]);
    bsc[i] = bound_burgarth_sc(A, t[i], p.omega0);
    csv.row(std::vector<double>{t[i], bq[i], bsc[i], aw.level});
  }
  csv.close();
  files.push_back("bounds.csv");
  if (with_svg) {
    svg::write_line_chart(dir / "bounds.svg", "analytic error bounds", "t", "bound",
                          {{"bound_q", t, bq},
                           {"bound_sc", t, bsc},
                           {"aw_level", {t.front(), t.back()}, {aw.level, aw.level}}});
    files.push_back("bounds.svg");
  }
  return files;
}

}  // namespace rabi
