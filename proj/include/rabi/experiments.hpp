// experiments.hpp -- orchestrated studies built on the model/spectrum/dynamics
// layers: splitting-point scans with fits, four-model dynamics comparisons with
// bound checks, the (lambda, alpha) correlation sweep, constant-A slices, and
// the semiclassical-limit convergence study.  Sweep cells are pure and merged
// by index, so results never depend on worker count or execution order.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rabi/dynamics.hpp"
#include "rabi/metrics.hpp"
#include "rabi/model.hpp"
#include "rabi/parallel.hpp"
#include "rabi/spectrum.hpp"

namespace rabi {

inline std::vector<double> linear_spaced(double lo, double hi, int count) {
  if (count < 1) throw std::invalid_argument("linear_spaced: count must be positive");
  if (count == 1) return {lo};
  std::vector<double> out(count);
  for (int i = 0; i < count; ++i) out[i] = lo + (hi - lo) * i / (count - 1);
  return out;
}

inline std::vector<double> log_spaced(double lo, double hi, int count) {
  if (!(lo > 0.0) || !(hi > 0.0)) throw std::invalid_argument("log_spaced: bounds must be positive");
  if (count < 1) throw std::invalid_argument("log_spaced: count must be positive");
  if (count == 1) return {lo};
  std::vector<double> out(count);
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < count; ++i) out[i] = std::exp(llo + (lhi - llo) * i / (count - 1));
  return out;
}

// ---------------------------------------------------------------------------
// Horizon rules

struct HorizonRule {
  enum class Kind { fixed, revivals, rabi_periods };
  Kind kind = Kind::revivals;
  double value = 3.0;  // t_end when fixed, multiplier otherwise

  static HorizonRule fixed(double t_end) { return {Kind::fixed, t_end}; }
  static HorizonRule revivals(double k) { return {Kind::revivals, k}; }
  static HorizonRule rabi_periods(double k) { return {Kind::rabi_periods, k}; }

  double resolve(double lambda, double alpha) const {
    switch (kind) {
      case Kind::fixed:
        return value;
      case Kind::revivals:
        return value * timescales(lambda, alpha).revival;
      case Kind::rabi_periods:
        return value * timescales(lambda, alpha).rabi_period;
    }
    throw std::logic_error("HorizonRule: unknown kind");
  }
};

// ---------------------------------------------------------------------------
// Splitting-point scan

struct SplittingRow {
  int n = 0;
  double lambda_minus = std::numeric_limits<double>::quiet_NaN();
  double lambda_plus = std::numeric_limits<double>::quiet_NaN();
  double lambda_c_rwa = 0.0;
  double lambda_c_pusc = 0.0;
  std::string error;  // empty when both branches resolved
};

struct SplittingScan {
  double delta = 0.0;
  int fit_min_n = 10;
  std::vector<SplittingRow> rows;  // n = 1..n_max_level
  InverseSqrtFit fit_minus;        // lambda_s^{n,-} against c / sqrt(n)
  InverseSqrtFit fit_plus;         // lambda_s^{n,+} against c / sqrt(n + 1)
  std::string fit_error;           // set when too few levels survived to fit
};

// Splitting points for pair levels n = 1..n_max_level at deviation threshold
// delta, with the closed-form breakdown couplings alongside and inverse-sqrt /
// free-power fits over the resolved rows with n >= fit_min_n.  Per-level
// tracking failures are recorded in the row, not propagated.
inline SplittingScan splitting_scan(int n_max_level, double delta,
                                    const SplittingOptions& opts = {},
                                    const ModelParams& base = {}, int workers = 0,
                                    int fit_min_n = 10) {
  if (n_max_level < 10)
    throw std::invalid_argument("splitting_scan: need n_max_level >= 10");
  base.validate();
  SplittingScan scan;
  scan.delta = delta;
  scan.fit_min_n = fit_min_n;
  scan.rows.resize(n_max_level);
  parallel_for(
      n_max_level,
      [&](int i) {
        const int n = i + 1;
        SplittingRow& row = scan.rows[i];
        row.n = n;
        row.lambda_c_rwa = lambda_c_rwa(n, base.omega0);
        row.lambda_c_pusc = lambda_c_pusc(n, base.omega0);
        try {
          const auto [minus, plus] = find_splitting_pair(n, delta, base, opts);
          row.lambda_minus = minus.lambda_s;
          row.lambda_plus = plus.lambda_s;
        } catch (const std::exception& e) {
          row.error = e.what();
        }
      },
      workers);
  std::vector<std::pair<int, double>> pts_minus, pts_plus;
  for (const auto& row : scan.rows) {
    if (!row.error.empty() || row.n < fit_min_n) continue;
    pts_minus.emplace_back(row.n, row.lambda_minus);
    pts_plus.emplace_back(row.n, row.lambda_plus);
  }
  if (pts_minus.size() >= 5) {
    scan.fit_minus = fit_inverse_sqrt(pts_minus, 0);
    scan.fit_plus = fit_inverse_sqrt(pts_plus, 1);
  } else {
    scan.fit_error = "fewer than five resolved levels above fit_min_n";
  }
  return scan;
}

// ---------------------------------------------------------------------------
// Spectrum scan over coupling

struct SpectrumScanRow {
  double lambda = 0.0;
  int sector = 1;
  int branch = 0;  // within-sector ascending rank
  double energy_full = 0.0;
  double energy_rwa = 0.0;
};

// Lowest levels_per_sector levels of each parity sector, full model against
// the paired-ladder values, for every coupling in lambdas.  Rows are ordered
// lambda-outer, sector +1 before -1, branch ascending.
inline std::vector<SpectrumScanRow> spectrum_scan(const std::vector<double>& lambdas,
                                                  int levels_per_sector, int n_max,
                                                  const ModelParams& base = {},
                                                  int workers = 0) {
  if (lambdas.empty()) throw std::invalid_argument("spectrum_scan: empty lambda grid");
  if (levels_per_sector < 1) throw std::invalid_argument("spectrum_scan: need >= 1 level");
  if (2 * levels_per_sector > n_max)
    throw std::invalid_argument("spectrum_scan: ladder too short for requested levels");
  const int nl = static_cast<int>(lambdas.size());
  std::vector<SpectrumScanRow> rows(static_cast<size_t>(nl) * 2 * levels_per_sector);
  parallel_for(
      nl,
      [&](int il) {
        ModelParams p = base;
        p.lambda = lambdas[il];
        p.validate();
        size_t at = static_cast<size_t>(il) * 2 * levels_per_sector;
        for (int sector : {1, -1}) {
          const auto spec = compute_sector_spectrum(p, n_max, sector, false, false);
          const auto rwa = rwa_sector_levels(p, sector, levels_per_sector);
          for (int b = 0; b < levels_per_sector; ++b)
            rows[at++] = {p.lambda, sector, b, spec.values[b], rwa[b]};
        }
      },
      workers);
  return rows;
}

// ---------------------------------------------------------------------------
// Four-model dynamics comparison

struct DynamicsOptions {
  int samples_per_period = 64;
  double step_tol = 1e-9;
  double propagator_tol = 1e-10;
  int max_lab_dim = 4200;
  double omega_max_corr = 3.0;  // correlation band upper edge, units of omega0
};

struct DynamicsComparison {
  ModelParams params;
  SemiclassicalParams drive;
  FieldSpec field;
  Timescales scales{};
  TimeGrid grid;
  Trajectory q_full, q_rwa, sc_full, sc_rwa;
  MetricSeries metrics;                  // quantum pair distances + both bounds
  std::vector<double> sc_norm_diff;      // semiclassical pair, per sample
  std::vector<double> sc_trace_dist;
  std::vector<double> propagator_diff;   // spectral-norm gap of the 2x2 propagators
  std::vector<double> propagator_bound;  // drive-strength bound at each sample
  AwBound aw{};                          // averaging guide levels {2 A tau, 1/(2 A tau)}
  FourierSpectrum fft_q_full, fft_q_rwa, fft_sc_full, fft_sc_rwa;
  double r_q = 0.0, r_sc = 0.0;
  double one_minus_r2_q = 0.0, one_minus_r2_sc = 0.0;
  std::vector<double> rabi_marks;       // {tau_R, 2 tau_R} annotation guides
  std::vector<double> amplitude_marks;  // {A, 2A} annotation guides
};

// Runs the full/RWA quantum pair and the full/RWA driven two-level pair for a
// coherent field |alpha>, collects every distance and bound on one grid, and
// enforces the analytic inequalities (pair bounds, spin-vs-state contraction)
// as runtime checks.  Defaults reproduce the lambda = 0.2/sqrt(10),
// alpha = sqrt(10) working point over three revivals.
inline DynamicsComparison dynamics_comparison(
    double lambda = 0.2 / std::sqrt(10.0), double alpha = std::sqrt(10.0),
    HorizonRule horizon = HorizonRule::revivals(3.0), const DynamicsOptions& opts = {}) {
  DynamicsComparison out;
  out.params = ModelParams{1.0, 1.0, lambda};
  out.params.validate();
  if (!(alpha > 0.0)) throw std::invalid_argument("dynamics_comparison: alpha must be positive");
  const double A = lambda * alpha;
  out.drive = SemiclassicalParams{A, 1.0, 1.0};
  out.field = FieldSpec::coherent(alpha);
  out.scales = timescales(lambda, alpha);
  out.grid = TimeGrid::over(horizon.resolve(lambda, alpha), out.params.omega0 + out.params.Omega,
                            opts.samples_per_period);

  RunOptions ropts;
  ropts.record_snapshots = true;
  ropts.step_tol = opts.step_tol;
  ropts.max_lab_dim = opts.max_lab_dim;
  out.q_full = run_quantum(out.params, out.field, false, out.grid, ropts);
  out.q_rwa = run_quantum(out.params, out.field, true, out.grid, ropts);
  out.sc_full = run_semiclassical(out.drive, false, out.grid, opts.step_tol);
  out.sc_rwa = run_semiclassical(out.drive, true, out.grid, opts.step_tol);

  out.metrics = metric_series(out.q_full, out.q_rwa, out.params, burgarth_moments(out.field), A);
  const int ns = out.grid.n_samples;
  out.sc_norm_diff.resize(ns);
  out.sc_trace_dist.resize(ns);
  for (int i = 0; i < ns; ++i) {
    out.sc_norm_diff[i] = norm_difference(out.sc_full.snapshots[i], out.sc_rwa.snapshots[i]);
    out.sc_trace_dist[i] = pure_trace_distance(out.sc_full.snapshots[i], out.sc_rwa.snapshots[i]);
  }
  out.propagator_diff = propagator_difference(out.drive, out.grid, opts.propagator_tol);
  out.propagator_bound.resize(ns);
  for (int i = 0; i < ns; ++i)
    out.propagator_bound[i] = bound_burgarth_sc(A, out.grid.time(i), out.drive.omega0);

  for (int i = 0; i < ns; ++i) {
    if (out.metrics.norm_diff[i] > out.metrics.bound_q[i] + 1e-9)
      throw std::runtime_error("dynamics_comparison: quantum pair bound violated at t=" +
                               std::to_string(out.grid.time(i)));
    if (out.propagator_diff[i] > out.propagator_bound[i] + 1e-9)
      throw std::runtime_error("dynamics_comparison: propagator bound violated at t=" +
                               std::to_string(out.grid.time(i)));
    if (out.metrics.trace_dist_spin[i] > out.metrics.trace_dist_state[i] + 1e-10)
      throw std::runtime_error("dynamics_comparison: spin trace distance exceeds state value");
  }

  out.aw = bound_aw(A, out.drive.omega0);
  out.fft_q_full = fft_spectrum(out.q_full.excited_population, out.grid.dt());
  out.fft_q_rwa = fft_spectrum(out.q_rwa.excited_population, out.grid.dt());
  out.fft_sc_full = fft_spectrum(out.sc_full.excited_population, out.grid.dt());
  out.fft_sc_rwa = fft_spectrum(out.sc_rwa.excited_population, out.grid.dt());
  out.r_q = spectral_correlation(out.fft_q_full, out.fft_q_rwa, opts.omega_max_corr);
  out.r_sc = spectral_correlation(out.fft_sc_full, out.fft_sc_rwa, opts.omega_max_corr);
  out.one_minus_r2_q = one_minus_r_squared(out.r_q);
  out.one_minus_r2_sc = one_minus_r_squared(out.r_sc);
  out.rabi_marks = {out.scales.rabi_period, 2.0 * out.scales.rabi_period};
  out.amplitude_marks = {A, 2.0 * A};
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepSpec {
  std::vector<double> lambdas;
  std::vector<double> alphas;    // contour axis; unused by the slice sweep
  std::vector<double> A_values;  // slice axis; unused by the contour sweep
  HorizonRule horizon = HorizonRule::revivals(3.0);
  double horizon_cap = 3e5;     // cells wanting more get the cap and a flag
  int samples_per_period = 20;  // sweep cells sample at the grid-contract floor
  double amp_cutoff = 1e-7;     // eigenmode amplitude floor in the cosine series
  double weight_cutoff = 1e-8;  // pair weight floor in the cosine series
  double step_tol = 1e-9;
  int max_lab_dim = 4200;
  int workers = 0;
  double omega_max_corr = 3.0;
  std::vector<double> iso_A = {0.05, 0.1, 0.15, 0.2, 0.25, 0.3};  // contour guide lines
  std::function<void(int, int)> progress;  // (cell index, total), stderr-style reporting

  void validate_common() const {
    if (lambdas.empty()) throw std::invalid_argument("SweepSpec: empty lambda grid");
    for (double l : lambdas)
      if (!(l > 0.0)) throw std::invalid_argument("SweepSpec: lambdas must be positive");
    if (!(horizon_cap > 0.0)) throw std::invalid_argument("SweepSpec: horizon_cap must be positive");
    if (samples_per_period < 20)
      throw std::invalid_argument("SweepSpec: need >= 20 samples per period");
  }
};

inline SweepSpec default_contour_spec() {
  SweepSpec s;
  s.lambdas = log_spaced(1e-3, 0.3, 24);
  s.alphas = linear_spaced(1.0, 30.0, 24);
  return s;
}

inline SweepSpec default_slices_spec() {
  SweepSpec s;
  s.A_values = {0.05, 0.1, 0.2, 0.3};
  s.lambdas = log_spaced(5e-3, 0.1, 16);
  return s;
}

struct SweepCell {
  double lambda = 0.0;
  double alpha = 0.0;
  double A = 0.0;
  double t_end = 0.0;
  bool horizon_capped = false;
  bool displaced = false;
  double one_minus_r2_q = std::numeric_limits<double>::quiet_NaN();
  double one_minus_r2_sc = std::numeric_limits<double>::quiet_NaN();
  std::string error;  // empty on success
};

struct SweepResult {
  std::vector<SweepCell> rows;  // one per grid cell, canonical order
  std::vector<double> iso_A;
  std::string provenance = "deterministic sweep: seed-free cells, index-keyed merge";
};

namespace detail {

// Spin-up population of coherent|alpha> (x) |+z> under the autonomous lab
// Hamiltonian via per-parity-sector diagonalization.  The spin-up components
// of the two sectors live on disjoint photon numbers, so the total population
// is the plain sum of the per-sector cosine series.
inline std::vector<double> lab_population_sectors(const ModelParams& p,
                                                  const Eigen::VectorXd& psi0, int n_max,
                                                  bool rwa, const TimeGrid& grid,
                                                  double amp_cutoff, double weight_cutoff) {
  const int dim = 2 * (n_max + 1);
  std::vector<double> total(grid.n_samples, 0.0);
  for (int sector : {1, -1}) {
    auto spec = compute_sector_spectrum(p, n_max, sector, rwa, true);
    const int m = static_cast<int>(spec.full_indices.size());
    Eigen::MatrixXd embedded = Eigen::MatrixXd::Zero(dim, m);
    for (int r = 0; r < m; ++r) embedded.row(spec.full_indices[r]) = spec.vectors.row(r);
    spec.vectors.resize(0, 0);
    const auto part =
        excited_population_series(embedded, spec.values, psi0, grid, amp_cutoff, weight_cutoff);
    for (int i = 0; i < grid.n_samples; ++i) total[i] += part[i];
  }
  return total;
}

struct CellSeries {
  TimeGrid grid;
  std::vector<double> p_full, p_rwa;
  bool displaced = false;
};

// Full/RWA population pair for one (lambda, alpha) cell: eigendecomposition
// plus cosine series in the lab frame while the ladder fits the dimension
// budget, integrated displaced-frame propagation beyond it.
inline CellSeries cell_population_pair(double lambda, double alpha, double t_end,
                                       const SweepSpec& spec) {
  const ModelParams p{1.0, 1.0, lambda};
  CellSeries cell;
  cell.grid = TimeGrid::over(t_end, p.omega0 + p.Omega, spec.samples_per_period);
  const int lab_n = default_lab_n_max(alpha);
  if (2 * (lab_n + 1) <= spec.max_lab_dim) {
    const FieldSpec field = FieldSpec::coherent(alpha);
    const JointState psi0 = initial_joint_state(field, lab_n, Frame::lab);
    const Eigen::VectorXd psi0_real = psi0.amplitudes.real();
    cell.p_full = lab_population_sectors(p, psi0_real, lab_n, false, cell.grid,
                                         spec.amp_cutoff, spec.weight_cutoff);
    Eigen::MatrixXd vectors;
    Eigen::VectorXd values;
    rwa_eigensystem(p, lab_n, vectors, values);
    cell.p_rwa = excited_population_series(vectors, values, psi0_real, cell.grid,
                                           spec.amp_cutoff, spec.weight_cutoff);
  } else {
    cell.displaced = true;
    RunOptions ropts;
    ropts.step_tol = spec.step_tol;
    ropts.max_lab_dim = spec.max_lab_dim;
    const FieldSpec field = FieldSpec::coherent(alpha);
    cell.p_full = run_quantum(p, field, false, cell.grid, ropts, Frame::displaced_rotating)
                      .excited_population;
    cell.p_rwa = run_quantum(p, field, true, cell.grid, ropts, Frame::displaced_rotating)
                     .excited_population;
  }
  return cell;
}

inline double correlation_from_pair(const std::vector<double>& a, const std::vector<double>& b,
                                    double dt, double omega_max) {
  const auto sa = fft_spectrum(a, dt);
  const auto sb = fft_spectrum(b, dt);
  return spectral_correlation(sa, sb, omega_max);
}

}  // namespace detail

// Correlation figure of merit 1 - r_q^2 over a (lambda, alpha) grid with the
// revival-scaled horizon.  Rows are emitted in row-major (lambda outer, alpha
// inner) order; per-cell failures land in the row's error field and the sweep
// continues.
inline SweepResult correlation_contour(const SweepSpec& spec = default_contour_spec()) {
  spec.validate_common();
  if (spec.alphas.empty()) throw std::invalid_argument("correlation_contour: empty alpha grid");
  for (double a : spec.alphas)
    if (!(a > 0.0)) throw std::invalid_argument("correlation_contour: alphas must be positive");
  const int nl = static_cast<int>(spec.lambdas.size());
  const int na = static_cast<int>(spec.alphas.size());
  SweepResult result;
  result.iso_A = spec.iso_A;
  result.rows.resize(static_cast<size_t>(nl) * na);
  parallel_for(
      nl * na,
      [&](int idx) {
        SweepCell& cell = result.rows[idx];
        cell.lambda = spec.lambdas[idx / na];
        cell.alpha = spec.alphas[idx % na];
        cell.A = cell.lambda * cell.alpha;
        try {
          double t_end = spec.horizon.resolve(cell.lambda, cell.alpha);
          if (t_end > spec.horizon_cap) {
            t_end = spec.horizon_cap;
            cell.horizon_capped = true;
          }
          cell.t_end = t_end;
          const auto series = detail::cell_population_pair(cell.lambda, cell.alpha, t_end, spec);
          cell.displaced = series.displaced;
          cell.one_minus_r2_q = one_minus_r_squared(detail::correlation_from_pair(
              series.p_full, series.p_rwa, series.grid.dt(), spec.omega_max_corr));
        } catch (const std::exception& e) {
          cell.error = e.what();
        }
        if (spec.progress) spec.progress(idx, nl * na);
      },
      spec.workers);
  return result;
}

// Constant-A slices: alpha = A / lambda per cell, quantum correlation per cell
// and one semiclassical correlation per A value (the drive knows nothing of
// lambda), evaluated over the longest horizon resolved within the slice.
inline SweepResult constant_A_slices(const SweepSpec& spec = default_slices_spec()) {
  spec.validate_common();
  if (spec.A_values.empty()) throw std::invalid_argument("constant_A_slices: empty A grid");
  for (double A : spec.A_values)
    if (!(A > 0.0)) throw std::invalid_argument("constant_A_slices: A values must be positive");
  const int nA = static_cast<int>(spec.A_values.size());
  const int nl = static_cast<int>(spec.lambdas.size());
  SweepResult result;
  result.iso_A = spec.A_values;
  result.rows.resize(static_cast<size_t>(nA) * nl);

  // one semiclassical reference per A, over the slice's longest resolved horizon
  std::vector<double> sc_value(nA, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::string> sc_error(nA);
  parallel_for(
      nA,
      [&](int ia) {
        try {
          const double A = spec.A_values[ia];
          double t_max = 0.0;
          for (double lambda : spec.lambdas) {
            const double t =
                std::min(spec.horizon.resolve(lambda, A / lambda), spec.horizon_cap);
            t_max = std::max(t_max, t);
          }
          const TimeGrid grid = TimeGrid::over(t_max, 2.0, spec.samples_per_period);
          const SemiclassicalParams drive{A, 1.0, 1.0};
          const auto full = run_semiclassical(drive, false, grid, spec.step_tol);
          const auto rwa = run_semiclassical(drive, true, grid, spec.step_tol);
          sc_value[ia] = one_minus_r_squared(
              detail::correlation_from_pair(full.excited_population, rwa.excited_population,
                                            grid.dt(), spec.omega_max_corr));
        } catch (const std::exception& e) {
          sc_error[ia] = e.what();
        }
      },
      spec.workers);

  parallel_for(
      nA * nl,
      [&](int idx) {
        SweepCell& cell = result.rows[idx];
        const int ia = idx / nl;
        cell.A = spec.A_values[ia];
        cell.lambda = spec.lambdas[idx % nl];
        cell.alpha = cell.A / cell.lambda;
        cell.one_minus_r2_sc = sc_value[ia];
        try {
          if (!sc_error[ia].empty())
            throw std::runtime_error("semiclassical reference failed: " + sc_error[ia]);
          double t_end = spec.horizon.resolve(cell.lambda, cell.alpha);
          if (t_end > spec.horizon_cap) {
            t_end = spec.horizon_cap;
            cell.horizon_capped = true;
          }
          cell.t_end = t_end;
          const auto series = detail::cell_population_pair(cell.lambda, cell.alpha, t_end, spec);
          cell.displaced = series.displaced;
          cell.one_minus_r2_q = one_minus_r_squared(detail::correlation_from_pair(
              series.p_full, series.p_rwa, series.grid.dt(), spec.omega_max_corr));
        } catch (const std::exception& e) {
          cell.error = e.what();
        }
        if (spec.progress) spec.progress(idx, nA * nl);
      },
      spec.workers);
  return result;
}

// ---------------------------------------------------------------------------
// Semiclassical-limit convergence study

struct ConvergenceSpec {
  double A = 0.2;
  std::vector<double> lambdas = {1e-1, 1e-2, 1e-3, 1e-4};
  int n_periods = 20;  // horizon in Rabi periods pi / A
  int samples_per_period = 64;
  double step_tol = 1e-9;
  int max_lab_dim = 4200;
  int workers = 0;
  double omega_max_corr = 3.0;
};

struct ConvergenceRow {
  double lambda = 0.0;
  double alpha = 0.0;
  double A = 0.0;
  bool displaced = false;
  double max_pop_dev = std::numeric_limits<double>::quiet_NaN();      // |P_qfull - P_scfull|
  double max_pop_dev_rwa = std::numeric_limits<double>::quiet_NaN();  // |P_qrwa - P_scrwa|
  double sup_full_vs_rwa_q = std::numeric_limits<double>::quiet_NaN();
  double sup_full_vs_rwa_sc = std::numeric_limits<double>::quiet_NaN();
  double one_minus_r2_q = std::numeric_limits<double>::quiet_NaN();
  double one_minus_r2_sc = std::numeric_limits<double>::quiet_NaN();
  double ratio = std::numeric_limits<double>::quiet_NaN();  // (1-r_q^2)/(1-r_sc^2)
  double max_state_trace_dist = std::numeric_limits<double>::quiet_NaN();
  double max_spin_trace_dist = std::numeric_limits<double>::quiet_NaN();
  double max_spin_vs_sc_dist = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> p_full, p_rwa;             // per-sample populations
  std::vector<double> trace_state, trace_spin;   // per-sample quantum distances
  std::string error;
};

struct ConvergenceStudy {
  double A = 0.0;
  int n_periods = 0;
  TimeGrid grid;
  std::vector<double> p_sc_full, p_sc_rwa;  // shared semiclassical references
  std::vector<double> trace_sc;             // |full - RWA| two-level trace distance
  double one_minus_r2_sc = std::numeric_limits<double>::quiet_NaN();
  std::vector<ConvergenceRow> rows;
};

namespace detail {

inline Eigen::VectorXcd padded_to(const Eigen::VectorXcd& v, int dim) {
  if (v.size() == dim) return v;
  Eigen::VectorXcd out = Eigen::VectorXcd::Zero(dim);
  const int n_src = static_cast<int>(v.size()) / 2;
  const int n_dst = dim / 2;
  out.head(n_src) = v.head(n_src);
  out.segment(n_dst, n_src) = v.tail(n_src);
  return out;
}

}  // namespace detail

// Fixed drive amplitude A, shrinking coupling lambda (alpha = A/lambda grows):
// the quantum pair is propagated against the shared semiclassical pair over
// n_periods Rabi periods and every population / distance diagnostic of the
// classical-limit comparison is collected per row.
inline ConvergenceStudy convergence_study(const ConvergenceSpec& spec = {}) {
  if (!(spec.A > 0.0)) throw std::invalid_argument("convergence_study: A must be positive");
  if (spec.lambdas.empty()) throw std::invalid_argument("convergence_study: empty lambda grid");
  if (spec.n_periods < 1) throw std::invalid_argument("convergence_study: n_periods < 1");
  ConvergenceStudy study;
  study.A = spec.A;
  study.n_periods = spec.n_periods;
  study.grid = TimeGrid::over(spec.n_periods * M_PI / spec.A, 2.0, spec.samples_per_period);
  const SemiclassicalParams drive{spec.A, 1.0, 1.0};
  const auto sc_full = run_semiclassical(drive, false, study.grid, spec.step_tol);
  const auto sc_rwa = run_semiclassical(drive, true, study.grid, spec.step_tol);
  study.p_sc_full = sc_full.excited_population;
  study.p_sc_rwa = sc_rwa.excited_population;
  const int ns = study.grid.n_samples;
  study.trace_sc.resize(ns);
  for (int i = 0; i < ns; ++i)
    study.trace_sc[i] = pure_trace_distance(sc_full.snapshots[i], sc_rwa.snapshots[i]);
  study.one_minus_r2_sc = one_minus_r_squared(detail::correlation_from_pair(
      study.p_sc_full, study.p_sc_rwa, study.grid.dt(), spec.omega_max_corr));

  const int nl = static_cast<int>(spec.lambdas.size());
  study.rows.resize(nl);
  parallel_for(
      nl,
      [&](int i) {
        ConvergenceRow& row = study.rows[i];
        row.lambda = spec.lambdas[i];
        row.A = spec.A;
        row.alpha = spec.A / spec.lambdas[i];
        row.one_minus_r2_sc = study.one_minus_r2_sc;
        try {
          const ModelParams p{1.0, 1.0, row.lambda};
          p.validate();
          const FieldSpec field = FieldSpec::coherent(row.alpha);
          RunOptions ropts;
          ropts.record_snapshots = true;
          ropts.step_tol = spec.step_tol;
          ropts.max_lab_dim = spec.max_lab_dim;
          const Trajectory qf = run_quantum(p, field, false, study.grid, ropts);
          const Trajectory qr = run_quantum(p, field, true, study.grid, ropts);
          row.displaced = qf.frame == Frame::displaced_rotating;
          row.p_full = qf.excited_population;
          row.p_rwa = qr.excited_population;
          const int dim = 2 * (std::max(qf.n_max, qr.n_max) + 1);
          row.trace_state.resize(ns);
          row.trace_spin.resize(ns);
          double pd = 0.0, pdr = 0.0, fq = 0.0, fsc = 0.0, ts = 0.0, tsp = 0.0, dsc = 0.0;
          for (int k = 0; k < ns; ++k) {
            row.trace_state[k] = pure_trace_distance(detail::padded_to(qf.snapshots[k], dim),
                                                     detail::padded_to(qr.snapshots[k], dim));
            row.trace_spin[k] = trace_distance(qf.spin_density[k], qr.spin_density[k]);
            pd = std::max(pd, std::abs(qf.excited_population[k] - study.p_sc_full[k]));
            pdr = std::max(pdr, std::abs(qr.excited_population[k] - study.p_sc_rwa[k]));
            fq = std::max(fq, std::abs(qf.excited_population[k] - qr.excited_population[k]));
            fsc = std::max(fsc, std::abs(study.p_sc_full[k] - study.p_sc_rwa[k]));
            ts = std::max(ts, row.trace_state[k]);
            tsp = std::max(tsp, row.trace_spin[k]);
            dsc = std::max(dsc, std::abs(row.trace_spin[k] - study.trace_sc[k]));
          }
          row.max_pop_dev = pd;
          row.max_pop_dev_rwa = pdr;
          row.sup_full_vs_rwa_q = fq;
          row.sup_full_vs_rwa_sc = fsc;
          row.max_state_trace_dist = ts;
          row.max_spin_trace_dist = tsp;
          row.max_spin_vs_sc_dist = dsc;
          row.one_minus_r2_q = one_minus_r_squared(detail::correlation_from_pair(
              row.p_full, row.p_rwa, study.grid.dt(), spec.omega_max_corr));
          row.ratio = row.one_minus_r2_q / row.one_minus_r2_sc;
        } catch (const std::exception& e) {
          row.error = e.what();
        }
      },
      spec.workers);
  return study;
}

}  // namespace rabi
