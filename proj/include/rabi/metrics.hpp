// metrics.hpp -- distances between states and propagators, analytic error
// bounds, and Fourier-domain comparison of population signals.

#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/FFT>

#include "rabi/dynamics.hpp"
#include "rabi/linalg.hpp"
#include "rabi/model.hpp"

namespace rabi {

inline double norm_difference(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("norm_difference: dimension mismatch");
  return (a - b).norm();
}

inline double norm_difference(const JointState& a, const JointState& b) {
  if (a.frame != b.frame) throw std::invalid_argument("norm_difference: frames differ");
  return norm_difference(a.amplitudes, b.amplitudes);
}

// 1/2 tr |rho1 - rho2| via the eigenvalues of the Hermitian difference.
inline double trace_distance(const Eigen::MatrixXcd& rho1, const Eigen::MatrixXcd& rho2) {
  if (rho1.rows() != rho2.rows() || rho1.cols() != rho2.cols() || rho1.rows() != rho1.cols())
    throw std::invalid_argument("trace_distance: shape mismatch");
  if (hermiticity_error(rho1) > 1e-10 || hermiticity_error(rho2) > 1e-10)
    throw std::invalid_argument("trace_distance: inputs must be Hermitian");
  const Eigen::MatrixXcd diff = rho1 - rho2;
  if (diff.rows() == 2) {
    // closed form for the 2x2 case, the hot path for reduced spin states
    const double tr = std::real(diff(0, 0) + diff(1, 1));
    const double det = std::real(diff(0, 0) * diff(1, 1) - diff(0, 1) * diff(1, 0));
    const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    return 0.5 * (std::abs(0.5 * tr + disc) + std::abs(0.5 * tr - disc));
  }
  const auto es = eig_selfadjoint(diff);
  return 0.5 * es.values.cwiseAbs().sum();
}

// Trace distance between pure states from the overlap alone.
inline double pure_trace_distance(const Eigen::VectorXcd& a, const Eigen::VectorXcd& b) {
  if (a.size() != b.size())
    throw std::invalid_argument("pure_trace_distance: dimension mismatch");
  const double overlap2 = std::norm(a.dot(b));
  return std::sqrt(std::max(0.0, 1.0 - overlap2));
}

inline double pure_trace_distance(const JointState& a, const JointState& b) {
  if (a.frame != b.frame) throw std::invalid_argument("pure_trace_distance: frames differ");
  return pure_trace_distance(a.amplitudes, b.amplitudes);
}

// Uniform propagator bound 2 A tau with validity horizon 1/(2 A tau) drive
// periods, tau = 2 pi / omega0.
struct AwBound {
  double level;
  double horizon_periods;
};

inline AwBound bound_aw(double A, double omega0 = 1.0) {
  if (!(A > 0.0) || !(omega0 > 0.0))
    throw std::invalid_argument("bound_aw: A and omega0 must be positive");
  const double tau = 2.0 * M_PI / omega0;
  return {2.0 * A * tau, 1.0 / (2.0 * A * tau)};
}

// Running propagator-difference bound for the driven two-level pair.
inline double bound_burgarth_sc(double A, double T, double omega0 = 1.0) {
  if (!(A >= 0.0) || !(T >= 0.0) || !(omega0 > 0.0))
    throw std::invalid_argument("bound_burgarth_sc: bad arguments");
  return (A / omega0) * (1.0 + 4.0 * A * T);
}

// Photon-number moments entering the quantum pair bound.
struct BurgarthMoments {
  double sqrt_n_plus_2;           // || (N+2)^{1/2} psi ||
  double sqrt_n_plus_2_times_3;   // || ((N+2)(N+3))^{1/2} psi ||
};

inline BurgarthMoments burgarth_moments(const JointState& s) {
  if (s.frame != Frame::lab)
    throw std::invalid_argument("burgarth_moments: lab-frame state required");
  double m1 = 0.0, m2 = 0.0, tail = 0.0;
  for (int n = 0; n <= s.n_max; ++n) {
    const double w = std::norm(s.up(n)) + std::norm(s.down(n));
    m1 += w * (n + 2.0);
    m2 += w * (n + 2.0) * (n + 3.0);
    if (n >= s.n_max - 4) tail += w;
  }
  // a populated ladder edge makes the moments truncation-sensitive
  if (tail * (s.n_max + 2.0) * (s.n_max + 3.0) > 1e-8)
    throw std::runtime_error("burgarth_moments: ladder edge carries weight; raise n_max");
  return {std::sqrt(m1), std::sqrt(m2)};
}

// Closed-form moments for the supported field preparations; exact, so usable
// when no lab-frame amplitude vector is around (displaced-frame runs).
inline BurgarthMoments burgarth_moments(const FieldSpec& field) {
  if (field.kind == FieldSpec::Kind::fock) {
    const double n = field.n;
    return {std::sqrt(n + 2.0), std::sqrt((n + 2.0) * (n + 3.0))};
  }
  const double a2 = field.alpha * field.alpha;
  return {std::sqrt(a2 + 2.0), std::sqrt(a2 * a2 + 6.0 * a2 + 6.0)};
}

inline double bound_burgarth_q(const ModelParams& p, const BurgarthMoments& m, double t) {
  p.validate();
  return (p.lambda / p.omega0) *
         (m.sqrt_n_plus_2 + std::abs(t) * 3.0 * p.lambda * m.sqrt_n_plus_2_times_3);
}

inline double bound_burgarth_q(const ModelParams& p, const JointState& psi0, double t) {
  return bound_burgarth_q(p, burgarth_moments(psi0), t);
}

// Spectral-norm difference between the full and RWA two-level propagators on
// the sample grid, via closed-form stepping of both propagators.
inline std::vector<double> propagator_difference(const SemiclassicalParams& p,
                                                 const TimeGrid& grid,
                                                 double step_tol = 1e-10) {
  p.validate();
  grid.validate(p.omega0 + p.Omega);
  auto propagate = [&](bool rwa, int substeps) {
    std::vector<Eigen::Matrix2cd> u(grid.n_samples);
    Eigen::Matrix2cd cur = Eigen::Matrix2cd::Identity();
    u[0] = cur;
    for (int i = 1; i < grid.n_samples; ++i) {
      const double t0 = grid.time(i - 1);
      const double dts = (grid.time(i) - t0) / substeps;
      for (int s = 0; s < substeps; ++s) {
        const double t = t0 + s * dts;
        const Eigen::Matrix2cd h1 = semiclassical_generator(p, t + detail::cf4_node1 * dts, rwa);
        const Eigen::Matrix2cd h2 = semiclassical_generator(p, t + detail::cf4_node2 * dts, rwa);
        cur = detail::exp_two_level(detail::cf4_w_small * h1 + detail::cf4_w_big * h2, dts) *
              detail::exp_two_level(detail::cf4_w_big * h1 + detail::cf4_w_small * h2, dts) * cur;
      }
      u[i] = cur;
    }
    return u;
  };
  auto adaptive = [&](bool rwa) {
    auto prev = propagate(rwa, 2);
    for (int k = 4; k <= (1 << 16); k *= 2) {
      auto cur = propagate(rwa, k);
      double diff = 0.0;
      for (std::size_t i = 0; i < cur.size(); ++i)
        diff = std::max(diff, (cur[i] - prev[i]).norm());
      if (diff <= step_tol * grid.t_end) return cur;
      prev = std::move(cur);
    }
    throw std::runtime_error("propagator_difference: step refinement did not converge");
  };
  const auto uf = adaptive(false);
  const auto ur = adaptive(true);
  std::vector<double> out(grid.n_samples);
  for (int i = 0; i < grid.n_samples; ++i) {
    const Eigen::Matrix2cd d = uf[i] - ur[i];
    // largest singular value of the 2x2 difference
    const Eigen::Matrix2cd g = d.adjoint() * d;
    const double tr = std::real(g(0, 0) + g(1, 1));
    const double det = std::real(g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0));
    const double disc = std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    out[i] = std::sqrt(std::max(0.0, 0.5 * tr + disc));
  }
  return out;
}

// Modulus spectrum of a mean-subtracted, zero-padded population signal.
struct FourierSpectrum {
  std::vector<double> omega;      // angular frequency bins, ascending from 0
  std::vector<double> amplitude;  // FFT moduli
  double dt = 0.0;
  int n_input = 0;
};

inline FourierSpectrum fft_spectrum(const std::vector<double>& series, double dt,
                                    double omega_cap = 6.4) {
  if (series.size() < 256)
    throw std::invalid_argument("fft_spectrum: need at least 256 samples");
  if (!(dt > 0.0)) throw std::invalid_argument("fft_spectrum: dt must be positive");
  const std::size_t padded = next_power_of_two(4 * series.size());
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(series.size());

  std::vector<Complex> input(padded, Complex(0.0, 0.0));
  for (std::size_t i = 0; i < series.size(); ++i) input[i] = series[i] - mean;
  std::vector<Complex> output(padded);
  Eigen::FFT<double> fft;
  fft.fwd(output, input);

  FourierSpectrum spec;
  spec.dt = dt;
  spec.n_input = static_cast<int>(series.size());
  const double domega = 2.0 * M_PI / (static_cast<double>(padded) * dt);
  const std::size_t nyquist = padded / 2;
  for (std::size_t k = 0; k <= nyquist; ++k) {
    const double omega = static_cast<double>(k) * domega;
    if (omega > omega_cap) break;
    spec.omega.push_back(omega);
    spec.amplitude.push_back(std::abs(output[k]));
  }
  return spec;
}

// Pearson correlation of two modulus spectra on identical bins, restricted to
// omega <= omega_max.
inline double spectral_correlation(const FourierSpectrum& a, const FourierSpectrum& b,
                                   double omega_max = 3.0) {
  if (a.omega.size() != b.omega.size() || a.n_input != b.n_input ||
      std::abs(a.dt - b.dt) > 1e-12 * std::max(1.0, std::abs(a.dt)))
    throw std::invalid_argument("spectral_correlation: spectra live on different grids");
  std::size_t count = 0;
  while (count < a.omega.size() && a.omega[count] <= omega_max) ++count;
  if (count < 8) throw std::invalid_argument("spectral_correlation: too few bins below omega_max");
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    ma += a.amplitude[i];
    mb += b.amplitude[i];
  }
  ma /= static_cast<double>(count);
  mb /= static_cast<double>(count);
  double saa = 0.0, sbb = 0.0, sab = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double da = a.amplitude[i] - ma;
    const double db = b.amplitude[i] - mb;
    saa += da * da;
    sbb += db * db;
    sab += da * db;
  }
  if (saa <= 0.0 || sbb <= 0.0)
    throw std::runtime_error("spectral_correlation: degenerate (flat) spectrum");
  return sab / std::sqrt(saa * sbb);
}

inline double one_minus_r_squared(double r) { return 1.0 - r * r; }

// Per-sample metric table for a quantum full/RWA pair.
struct MetricSeries {
  std::vector<double> t;
  std::vector<double> norm_diff;
  std::vector<double> trace_dist_state;
  std::vector<double> trace_dist_spin;
  std::vector<double> bound_q;
  std::vector<double> bound_sc;
};

// Distances between two snapshot-bearing trajectories on the same grid, with
// the analytic bounds evaluated alongside.
inline MetricSeries metric_series(const Trajectory& full, const Trajectory& rwa,
                                  const ModelParams& p, const BurgarthMoments& moments,
                                  double drive_amplitude) {
  if (full.snapshots.empty() || rwa.snapshots.empty())
    throw std::invalid_argument("metric_series: trajectories need snapshots");
  if (full.grid.n_samples != rwa.grid.n_samples ||
      std::abs(full.grid.t_end - rwa.grid.t_end) > 1e-9)
    throw std::invalid_argument("metric_series: grids differ");
  if (full.frame != rwa.frame) throw std::invalid_argument("metric_series: frames differ");
  MetricSeries out;
  const int n = full.grid.n_samples;
  out.t.resize(n);
  out.norm_diff.resize(n);
  out.trace_dist_state.resize(n);
  out.trace_dist_spin.resize(n);
  out.bound_q.resize(n);
  out.bound_sc.resize(n);
  for (int i = 0; i < n; ++i) {
    const double t = full.grid.time(i);
    out.t[i] = t;
    out.norm_diff[i] = norm_difference(full.snapshots[i], rwa.snapshots[i]);
    out.trace_dist_state[i] = pure_trace_distance(full.snapshots[i], rwa.snapshots[i]);
    out.trace_dist_spin[i] = trace_distance(full.spin_density[i], rwa.spin_density[i]);
    out.bound_q[i] = bound_burgarth_q(p, moments, t);
    out.bound_sc[i] = bound_burgarth_sc(drive_amplitude, t, p.omega0);
  }
  return out;
}

inline MetricSeries metric_series(const Trajectory& full, const Trajectory& rwa,
                                  const ModelParams& p, const JointState& psi0,
                                  double drive_amplitude) {
  return metric_series(full, rwa, p, burgarth_moments(psi0), drive_amplitude);
}

}  // namespace rabi
