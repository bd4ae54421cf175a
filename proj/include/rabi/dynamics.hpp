// dynamics.hpp -- time evolution for the quantum and semiclassical models.
//
// Autonomous lab-frame Hamiltonians are propagated spectrally (one
// eigendecomposition, exact phases).  Time-dependent generators use a
// fourth-order commutator-free scheme with two Gauss-Legendre nodes per step;
// the sub-exponentials are evaluated in closed form for two-level systems and
// with a Lanczos expansion otherwise.  Steps are halved until the sampled
// trajectory moves by less than step_tol * t_end.

#pragma once

#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rabi/linalg.hpp"
#include "rabi/model.hpp"

namespace rabi {

struct TimeGrid {
  double t_end = 1.0;
  int n_samples = 2;  // uniform samples including t = 0 and t = t_end

  double dt() const { return t_end / (n_samples - 1); }
  double time(int i) const { return i * dt(); }

  // Sampling must resolve the fastest retained frequency, omega0 + Omega.
  void validate(double omega_sum) const {
    if (!(t_end > 0.0)) throw std::invalid_argument("TimeGrid: t_end must be positive");
    if (n_samples < 2) throw std::invalid_argument("TimeGrid: need at least two samples");
    if (dt() > 2.0 * M_PI / (20.0 * omega_sum))
      throw std::invalid_argument("TimeGrid: sampling too coarse for omega sum " +
                                  std::to_string(omega_sum));
  }

  static TimeGrid over(double t_end, double omega_sum = 2.0, int samples_per_period = 64) {
    if (!(t_end > 0.0)) throw std::invalid_argument("TimeGrid: t_end must be positive");
    if (samples_per_period < 1) throw std::invalid_argument("TimeGrid: samples_per_period < 1");
    const double dt = 2.0 * M_PI / (omega_sum * samples_per_period);
    TimeGrid g;
    g.t_end = t_end;
    g.n_samples = std::max(2, static_cast<int>(std::ceil(t_end / dt)) + 1);
    return g;
  }
};

struct Timescales {
  double rabi_period;  // pi / (lambda alpha)
  double collapse;     // sqrt(2) / lambda
  double revival;      // 2 pi alpha / lambda
};

inline Timescales timescales(double lambda, double alpha) {
  if (!(lambda > 0.0) || !(alpha > 0.0))
    throw std::invalid_argument("timescales: lambda and alpha must be positive");
  return {M_PI / (lambda * alpha), std::sqrt(2.0) / lambda, 2.0 * M_PI * alpha / lambda};
}

struct Trajectory {
  TimeGrid grid;
  Frame frame = Frame::lab;
  std::string model;  // quantum_full | quantum_rwa | semiclassical_full | semiclassical_rwa
  int n_max = -1;     // field ladder size, -1 for two-level runs
  std::vector<double> excited_population;
  std::vector<Eigen::Matrix2cd> spin_density;
  std::vector<Eigen::VectorXcd> snapshots;    // per-sample states when recorded
  double max_edge_occupation = 0.0;           // top-of-ladder weight seen during the run
};

inline Eigen::Matrix2cd reduced_spin_density(const Eigen::VectorXcd& amplitudes, int n_max) {
  const int m = n_max + 1;
  if (amplitudes.size() != 2 * m)
    throw std::invalid_argument("reduced_spin_density: amplitude size mismatch");
  const auto up = amplitudes.head(m);
  const auto down = amplitudes.tail(m);
  Eigen::Matrix2cd rho;
  rho(0, 0) = up.squaredNorm();
  rho(1, 1) = down.squaredNorm();
  rho(0, 1) = down.dot(up);  // sum_n up_n conj(down_n)
  rho(1, 0) = std::conj(rho(0, 1));
  return rho;
}

inline Eigen::Matrix2cd reduced_spin_density(const JointState& s) {
  return reduced_spin_density(s.amplitudes, s.n_max);
}

namespace detail {

// Occupation of the top five rungs of either spin block.
inline double edge_occupation(const Eigen::VectorXcd& amplitudes, int n_max) {
  const int m = n_max + 1;
  const int probe = std::min(5, m);
  return amplitudes.segment(m - probe, probe).squaredNorm() +
         amplitudes.segment(2 * m - probe, probe).squaredNorm();
}

}  // namespace detail

// Spectral propagation of an autonomous system given its eigendecomposition
// (real symmetric storage; all lab-frame Hamiltonians here are real).
inline Trajectory evolve_from_eigensystem(const Eigen::MatrixXd& vectors,
                                          const Eigen::VectorXd& values,
                                          const JointState& psi0, const TimeGrid& grid,
                                          bool record_snapshots = false) {
  psi0.validate();
  if (vectors.rows() != psi0.amplitudes.size())
    throw std::invalid_argument("evolve_from_eigensystem: dimension mismatch");
  const int dim = static_cast<int>(vectors.rows());
  const int m = psi0.n_max + 1;
  const Eigen::VectorXcd c = vectors.transpose().cast<Complex>() * psi0.amplitudes;

  Trajectory traj;
  traj.grid = grid;
  traj.frame = psi0.frame;
  traj.n_max = psi0.n_max;
  traj.excited_population.resize(grid.n_samples);
  traj.spin_density.resize(grid.n_samples);
  if (record_snapshots) traj.snapshots.resize(grid.n_samples);

  // split the complex gemv into two real ones to keep the hot loop allocation-free
  Eigen::VectorXd pr(dim), pi(dim), ar(dim), ai(dim);
  Eigen::VectorXcd amp(dim);
  for (int i = 0; i < grid.n_samples; ++i) {
    const double t = grid.time(i);
    for (int k = 0; k < dim; ++k) {
      const double ph = -values[k] * t;
      const Complex z = c[k] * Complex(std::cos(ph), std::sin(ph));
      pr[k] = z.real();
      pi[k] = z.imag();
    }
    ar.noalias() = vectors * pr;
    ai.noalias() = vectors * pi;
    for (int k = 0; k < dim; ++k) amp[k] = Complex(ar[k], ai[k]);
    traj.excited_population[i] = amp.head(m).squaredNorm();
    traj.spin_density[i] = reduced_spin_density(amp, psi0.n_max);
    traj.max_edge_occupation =
        std::max(traj.max_edge_occupation, detail::edge_occupation(amp, psi0.n_max));
    if (record_snapshots) traj.snapshots[i] = amp;
  }
  return traj;
}

inline Trajectory evolve_time_independent(const Eigen::MatrixXcd& h, const JointState& psi0,
                                          const TimeGrid& grid, bool record_snapshots = false) {
  if (h.imag().cwiseAbs().maxCoeff() != 0.0)
    throw std::invalid_argument("evolve_time_independent: expected a real Hamiltonian");
  Eigen::MatrixXd a = h.real();
  const Eigen::VectorXd w = eig_symmetric_inplace(a);
  return evolve_from_eigensystem(a, w, psi0, grid, record_snapshots);
}

// Analytic eigensystem of the RWA Hamiltonian on a truncated ladder, matching
// the numeric diagonalization exactly: isolated |-z,0> ground, one 2x2 block
// per excitation pair, and the lone truncated |+z,n_max> state.
inline void rwa_eigensystem(const ModelParams& p, int n_max, Eigen::MatrixXd& vectors,
                            Eigen::VectorXd& values) {
  p.validate();
  if (n_max < 1) throw std::invalid_argument("rwa_eigensystem: n_max must be >= 1");
  const int m = n_max + 1;
  const int dim = 2 * m;
  struct Entry {
    double value;
    int i1, i2;       // basis indices
    double a1, a2;    // vector components
  };
  std::vector<Entry> entries;
  entries.reserve(dim);
  entries.push_back({-0.5 * p.Omega, spin_down_index(0, n_max), -1, 1.0, 0.0});
  entries.push_back({0.5 * p.Omega + n_max * p.omega0, spin_up_index(n_max), -1, 1.0, 0.0});
  for (int n = 0; n < n_max; ++n) {
    const double eu = 0.5 * p.Omega + n * p.omega0;
    const double ed = -0.5 * p.Omega + (n + 1.0) * p.omega0;
    const double g = p.lambda * std::sqrt(n + 1.0);
    const double mid = 0.5 * (eu + ed);
    const double half = 0.5 * (eu - ed);
    const double r = std::sqrt(half * half + g * g);
    // eigenvectors of [[half, g], [g, -half]] in the pair basis
    const double theta = 0.5 * std::atan2(g, half);
    const double cs = std::cos(theta), sn = std::sin(theta);
    const int iu = spin_up_index(n), id = spin_down_index(n + 1, n_max);
    entries.push_back({mid - r, iu, id, -sn, cs});
    entries.push_back({mid + r, iu, id, cs, sn});
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.value < b.value; });
  values.resize(dim);
  vectors = Eigen::MatrixXd::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) {
    values[k] = entries[k].value;
    vectors(entries[k].i1, k) = entries[k].a1;
    if (entries[k].i2 >= 0) vectors(entries[k].i2, k) = entries[k].a2;
  }
}

namespace detail {

// Fourth-order commutator-free scheme: two Gauss-Legendre nodes, two
// exponentials per step.  The rightmost factor weights the early node.
constexpr double cf4_node1 = 0.21132486540518712;   // 1/2 - sqrt(3)/6
constexpr double cf4_node2 = 0.78867513459481288;   // 1/2 + sqrt(3)/6
constexpr double cf4_w_big = 0.53867513459481288;   // 1/4 + sqrt(3)/6
constexpr double cf4_w_small = -0.03867513459481288;  // 1/4 - sqrt(3)/6

// exp(-i dt H) for Hermitian 2x2 H.
inline Eigen::Matrix2cd exp_two_level(const Eigen::Matrix2cd& h, double dt) {
  const double a = 0.5 * std::real(h(0, 0) + h(1, 1));
  const double bz = 0.5 * std::real(h(0, 0) - h(1, 1));
  const double bx = std::real(h(0, 1));
  const double by = -std::imag(h(0, 1));
  const double b = std::sqrt(bx * bx + by * by + bz * bz);
  const double phase = -a * dt;
  const Complex g(std::cos(phase), std::sin(phase));
  const double c = std::cos(b * dt);
  const double s = b < 1e-14 ? dt : std::sin(b * dt) / b;
  Eigen::Matrix2cd u;
  u(0, 0) = g * Complex(c, -s * bz);
  u(1, 1) = g * Complex(c, s * bz);
  u(0, 1) = g * Complex(-s * by, -s * bx);
  u(1, 0) = g * Complex(s * by, -s * bx);
  return u;
}

// One CF4 step psi <- U(t + dt, t) psi for a dense generator.
template <class GenFn>
void cf4_step_two_level(const GenFn& gen, double t, double dt, Eigen::Vector2cd& psi) {
  const Eigen::Matrix2cd h1 = gen(t + cf4_node1 * dt);
  const Eigen::Matrix2cd h2 = gen(t + cf4_node2 * dt);
  psi = exp_two_level(cf4_w_big * h1 + cf4_w_small * h2, dt) * psi;
  psi = exp_two_level(cf4_w_small * h1 + cf4_w_big * h2, dt) * psi;
}

using ApplyFn = std::function<void(const Eigen::VectorXcd&, Eigen::VectorXcd&)>;

// psi <- exp(-i dt H) psi by a Lanczos expansion with full reorthogonalization.
inline void lanczos_expv(const ApplyFn& apply, double dt, Eigen::VectorXcd& psi,
                         double tol = 1e-13, int max_m = 64) {
  const double beta0 = psi.norm();
  if (beta0 == 0.0) return;
  const int dim = static_cast<int>(psi.size());
  const int cap = std::min(max_m, dim);
  Eigen::MatrixXcd v(dim, cap);
  Eigen::VectorXd alpha(cap), beta(cap);
  v.col(0) = psi / beta0;
  Eigen::VectorXcd w(dim);
  int m = 0;
  for (int j = 0; j < cap; ++j) {
    apply(v.col(j), w);
    alpha[j] = std::real(v.col(j).dot(w));
    w -= alpha[j] * v.col(j);
    if (j > 0) w -= beta[j - 1] * v.col(j - 1);
    // full reorthogonalization keeps the basis clean for long steps
    for (int r = 0; r <= j; ++r) w -= v.col(r).dot(w) * v.col(r);
    m = j + 1;
    beta[j] = w.norm();
    if (j + 1 < cap) {
      if (beta[j] < 1e-14 * std::abs(alpha[j] == 0.0 ? 1.0 : alpha[j])) break;  // invariant subspace
      v.col(j + 1) = w / beta[j];
    }
    // cheap convergence estimate every few iterations
    if (m >= 6 && (m % 2 == 0 || m == cap)) {
      Eigen::MatrixXd tmat = Eigen::MatrixXd::Zero(m, m);
      for (int i = 0; i < m; ++i) {
        tmat(i, i) = alpha[i];
        if (i + 1 < m) tmat(i, i + 1) = tmat(i + 1, i) = beta[i];
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tmat);
      Eigen::VectorXcd small(m);
      for (int k = 0; k < m; ++k) {
        const double ph = -es.eigenvalues()[k] * dt;
        small[k] = Complex(std::cos(ph), std::sin(ph)) * es.eigenvectors()(0, k);
      }
      const Eigen::VectorXcd combined = es.eigenvectors().cast<Complex>() * small;
      const double err = beta[m - 1] * std::abs(combined[m - 1]);
      if (err < tol || beta[m - 1] < 1e-14) {
        psi = beta0 * (v.leftCols(m) * combined);
        return;
      }
    }
  }
  // fall through: use the largest subspace built
  Eigen::MatrixXd tmat = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    tmat(i, i) = alpha[i];
    if (i + 1 < m) tmat(i, i + 1) = tmat(i + 1, i) = beta[i];
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(tmat);
  Eigen::VectorXcd small(m);
  for (int k = 0; k < m; ++k) {
    const double ph = -es.eigenvalues()[k] * dt;
    small[k] = Complex(std::cos(ph), std::sin(ph)) * es.eigenvectors()(0, k);
  }
  psi = beta0 * (v.leftCols(m) * (es.eigenvectors().cast<Complex>() * small));
}

}  // namespace detail

// Structured matvec for the displaced rotating-frame generator.  A linear
// combination of the generator at several times stays within the same sparsity
// pattern, which is what the commutator-free stepper needs.
class DisplacedGenerator {
 public:
  DisplacedGenerator(const ModelParams& p, double alpha, int n_max, bool rwa)
      : p_(p), alpha_(alpha), n_max_(n_max), rwa_(rwa) {
    p.validate();
    if (!(alpha >= 0.0)) throw std::invalid_argument("DisplacedGenerator: alpha must be >= 0");
    if (n_max < 1) throw std::invalid_argument("DisplacedGenerator: n_max must be >= 1");
    g_.resize(n_max);
    for (int n = 0; n < n_max; ++n) g_[n] = p.lambda * std::sqrt(n + 1.0);
  }

  int dim() const { return 2 * (n_max_ + 1); }
  int n_max() const { return n_max_; }
  bool rwa() const { return rwa_; }

  struct Combo {
    double spin = 0.0;    // weight on the static spin splitting
    Complex drive{0, 0};  // weighted classical-drive phase (real in the full model)
    Complex resid{0, 0};  // weighted residual-coupling phase
  };

  // Combo for sum_i w_i H(t_i).
  Combo combo(std::initializer_list<std::pair<double, double>> weighted_times) const {
    Combo c;
    for (const auto& [w, t] : weighted_times) {
      c.spin += w;
      const Complex phase(std::cos(p_.omega0 * t), std::sin(p_.omega0 * t));
      c.resid += w * phase;
      if (rwa_)
        c.drive += p_.lambda * alpha_ * w * phase;
      else
        c.drive += 2.0 * p_.lambda * alpha_ * w * std::cos(p_.omega0 * t);
    }
    return c;
  }

  void apply(const Combo& c, const Eigen::VectorXcd& x, Eigen::VectorXcd& y) const {
    const int m = n_max_ + 1;
    y.resize(2 * m);
    const double hz = 0.5 * p_.Omega * c.spin;
    const Complex drive = c.drive;
    const Complex cdrive = std::conj(drive);
    for (int n = 0; n < m; ++n) {
      y[n] = hz * x[n];
      y[m + n] = -hz * x[m + n];
    }
    if (rwa_) {
      for (int n = 0; n < m; ++n) {
        y[m + n] += drive * x[n];
        y[n] += cdrive * x[m + n];
      }
      for (int n = 0; n < n_max_; ++n) {
        y[m + n + 1] += g_[n] * c.resid * x[n];
        y[n] += g_[n] * std::conj(c.resid) * x[m + n + 1];
      }
    } else {
      for (int n = 0; n < m; ++n) {
        y[m + n] += drive * x[n];
        y[n] += drive * x[m + n];  // drive is real here
      }
      for (int n = 0; n < n_max_; ++n) {
        const Complex gp = g_[n] * c.resid;
        const Complex gc = std::conj(gp);
        y[n + 1] += gp * x[m + n];
        y[m + n + 1] += gp * x[n];
        y[m + n] += gc * x[n + 1];
        y[n] += gc * x[m + n + 1];
      }
    }
  }

 private:
  ModelParams p_;
  double alpha_;
  int n_max_;
  bool rwa_;
  std::vector<double> g_;
};

namespace detail {

struct DisplacedStepper {
  const DisplacedGenerator& gen;
  double lanczos_tol = 1e-13;

  void operator()(Eigen::VectorXcd& psi, double t, double dt) const {
    const auto ca = gen.combo({{cf4_w_big, t + cf4_node1 * dt}, {cf4_w_small, t + cf4_node2 * dt}});
    const auto cb = gen.combo({{cf4_w_small, t + cf4_node1 * dt}, {cf4_w_big, t + cf4_node2 * dt}});
    auto apply_a = [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) { gen.apply(ca, x, y); };
    auto apply_b = [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) { gen.apply(cb, x, y); };
    lanczos_expv(apply_a, dt, psi, lanczos_tol);
    lanczos_expv(apply_b, dt, psi, lanczos_tol);
  }
};

struct DenseStepper {
  const std::function<Eigen::MatrixXcd(double)>& gen;
  double lanczos_tol = 1e-13;

  void operator()(Eigen::VectorXcd& psi, double t, double dt) const {
    const Eigen::MatrixXcd h1 = gen(t + cf4_node1 * dt);
    const Eigen::MatrixXcd h2 = gen(t + cf4_node2 * dt);
    if (psi.size() == 2) {
      Eigen::Vector2cd v = psi;
      v = exp_two_level(cf4_w_big * h1 + cf4_w_small * h2, dt) * v;
      v = exp_two_level(cf4_w_small * h1 + cf4_w_big * h2, dt) * v;
      psi = v;
      return;
    }
    const Eigen::MatrixXcd ha = cf4_w_big * h1 + cf4_w_small * h2;
    const Eigen::MatrixXcd hb = cf4_w_small * h1 + cf4_w_big * h2;
    auto apply_a = [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) { y.noalias() = ha * x; };
    auto apply_b = [&](const Eigen::VectorXcd& x, Eigen::VectorXcd& y) { y.noalias() = hb * x; };
    lanczos_expv(apply_a, dt, psi, lanczos_tol);
    lanczos_expv(apply_b, dt, psi, lanczos_tol);
  }
};

template <class Stepper>
std::vector<Eigen::VectorXcd> propagate_sampled(const Eigen::VectorXcd& psi0,
                                                const TimeGrid& grid, const Stepper& step,
                                                int substeps) {
  std::vector<Eigen::VectorXcd> snaps(grid.n_samples);
  Eigen::VectorXcd psi = psi0;
  snaps[0] = psi;
  for (int i = 1; i < grid.n_samples; ++i) {
    const double t0 = grid.time(i - 1);
    const double dts = (grid.time(i) - t0) / substeps;
    for (int s = 0; s < substeps; ++s) step(psi, t0 + s * dts, dts);
    snaps[i] = psi;
  }
  return snaps;
}

// Halve the step until the sampled trajectory stops moving.
template <class Stepper>
std::vector<Eigen::VectorXcd> propagate_adaptive(const Eigen::VectorXcd& psi0,
                                                 const TimeGrid& grid, const Stepper& step,
                                                 double step_tol, int substeps0 = 2) {
  auto prev = propagate_sampled(psi0, grid, step, substeps0);
  for (int k = 2 * substeps0; k <= (1 << 20); k *= 2) {
    auto cur = propagate_sampled(psi0, grid, step, k);
    double diff = 0.0;
    for (std::size_t i = 0; i < cur.size(); ++i)
      diff = std::max(diff, (cur[i] - prev[i]).norm());
    if (diff <= step_tol * grid.t_end) return cur;
    prev = std::move(cur);
  }
  throw std::runtime_error("time-dependent propagation: step refinement did not converge");
}

inline Trajectory trajectory_from_snapshots(std::vector<Eigen::VectorXcd> snaps,
                                            const TimeGrid& grid, Frame frame, int n_max,
                                            bool keep_snapshots) {
  Trajectory traj;
  traj.grid = grid;
  traj.frame = frame;
  traj.n_max = n_max;
  traj.excited_population.resize(grid.n_samples);
  traj.spin_density.resize(grid.n_samples);
  const int m = n_max + 1;
  for (int i = 0; i < grid.n_samples; ++i) {
    traj.excited_population[i] = snaps[i].head(m).squaredNorm();
    traj.spin_density[i] = reduced_spin_density(snaps[i], n_max);
    if (n_max >= 1)
      traj.max_edge_occupation =
          std::max(traj.max_edge_occupation, edge_occupation(snaps[i], n_max));
  }
  if (keep_snapshots) traj.snapshots = std::move(snaps);
  return traj;
}

}  // namespace detail

// Propagate under a callable generator H(t).  Dimension 2 uses closed-form
// exponentials; anything larger goes through the Lanczos path.
inline Trajectory evolve_time_dependent(const std::function<Eigen::MatrixXcd(double)>& gen,
                                        const JointState& psi0, const TimeGrid& grid,
                                        double step_tol = 1e-9, bool record_snapshots = false) {
  psi0.validate();
  detail::DenseStepper stepper{gen};
  auto snaps = detail::propagate_adaptive(psi0.amplitudes, grid, stepper, step_tol);
  return detail::trajectory_from_snapshots(std::move(snaps), grid, psi0.frame, psi0.n_max,
                                           record_snapshots);
}

inline Trajectory run_semiclassical(const SemiclassicalParams& p, bool rwa, const TimeGrid& grid,
                                    double step_tol = 1e-9) {
  p.validate();
  grid.validate(p.omega0 + p.Omega);
  const std::function<Eigen::MatrixXcd(double)> gen = [p, rwa](double t) {
    return Eigen::MatrixXcd(semiclassical_generator(p, t, rwa));
  };
  Eigen::VectorXcd psi0(2);
  psi0 << 1.0, 0.0;
  detail::DenseStepper stepper{gen};
  auto snaps = detail::propagate_adaptive(psi0, grid, stepper, step_tol);
  Trajectory traj;
  traj.grid = grid;
  traj.frame = Frame::lab;
  traj.model = rwa ? "semiclassical_rwa" : "semiclassical_full";
  traj.n_max = -1;
  traj.excited_population.resize(grid.n_samples);
  traj.spin_density.resize(grid.n_samples);
  traj.snapshots = std::move(snaps);
  for (int i = 0; i < grid.n_samples; ++i) {
    traj.excited_population[i] = std::norm(traj.snapshots[i][0]);
    traj.spin_density[i] = traj.snapshots[i] * traj.snapshots[i].adjoint();
  }
  return traj;
}

struct RunOptions {
  bool record_snapshots = false;
  int n_max_override = 0;       // 0 -> heuristic
  double step_tol = 1e-9;       // per unit time, time-dependent paths
  int max_lab_dim = 4200;       // lab-frame dimension budget
  bool verify_truncation = false;
  double truncation_tol = 1e-8;
  double leakage_tol = 1e-8;
  int displaced_n_start = 64;
  int displaced_n_cap = 8192;
  double displaced_tol = 1e-8;  // ladder-doubling tolerance on observables
};

namespace detail {

inline Trajectory run_quantum_lab(const ModelParams& p, const FieldSpec& field, bool rwa,
                                  const TimeGrid& grid, const RunOptions& opts, int n_max) {
  const JointState psi0 = initial_joint_state(field, n_max, Frame::lab);
  const Eigen::MatrixXcd h =
      rwa ? build_rwa_hamiltonian(p, n_max) : build_full_hamiltonian(p, n_max);
  Trajectory traj = evolve_time_independent(h, psi0, grid, opts.record_snapshots);
  traj.model = rwa ? "quantum_rwa" : "quantum_full";
  if (traj.max_edge_occupation > opts.leakage_tol)
    throw std::runtime_error("run_quantum: ladder leakage " +
                             std::to_string(traj.max_edge_occupation) + " at n_max=" +
                             std::to_string(n_max));
  return traj;
}

inline Trajectory run_quantum_displaced(const ModelParams& p, const FieldSpec& field, bool rwa,
                                        const TimeGrid& grid, const RunOptions& opts) {
  if (field.kind != FieldSpec::Kind::coherent)
    throw std::invalid_argument("run_quantum: displaced frame needs a coherent field");
  Trajectory prev;
  bool have_prev = false;
  for (int n = opts.n_max_override > 0 ? opts.n_max_override : opts.displaced_n_start;
       n <= opts.displaced_n_cap; n *= 2) {
    DisplacedGenerator gen(p, field.alpha, n, rwa);
    detail::DisplacedStepper stepper{gen};
    const JointState psi0 = initial_joint_state(field, n, Frame::displaced_rotating);
    auto snaps = detail::propagate_adaptive(psi0.amplitudes, grid, stepper,
                                            opts.step_tol);
    Trajectory traj = detail::trajectory_from_snapshots(
        std::move(snaps), grid, Frame::displaced_rotating, n, opts.record_snapshots);
    traj.model = rwa ? "quantum_rwa" : "quantum_full";
    if (opts.n_max_override > 0) return traj;
    if (have_prev) {
      double diff = 0.0;
      for (int i = 0; i < grid.n_samples; ++i) {
        diff = std::max(diff, std::abs(traj.excited_population[i] - prev.excited_population[i]));
        diff = std::max(diff,
                        (traj.spin_density[i] - prev.spin_density[i]).cwiseAbs().maxCoeff());
      }
      if (diff <= opts.displaced_tol) return traj;
    }
    prev = std::move(traj);
    have_prev = true;
  }
  throw std::runtime_error("run_quantum: displaced ladder did not converge under doubling");
}

}  // namespace detail

// Quantum Rabi / RWA evolution of |+z> (x) field.  Lab frame diagonalizes the
// autonomous Hamiltonian; when the lab ladder for a coherent field would blow
// the dimension budget the displaced rotating frame is used instead (or it can
// be requested explicitly).
inline Trajectory run_quantum(const ModelParams& p, const FieldSpec& field, bool rwa,
                              const TimeGrid& grid, const RunOptions& opts = {},
                              std::optional<Frame> frame = {}) {
  p.validate();
  grid.validate(p.omega0 + p.Omega);
  Frame chosen;
  if (frame.has_value()) {
    chosen = *frame;
  } else if (field.kind == FieldSpec::Kind::fock) {
    chosen = Frame::lab;
  } else {
    const int lab_n = opts.n_max_override > 0 ? opts.n_max_override
                                              : default_lab_n_max(field.alpha);
    chosen = 2 * (lab_n + 1) <= opts.max_lab_dim ? Frame::lab : Frame::displaced_rotating;
  }
  if (chosen == Frame::displaced_rotating)
    return detail::run_quantum_displaced(p, field, rwa, grid, opts);

  int n_max = opts.n_max_override;
  if (n_max == 0)
    n_max = field.kind == FieldSpec::Kind::fock ? 4 * field.n + 60
                                                : default_lab_n_max(field.alpha);
  if (2 * (n_max + 1) > opts.max_lab_dim)
    throw std::invalid_argument("run_quantum: lab ladder exceeds the dimension budget");
  Trajectory traj = detail::run_quantum_lab(p, field, rwa, grid, opts, n_max);
  if (opts.verify_truncation) {
    const Trajectory doubled = detail::run_quantum_lab(p, field, rwa, grid, opts, 2 * n_max);
    for (int i = 0; i < grid.n_samples; ++i)
      if (std::abs(traj.excited_population[i] - doubled.excited_population[i]) >
          opts.truncation_tol)
        throw std::runtime_error("run_quantum: population not converged under ladder doubling");
  }
  return traj;
}

// Spin-up population of an autonomous run as a band-limited cosine series: with
// real eigenvectors V and real initial state, P(t) = sum_jk w_jk cos((E_j-E_k)t)
// over eigenpairs with significant weight.  Costs O(pairs) per sample, which is
// far below the dense spectral path for long horizons.
inline std::vector<double> excited_population_series(const Eigen::MatrixXd& vectors,
                                                     const Eigen::VectorXd& values,
                                                     const Eigen::VectorXd& psi0,
                                                     const TimeGrid& grid,
                                                     double amp_cutoff = 1e-8,
                                                     double weight_cutoff = 1e-11) {
  if (vectors.rows() != psi0.size())
    throw std::invalid_argument("excited_population_series: dimension mismatch");
  if (vectors.rows() % 2 != 0)
    throw std::invalid_argument("excited_population_series: expected spin-major layout");
  const int m = static_cast<int>(vectors.rows()) / 2;
  const Eigen::VectorXd c = vectors.transpose() * psi0;
  std::vector<int> kept;
  for (int k = 0; k < c.size(); ++k)
    if (std::abs(c[k]) > amp_cutoff) kept.push_back(k);
  if (kept.empty()) return std::vector<double>(grid.n_samples, 0.0);
  const int K = static_cast<int>(kept.size());
  Eigen::MatrixXd b(m, K);
  for (int j = 0; j < K; ++j) b.col(j) = vectors.col(kept[j]).head(m) * c[kept[j]];
  Eigen::MatrixXd gram(K, K);
  gram.noalias() = b.transpose() * b;

  double base = 0.0;
  for (int j = 0; j < K; ++j) base += gram(j, j);
  struct Pair {
    double w, omega, zr, zi, rr, ri;
  };
  std::vector<Pair> pairs;
  const double dt = grid.dt();
  for (int j = 0; j < K; ++j)
    for (int k = j + 1; k < K; ++k) {
      const double w = 2.0 * gram(j, k);
      if (std::abs(w) <= weight_cutoff) continue;
      const double omega = values[kept[j]] - values[kept[k]];
      pairs.push_back({w, omega, 1.0, 0.0, std::cos(omega * dt), std::sin(omega * dt)});
    }

  std::vector<double> pop(grid.n_samples);
  for (int i = 0; i < grid.n_samples; ++i) {
    if (i > 0 && i % 4096 == 0) {  // resynchronize the phasors now and then
      const double t = grid.time(i);
      for (auto& pr : pairs) {
        pr.zr = std::cos(pr.omega * t);
        pr.zi = std::sin(pr.omega * t);
      }
    } else if (i > 0) {
      for (auto& pr : pairs) {
        const double zr = pr.zr * pr.rr - pr.zi * pr.ri;
        pr.zi = pr.zr * pr.ri + pr.zi * pr.rr;
        pr.zr = zr;
      }
    }
    double acc = base;
    for (const auto& pr : pairs) acc += pr.w * pr.zr;
    pop[i] = acc;
  }
  return pop;
}

inline double max_norm_error(const Trajectory& traj) {
  if (traj.snapshots.empty())
    throw std::invalid_argument("max_norm_error: trajectory has no snapshots");
  double worst = 0.0;
  for (const auto& s : traj.snapshots) worst = std::max(worst, std::abs(s.norm() - 1.0));
  return worst;
}

inline double max_diagonal_form_drift(const Trajectory& traj, const Eigen::VectorXd& diag) {
  if (traj.snapshots.empty())
    throw std::invalid_argument("max_diagonal_form_drift: trajectory has no snapshots");
  auto form = [&](const Eigen::VectorXcd& s) {
    double acc = 0.0;
    for (int i = 0; i < s.size(); ++i) acc += diag[i] * std::norm(s[i]);
    return acc;
  };
  const double first = form(traj.snapshots.front());
  double worst = 0.0;
  for (const auto& s : traj.snapshots) worst = std::max(worst, std::abs(form(s) - first));
  return worst;
}

inline double max_quadratic_form_drift(const Trajectory& traj, const Eigen::MatrixXcd& op) {
  if (traj.snapshots.empty())
    throw std::invalid_argument("max_quadratic_form_drift: trajectory has no snapshots");
  auto form = [&](const Eigen::VectorXcd& s) { return std::real(s.dot(op * s)); };
  const double first = form(traj.snapshots.front());
  double worst = 0.0;
  for (const auto& s : traj.snapshots) worst = std::max(worst, std::abs(form(s) - first));
  return worst;
}

}  // namespace rabi
