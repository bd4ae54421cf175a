// model.hpp -- parameter sets, joint spin-field states, and Hamiltonian builders
// for the quantum Rabi model, its rotating-wave (Jaynes-Cummings) form, the
// classical-drive two-level pair, and the displaced rotating-frame generator.
//
// Conventions: hbar = 1, basis ordering is spin-major with the excited spin
// block first, i.e. index(s, n) = s*(n_max+1) + n where s=0 is |+z> and s=1 is
// |-z>.  Raising/lowering operators are sigma_pm = (sigma_x +- i sigma_y)/2.

#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "rabi/linalg.hpp"

namespace rabi {

struct ModelParams {
  double omega0 = 1.0;  // field angular frequency
  double Omega = 1.0;   // spin level splitting
  double lambda = 0.0;  // spin-field coupling

  void validate() const {
    if (!(omega0 > 0.0)) throw std::invalid_argument("ModelParams: omega0 must be positive");
    if (!(Omega > 0.0)) throw std::invalid_argument("ModelParams: Omega must be positive");
    if (!(lambda >= 0.0)) throw std::invalid_argument("ModelParams: lambda must be non-negative");
  }
  bool resonant() const { return Omega == omega0; }
};

struct SemiclassicalParams {
  double A = 0.0;       // drive amplitude (lambda * |alpha| in the matched quantum model)
  double omega0 = 1.0;  // drive angular frequency
  double Omega = 1.0;   // spin level splitting

  void validate() const {
    if (!(A >= 0.0)) throw std::invalid_argument("SemiclassicalParams: A must be non-negative");
    if (!(omega0 > 0.0)) throw std::invalid_argument("SemiclassicalParams: omega0 must be positive");
    if (!(Omega > 0.0)) throw std::invalid_argument("SemiclassicalParams: Omega must be positive");
  }
};

// Initial field state: a Fock state |n> or a coherent state |alpha> (alpha real).
struct FieldSpec {
  enum class Kind { fock, coherent };
  Kind kind = Kind::coherent;
  int n = 0;
  double alpha = 0.0;

  static FieldSpec fock(int n) {
    if (n < 0) throw std::invalid_argument("FieldSpec: Fock index must be non-negative");
    FieldSpec f;
    f.kind = Kind::fock;
    f.n = n;
    return f;
  }
  static FieldSpec coherent(double alpha) {
    if (!(alpha >= 0.0)) throw std::invalid_argument("FieldSpec: alpha must be non-negative");
    FieldSpec f;
    f.kind = Kind::coherent;
    f.alpha = alpha;
    return f;
  }
  double mean_photon_number() const {
    return kind == Kind::fock ? static_cast<double>(n) : alpha * alpha;
  }
};

enum class Frame { lab, displaced_rotating };

inline int spin_up_index(int n) { return n; }
inline int spin_down_index(int n, int n_max) { return (n_max + 1) + n; }

// Normalized joint spin-field state over a truncated Fock ladder.
struct JointState {
  Eigen::VectorXcd amplitudes;  // spin-major layout, dimension 2*(n_max+1)
  Frame frame = Frame::lab;
  int n_max = 0;

  int dim() const { return 2 * (n_max + 1); }
  double norm() const { return amplitudes.norm(); }
  void normalize() { amplitudes /= amplitudes.norm(); }

  Complex& up(int n) { return amplitudes[spin_up_index(n)]; }
  Complex& down(int n) { return amplitudes[spin_down_index(n, n_max)]; }
  Complex up(int n) const { return amplitudes[spin_up_index(n)]; }
  Complex down(int n) const { return amplitudes[spin_down_index(n, n_max)]; }

  void validate() const {
    if (n_max < 0) throw std::invalid_argument("JointState: n_max must be non-negative");
    if (amplitudes.size() != dim())
      throw std::invalid_argument("JointState: amplitude vector has wrong dimension");
    if (std::abs(norm() - 1.0) > 1e-10)
      throw std::invalid_argument("JointState: state is not normalized");
  }
};

// Fock amplitudes of |alpha> on the ladder 0..n_max, computed in log space and
// renormalized.  Throws when the truncated tail carries more than 1e-10 weight.
inline Eigen::VectorXd coherent_amplitudes(double alpha, int n_max) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("coherent_amplitudes: alpha must be non-negative");
  if (n_max < 0) throw std::invalid_argument("coherent_amplitudes: n_max must be non-negative");
  Eigen::VectorXd c(n_max + 1);
  if (alpha == 0.0) {
    c.setZero();
    c[0] = 1.0;
    return c;
  }
  const double log_alpha = std::log(alpha);
  for (int n = 0; n <= n_max; ++n)
    c[n] = std::exp(-0.5 * alpha * alpha + n * log_alpha - 0.5 * std::lgamma(n + 1.0));
  const double kept = c.squaredNorm();
  if (1.0 - kept > 1e-10)
    throw std::runtime_error("coherent_amplitudes: truncated tail weight " +
                             std::to_string(1.0 - kept) + " exceeds 1e-10; raise n_max");
  c /= std::sqrt(kept);
  return c;
}

// Ladder size heuristic for lab-frame propagation of |alpha>.
inline int default_lab_n_max(double alpha) {
  return static_cast<int>(std::ceil(alpha * alpha + 10.0 * alpha + 20.0));
}

// |+z> (x) field.  In the displaced rotating frame the coherent field maps to
// the displaced vacuum, so only coherent inputs are meaningful there.
inline JointState initial_joint_state(const FieldSpec& field, int n_max, Frame frame = Frame::lab) {
  if (n_max < 0) throw std::invalid_argument("initial_joint_state: n_max must be non-negative");
  JointState s;
  s.frame = frame;
  s.n_max = n_max;
  s.amplitudes = Eigen::VectorXcd::Zero(2 * (n_max + 1));
  if (frame == Frame::displaced_rotating) {
    if (field.kind != FieldSpec::Kind::coherent)
      throw std::invalid_argument("initial_joint_state: displaced frame expects a coherent field");
    s.up(0) = 1.0;
    return s;
  }
  if (field.kind == FieldSpec::Kind::fock) {
    if (field.n > n_max)
      throw std::invalid_argument("initial_joint_state: Fock index exceeds n_max");
    s.up(field.n) = 1.0;
  } else {
    s.amplitudes.head(n_max + 1) = coherent_amplitudes(field.alpha, n_max).cast<Complex>();
  }
  return s;
}

// H = (Omega/2) sigma_z + omega0 a^dag a + lambda (a + a^dag) sigma_x
inline Eigen::MatrixXcd build_full_hamiltonian(const ModelParams& p, int n_max) {
  p.validate();
  if (n_max < 1) throw std::invalid_argument("build_full_hamiltonian: n_max must be >= 1");
  const int m = n_max + 1;
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(2 * m, 2 * m);
  for (int n = 0; n <= n_max; ++n) {
    h(spin_up_index(n), spin_up_index(n)) = 0.5 * p.Omega + n * p.omega0;
    h(spin_down_index(n, n_max), spin_down_index(n, n_max)) = -0.5 * p.Omega + n * p.omega0;
  }
  for (int n = 0; n < n_max; ++n) {
    const double g = p.lambda * std::sqrt(n + 1.0);
    // sigma_x flips the spin; (a + a^dag) moves the photon number by one.
    h(spin_up_index(n + 1), spin_down_index(n, n_max)) = g;
    h(spin_down_index(n, n_max), spin_up_index(n + 1)) = g;
    h(spin_down_index(n + 1, n_max), spin_up_index(n)) = g;
    h(spin_up_index(n), spin_down_index(n + 1, n_max)) = g;
  }
  return h;
}

// H_RWA = (Omega/2) sigma_z + omega0 a^dag a + lambda (a^dag sigma_- + a sigma_+)
inline Eigen::MatrixXcd build_rwa_hamiltonian(const ModelParams& p, int n_max) {
  p.validate();
  if (n_max < 1) throw std::invalid_argument("build_rwa_hamiltonian: n_max must be >= 1");
  const int m = n_max + 1;
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(2 * m, 2 * m);
  for (int n = 0; n <= n_max; ++n) {
    h(spin_up_index(n), spin_up_index(n)) = 0.5 * p.Omega + n * p.omega0;
    h(spin_down_index(n, n_max), spin_down_index(n, n_max)) = -0.5 * p.Omega + n * p.omega0;
  }
  for (int n = 0; n < n_max; ++n) {
    const double g = p.lambda * std::sqrt(n + 1.0);
    h(spin_down_index(n + 1, n_max), spin_up_index(n)) = g;
    h(spin_up_index(n), spin_down_index(n + 1, n_max)) = g;
  }
  return h;
}

enum class BranchSign { minus, plus };

// Absolute eigenvalues of the RWA pair {|+z,n>, |-z,n+1>}: the pair centroid
// sits at (n + 1/2) omega0 and the branches split by sqrt(d^2 + lambda^2(n+1))
// with d = (Omega - omega0)/2.
inline double rwa_level_energy(int n, BranchSign sign, const ModelParams& p) {
  p.validate();
  if (n < 0) throw std::invalid_argument("rwa_level_energy: n must be non-negative");
  const double centroid = (n + 0.5) * p.omega0;
  const double d = 0.5 * (p.Omega - p.omega0);
  const double half_gap = std::sqrt(d * d + p.lambda * p.lambda * (n + 1.0));
  return sign == BranchSign::plus ? centroid + half_gap : centroid - half_gap;
}

struct RwaEigenpair {
  double energy;  // measured from the uncoupled ground level -Omega/2
  JointState state;
};

// Resonant RWA eigenpair n: energy (n+1) omega0 +- lambda sqrt(n+1) above the
// isolated ground state |-z,0>, eigenvector (|+z,n> +- |-z,n+1>)/sqrt(2).
inline RwaEigenpair rwa_eigenpair(int n, BranchSign sign, const ModelParams& p) {
  p.validate();
  if (n < 0) throw std::invalid_argument("rwa_eigenpair: n must be non-negative");
  if (!p.resonant()) throw std::invalid_argument("rwa_eigenpair: requires Omega == omega0");
  RwaEigenpair out;
  const double s = sign == BranchSign::plus ? 1.0 : -1.0;
  out.energy = (n + 1.0) * p.omega0 + s * p.lambda * std::sqrt(n + 1.0);
  out.state.frame = Frame::lab;
  out.state.n_max = n + 1;
  out.state.amplitudes = Eigen::VectorXcd::Zero(2 * (n + 2));
  const double r = 1.0 / std::sqrt(2.0);
  out.state.up(n) = r;
  out.state.down(n + 1) = s * r;
  return out;
}

// Two-level generator of the classically driven spin.
//   full: (Omega/2) sigma_z + 2A cos(omega0 t) sigma_x
//   RWA:  (Omega/2) sigma_z + A (e^{+i omega0 t} sigma_- + e^{-i omega0 t} sigma_+)
inline Eigen::Matrix2cd semiclassical_generator(const SemiclassicalParams& p, double t,
                                                bool rwa) {
  p.validate();
  Eigen::Matrix2cd h;
  if (rwa) {
    const Complex phase(std::cos(p.omega0 * t), std::sin(p.omega0 * t));
    h << 0.5 * p.Omega, p.A * std::conj(phase), p.A * phase, -0.5 * p.Omega;
  } else {
    const double drive = 2.0 * p.A * std::cos(p.omega0 * t);
    h << 0.5 * p.Omega, drive, drive, -0.5 * p.Omega;
  }
  return h;
}

// Generator in the frame reached by rotating at omega0 and displacing the field
// by alpha: the classical drive 2 lambda alpha cos(omega0 t) sigma_x plus the
// residual quantum term lambda (a^dag e^{+i omega0 t} + a e^{-i omega0 t}) sigma_x.
// With rwa=true both terms keep only their co-rotating halves.
inline Eigen::MatrixXcd build_displaced_generator(const ModelParams& p, double alpha, int n_max,
                                                  double t, bool rwa = false) {
  p.validate();
  if (!(alpha >= 0.0))
    throw std::invalid_argument("build_displaced_generator: alpha must be non-negative");
  if (n_max < 1) throw std::invalid_argument("build_displaced_generator: n_max must be >= 1");
  const int m = n_max + 1;
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(2 * m, 2 * m);
  for (int n = 0; n <= n_max; ++n) {
    h(spin_up_index(n), spin_up_index(n)) = 0.5 * p.Omega;
    h(spin_down_index(n, n_max), spin_down_index(n, n_max)) = -0.5 * p.Omega;
  }
  const Complex phase(std::cos(p.omega0 * t), std::sin(p.omega0 * t));
  const double A = p.lambda * alpha;
  if (rwa) {
    for (int n = 0; n <= n_max; ++n) {
      h(spin_down_index(n, n_max), spin_up_index(n)) += A * phase;
      h(spin_up_index(n), spin_down_index(n, n_max)) += A * std::conj(phase);
    }
    for (int n = 0; n < n_max; ++n) {
      const Complex g = p.lambda * std::sqrt(n + 1.0) * phase;
      h(spin_down_index(n + 1, n_max), spin_up_index(n)) += g;
      h(spin_up_index(n), spin_down_index(n + 1, n_max)) += std::conj(g);
    }
  } else {
    const double drive = 2.0 * A * std::cos(p.omega0 * t);
    for (int n = 0; n <= n_max; ++n) {
      h(spin_down_index(n, n_max), spin_up_index(n)) += drive;
      h(spin_up_index(n), spin_down_index(n, n_max)) += drive;
    }
    for (int n = 0; n < n_max; ++n) {
      const Complex g = p.lambda * std::sqrt(n + 1.0) * phase;
      h(spin_up_index(n + 1), spin_down_index(n, n_max)) += g;
      h(spin_down_index(n + 1, n_max), spin_up_index(n)) += g;
      h(spin_down_index(n, n_max), spin_up_index(n + 1)) += std::conj(g);
      h(spin_up_index(n), spin_down_index(n + 1, n_max)) += std::conj(g);
    }
  }
  return h;
}

// Diagonal of the parity operator sigma_z (x) (-1)^{a^dag a}.
inline Eigen::VectorXd parity_diagonal(int n_max) {
  if (n_max < 0) throw std::invalid_argument("parity_diagonal: n_max must be non-negative");
  const int m = n_max + 1;
  Eigen::VectorXd d(2 * m);
  for (int n = 0; n <= n_max; ++n) {
    const double field = (n % 2 == 0) ? 1.0 : -1.0;
    d[spin_up_index(n)] = field;
    d[spin_down_index(n, n_max)] = -field;
  }
  return d;
}

// Diagonal of the excitation number a^dag a + sigma_+ sigma_-.
inline Eigen::VectorXd excitation_number_diagonal(int n_max) {
  if (n_max < 0)
    throw std::invalid_argument("excitation_number_diagonal: n_max must be non-negative");
  const int m = n_max + 1;
  Eigen::VectorXd d(2 * m);
  for (int n = 0; n <= n_max; ++n) {
    d[spin_up_index(n)] = n + 1.0;
    d[spin_down_index(n, n_max)] = n;
  }
  return d;
}

inline double parity_expectation(const JointState& s) {
  if (s.frame != Frame::lab)
    throw std::invalid_argument("parity_expectation: defined in the lab frame only");
  const Eigen::VectorXd d = parity_diagonal(s.n_max);
  double acc = 0.0;
  for (int i = 0; i < s.dim(); ++i) acc += d[i] * std::norm(s.amplitudes[i]);
  return acc;
}

}  // namespace rabi
