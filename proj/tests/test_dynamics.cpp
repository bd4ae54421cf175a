#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "rabi/dynamics.hpp"

using namespace rabi;

namespace {

ModelParams resonant(double lambda) {
  ModelParams p;
  p.lambda = lambda;
  return p;
}

// Independent closed form for the resonant RWA model started in |+z>|alpha>:
// each pair precesses at lambda sqrt(n+1), weighted by the Poisson distribution.
double rwa_population_oracle(double t, double lambda, double alpha) {
  double acc = 0.0;
  const double mean = alpha * alpha;
  for (int n = 0; n < 400; ++n) {
    const double logp = -mean + n * std::log(mean) - std::lgamma(n + 1.0);
    const double p = std::exp(logp);
    const double c = std::cos(lambda * std::sqrt(n + 1.0) * t);
    acc += p * c * c;
    if (n > mean && p < 1e-16) break;
  }
  return acc;
}

const double kZaheerLambda = 0.2 / std::sqrt(10.0);
const double kZaheerAlpha = std::sqrt(10.0);

}  // namespace

TEST_CASE("time grids enforce the sampling density rule", "[dynamics]") {
  const auto g = TimeGrid::over(10.0, 2.0, 64);
  CHECK(g.dt() <= 2.0 * M_PI / (2.0 * 64) + 1e-12);
  CHECK(g.time(0) == 0.0);
  CHECK(g.time(g.n_samples - 1) == Catch::Approx(10.0).margin(1e-9));
  CHECK_NOTHROW(g.validate(2.0));

  TimeGrid coarse;
  coarse.t_end = 10.0;
  coarse.n_samples = 12;  // dt far above 2 pi / (20 (omega0 + Omega))
  CHECK_THROWS_AS(coarse.validate(2.0), std::invalid_argument);
  CHECK_THROWS_AS(TimeGrid::over(-1.0), std::invalid_argument);
}

TEST_CASE("timescales reproduce the collapse-revival hierarchy", "[dynamics]") {
  const auto ts = timescales(kZaheerLambda, kZaheerAlpha);
  CHECK(ts.rabi_period == Catch::Approx(M_PI / 0.2).margin(1e-12));
  CHECK(ts.collapse == Catch::Approx(std::sqrt(2.0) / kZaheerLambda).margin(1e-12));
  CHECK(ts.revival == Catch::Approx(100.0 * M_PI).margin(1e-9));
  CHECK(ts.rabi_period < ts.collapse);
  CHECK(ts.collapse < ts.revival);
  CHECK_THROWS_AS(timescales(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("spectral propagation fixes eigenstates and conserves charges", "[dynamics]") {
  const auto p = resonant(0.2);
  const int n_max = 40;
  const auto h = build_full_hamiltonian(p, n_max);

  // a Fock basis state under the diagonal part only stays put
  const auto h0 = build_full_hamiltonian(resonant(0.0), n_max);
  const auto grid = TimeGrid::over(30.0);
  auto still = evolve_time_independent(h0, initial_joint_state(FieldSpec::fock(2), n_max), grid);
  for (double pop : still.excited_population) CHECK(pop == Catch::Approx(1.0).margin(1e-12));

  const auto psi0 = initial_joint_state(FieldSpec::coherent(1.0), n_max);
  auto traj = evolve_time_independent(h, psi0, grid, true);
  CHECK(max_norm_error(traj) < 1e-12);
  CHECK(max_quadratic_form_drift(traj, h) < 1e-10);
  CHECK(max_diagonal_form_drift(traj, parity_diagonal(n_max)) < 1e-12);

  const auto hr = build_rwa_hamiltonian(p, n_max);
  auto traj_rwa = evolve_time_independent(hr, psi0, grid, true);
  CHECK(max_diagonal_form_drift(traj_rwa, excitation_number_diagonal(n_max)) < 1e-12);

  // reruns are bit-identical
  auto again = evolve_time_independent(h, psi0, grid);
  for (int i = 0; i < grid.n_samples; ++i)
    CHECK(again.excited_population[i] == traj.excited_population[i]);
}

TEST_CASE("two-level closed-form exponential matches the spectral route", "[dynamics]") {
  SemiclassicalParams p{0.3, 1.0, 1.0};
  const Eigen::Matrix2cd h_const = semiclassical_generator(p, 0.0, false);
  const std::function<Eigen::MatrixXcd(double)> gen = [&](double) {
    return Eigen::MatrixXcd(h_const);
  };
  JointState psi0;
  psi0.n_max = 0;
  psi0.amplitudes = Eigen::VectorXcd::Zero(2);
  psi0.amplitudes[0] = 1.0;
  const auto grid = TimeGrid::over(20.0);
  const auto a = evolve_time_dependent(gen, psi0, grid, 1e-10);
  const auto b = evolve_time_independent(h_const, psi0, grid);
  for (int i = 0; i < grid.n_samples; ++i)
    CHECK(a.excited_population[i] == Catch::Approx(b.excited_population[i]).margin(1e-10));
}

TEST_CASE("commutator-free stepper is fourth order", "[dynamics]") {
  SemiclassicalParams p{0.3, 1.0, 1.0};
  const std::function<Eigen::MatrixXcd(double)> gen = [&](double t) {
    return Eigen::MatrixXcd(semiclassical_generator(p, t, false));
  };
  Eigen::VectorXcd psi0(2);
  psi0 << 1.0, 0.0;
  TimeGrid grid;
  grid.t_end = 4.0;
  grid.n_samples = 2;
  detail::DenseStepper stepper{gen};
  const auto ref = detail::propagate_sampled(psi0, grid, stepper, 512).back();
  const double e4 = (detail::propagate_sampled(psi0, grid, stepper, 4).back() - ref).norm();
  const double e8 = (detail::propagate_sampled(psi0, grid, stepper, 8).back() - ref).norm();
  CHECK(e4 / e8 > 10.0);
  CHECK(e4 / e8 < 24.0);
}

TEST_CASE("semiclassical RWA population is exactly cos^2(At)", "[dynamics]") {
  for (double A : {0.05, 0.2}) {
    SemiclassicalParams p{A, 1.0, 1.0};
    const auto grid = TimeGrid::over(20.0 * M_PI / A);
    const auto traj = run_semiclassical(p, true, grid);
    double worst = 0.0;
    for (int i = 0; i < grid.n_samples; ++i) {
      const double c = std::cos(A * grid.time(i));
      worst = std::max(worst, std::abs(traj.excited_population[i] - c * c));
    }
    CHECK(worst < 1e-8);
  }
}

TEST_CASE("full semiclassical drive differs from its RWA at order A", "[dynamics]") {
  SemiclassicalParams p{0.2, 1.0, 1.0};
  const auto grid = TimeGrid::over(4.0 * M_PI / p.A);
  const auto full = run_semiclassical(p, false, grid);
  const auto rwa = run_semiclassical(p, true, grid);
  double dev = 0.0;
  for (int i = 0; i < grid.n_samples; ++i)
    dev = std::max(dev, std::abs(full.excited_population[i] - rwa.excited_population[i]));
  CHECK(dev > 0.01);   // counter-rotating ripple is visible
  CHECK(dev < 0.5);    // but bounded on Rabi timescales
}

TEST_CASE("time-dependent propagation runs backwards to the start", "[dynamics]") {
  SemiclassicalParams p{0.25, 1.0, 1.0};
  const double T = 30.0;
  const std::function<Eigen::MatrixXcd(double)> fwd = [&](double t) {
    return Eigen::MatrixXcd(semiclassical_generator(p, t, false));
  };
  const std::function<Eigen::MatrixXcd(double)> bwd = [&](double t) {
    return Eigen::MatrixXcd(-semiclassical_generator(p, T - t, false));
  };
  JointState psi0;
  psi0.n_max = 0;
  psi0.amplitudes = Eigen::VectorXcd::Zero(2);
  psi0.amplitudes[0] = 1.0;
  TimeGrid grid;
  grid.t_end = T;
  grid.n_samples = 1001;
  const auto out = evolve_time_dependent(fwd, psi0, grid, 1e-10, true);
  JointState mid;
  mid.n_max = 0;
  mid.amplitudes = out.snapshots.back();
  const auto back = evolve_time_dependent(bwd, mid, grid, 1e-10, true);
  CHECK((back.snapshots.back() - psi0.amplitudes).norm() < 1e-8);
}

TEST_CASE("displaced matvec agrees with the dense generator", "[dynamics]") {
  std::mt19937 rng(99u);
  std::normal_distribution<double> gauss;
  const auto p = resonant(0.07);
  const double alpha = 3.0;
  const int n_max = 12;
  for (bool rwa : {false, true}) {
    DisplacedGenerator gen(p, alpha, n_max, rwa);
    Eigen::VectorXcd x(gen.dim()), y;
    for (int i = 0; i < x.size(); ++i) x[i] = Complex(gauss(rng), gauss(rng));
    for (double t : {0.0, 0.42, 2.17}) {
      gen.apply(gen.combo({{1.0, t}}), x, y);
      const Eigen::VectorXcd ref = build_displaced_generator(p, alpha, n_max, t, rwa) * x;
      CHECK((y - ref).cwiseAbs().maxCoeff() < 1e-13);
    }
    // two-node combination stays in the same operator family
    gen.apply(gen.combo({{0.3, 0.5}, {0.7, 1.1}}), x, y);
    const Eigen::VectorXcd ref = 0.3 * (build_displaced_generator(p, alpha, n_max, 0.5, rwa) * x) +
                                 0.7 * (build_displaced_generator(p, alpha, n_max, 1.1, rwa) * x);
    CHECK((y - ref).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("displaced integration matches the generic dense path", "[dynamics]") {
  const auto p = resonant(0.05);
  const double alpha = 1.5;
  const int n_max = 16;
  const auto grid = TimeGrid::over(25.0);
  const std::function<Eigen::MatrixXcd(double)> gen = [&](double t) {
    return build_displaced_generator(p, alpha, n_max, t, false);
  };
  const JointState psi0 = initial_joint_state(FieldSpec::coherent(alpha), n_max,
                                              Frame::displaced_rotating);
  const auto dense = evolve_time_dependent(gen, psi0, grid, 1e-10);

  DisplacedGenerator sgen(p, alpha, n_max, false);
  detail::DisplacedStepper stepper{sgen};
  auto snaps = detail::propagate_adaptive(psi0.amplitudes, grid, stepper, 1e-10);
  for (int i = 0; i < grid.n_samples; i += 50) {
    const double pop = snaps[i].head(n_max + 1).squaredNorm();
    CHECK(pop == Catch::Approx(dense.excited_population[i]).margin(1e-9));
  }
}

TEST_CASE("uncoupled quantum run keeps the spin excited", "[dynamics]") {
  const auto traj = run_quantum(resonant(0.0), FieldSpec::coherent(1.0), false,
                                TimeGrid::over(50.0));
  for (double pop : traj.excited_population) CHECK(pop == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("quantum RWA run reproduces the Poisson cosine sum", "[dynamics]") {
  ModelParams p = resonant(kZaheerLambda);
  const double tau_rev = timescales(p.lambda, kZaheerAlpha).revival;
  const auto grid = TimeGrid::over(tau_rev);
  const auto traj = run_quantum(p, FieldSpec::coherent(kZaheerAlpha), true, grid);
  REQUIRE(traj.frame == Frame::lab);
  double worst = 0.0;
  for (int i = 0; i < grid.n_samples; ++i)
    worst = std::max(worst, std::abs(traj.excited_population[i] -
                                     rwa_population_oracle(grid.time(i), p.lambda, kZaheerAlpha)));
  CHECK(worst < 1e-8);
}

TEST_CASE("revival of the full quantum model peaks near tau_rev", "[dynamics]") {
  ModelParams p = resonant(kZaheerLambda);
  const auto ts = timescales(p.lambda, kZaheerAlpha);
  const auto grid = TimeGrid::over(1.5 * ts.revival);
  const auto traj = run_quantum(p, FieldSpec::coherent(kZaheerAlpha), false, grid);
  double best = 0.0, t_peak = 0.0;
  for (int i = 0; i < grid.n_samples; ++i) {
    const double t = grid.time(i);
    if (t < 0.5 * ts.revival) continue;
    const double dev = std::abs(traj.excited_population[i] - 0.5);
    if (dev > best) {
      best = dev;
      t_peak = t;
    }
  }
  CHECK(std::abs(t_peak - ts.revival) < 0.15 * ts.revival);
  CHECK(best > 0.1);  // the revival actually rises out of the quiescent band

  // quiescent region: full model keeps a fast ripple that the RWA lacks
  const auto rwa = run_quantum(p, FieldSpec::coherent(kZaheerAlpha), true, grid);
  double ripple_full = 0.0, ripple_rwa = 0.0;
  for (int i = 1; i + 1 < grid.n_samples; ++i) {
    const double t = grid.time(i);
    if (t < 2.0 * ts.collapse || t > 0.6 * ts.revival) continue;
    ripple_full = std::max(ripple_full,
                           std::abs(traj.excited_population[i + 1] - traj.excited_population[i]));
    ripple_rwa = std::max(ripple_rwa,
                          std::abs(rwa.excited_population[i + 1] - rwa.excited_population[i]));
  }
  CHECK(ripple_full > 5.0 * ripple_rwa);
}

TEST_CASE("population series fast path matches direct propagation", "[dynamics]") {
  ModelParams p = resonant(kZaheerLambda);
  const int n_max = default_lab_n_max(kZaheerAlpha);
  const auto grid = TimeGrid::over(30.0);
  const JointState psi0 = initial_joint_state(FieldSpec::coherent(kZaheerAlpha), n_max);

  Eigen::MatrixXd a = build_full_hamiltonian(p, n_max).real();
  const Eigen::VectorXd w = eig_symmetric_inplace(a);
  const auto fast =
      excited_population_series(a, w, psi0.amplitudes.real(), grid, 1e-10, 1e-13);
  const auto direct = evolve_from_eigensystem(a, w, psi0, grid);
  double worst = 0.0;
  for (int i = 0; i < grid.n_samples; ++i)
    worst = std::max(worst, std::abs(fast[i] - direct.excited_population[i]));
  CHECK(worst < 1e-9);
}

TEST_CASE("analytic RWA eigensystem matches the numeric one", "[dynamics]") {
  ModelParams p = resonant(0.11);
  const int n_max = 50;
  Eigen::MatrixXd av;
  Eigen::VectorXd aw;
  rwa_eigensystem(p, n_max, av, aw);

  Eigen::MatrixXd nv = build_rwa_hamiltonian(p, n_max).real();
  const Eigen::VectorXd nw = eig_symmetric_inplace(nv);
  REQUIRE(aw.size() == nw.size());
  for (int i = 0; i < aw.size(); ++i) CHECK(aw[i] == Catch::Approx(nw[i]).margin(1e-12));

  const auto grid = TimeGrid::over(40.0);
  const JointState psi0 = initial_joint_state(FieldSpec::coherent(2.0), n_max);
  const auto via_analytic =
      excited_population_series(av, aw, psi0.amplitudes.real(), grid, 1e-10, 1e-13);
  const auto via_numeric = evolve_from_eigensystem(nv, nw, psi0, grid);
  for (int i = 0; i < grid.n_samples; ++i)
    CHECK(via_analytic[i] == Catch::Approx(via_numeric.excited_population[i]).margin(1e-10));
}

TEST_CASE("lab and displaced frames agree on spin observables", "[dynamics][slow]") {
  ModelParams p = resonant(kZaheerLambda);
  const FieldSpec field = FieldSpec::coherent(kZaheerAlpha);
  const auto ts = timescales(p.lambda, kZaheerAlpha);
  const auto grid = TimeGrid::over(3.0 * ts.revival);
  const auto lab = run_quantum(p, field, false, grid, {}, Frame::lab);
  const auto disp = run_quantum(p, field, false, grid, {}, Frame::displaced_rotating);
  REQUIRE(disp.frame == Frame::displaced_rotating);
  double worst = 0.0;
  for (int i = 0; i < grid.n_samples; ++i)
    worst = std::max(worst,
                     std::abs(lab.excited_population[i] - disp.excited_population[i]));
  CHECK(worst < 1e-6);
}

TEST_CASE("truncation failures are reported, not hidden", "[dynamics]") {
  RunOptions tight;
  tight.n_max_override = 12;
  CHECK_THROWS_AS(run_quantum(resonant(0.1), FieldSpec::coherent(3.0), false,
                              TimeGrid::over(30.0), tight, Frame::lab),
                  std::runtime_error);

  RunOptions verify;
  verify.verify_truncation = true;
  CHECK_NOTHROW(run_quantum(resonant(0.1), FieldSpec::coherent(1.0), false,
                            TimeGrid::over(30.0), verify));
}

TEST_CASE("frame dispatch respects the dimension budget", "[dynamics]") {
  RunOptions opts;
  opts.max_lab_dim = 60;  // too small for alpha = 2 in the lab
  const auto traj = run_quantum(resonant(0.08), FieldSpec::coherent(2.0), true,
                                TimeGrid::over(20.0), opts);
  CHECK(traj.frame == Frame::displaced_rotating);
  CHECK_THROWS_AS(run_quantum(resonant(0.08), FieldSpec::fock(40), false, TimeGrid::over(5.0),
                              opts),
                  std::invalid_argument);
}
