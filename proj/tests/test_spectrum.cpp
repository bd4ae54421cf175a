#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "rabi/spectrum.hpp"

using namespace rabi;

namespace {

ModelParams resonant(double lambda) {
  ModelParams p;
  p.lambda = lambda;
  return p;
}

}  // namespace

TEST_CASE("parity blocks reassemble the full spectrum", "[spectrum]") {
  const int n_max = 25;
  const auto p = resonant(0.3);
  const auto even = compute_sector_spectrum(p, n_max, 1);
  const auto odd = compute_sector_spectrum(p, n_max, -1);
  std::vector<double> merged(even.values.data(), even.values.data() + even.values.size());
  merged.insert(merged.end(), odd.values.data(), odd.values.data() + odd.values.size());
  std::sort(merged.begin(), merged.end());

  const auto whole = eig_selfadjoint(build_full_hamiltonian(p, n_max));
  REQUIRE(static_cast<int>(merged.size()) == whole.values.size());
  for (int i = 0; i < whole.values.size(); ++i)
    CHECK(merged[i] == Catch::Approx(whole.values[i]).margin(1e-11));

  // block eigenvectors, embedded in the full basis, have definite parity
  for (const auto& s : {even, odd}) {
    for (int k : {0, 3, 10}) {
      JointState state;
      state.n_max = n_max;
      state.amplitudes = Eigen::VectorXcd::Zero(2 * (n_max + 1));
      for (int row = 0; row < static_cast<int>(s.full_indices.size()); ++row)
        state.amplitudes[s.full_indices[row]] = s.vectors(row, k);
      CHECK(parity_expectation(state) == Catch::Approx(s.sector).margin(1e-12));
    }
  }
}

TEST_CASE("uncoupled spectrum labels degenerate pairs", "[spectrum]") {
  const auto res = compute_spectrum(resonant(0.0), 10, 6);
  const double expected[] = {-0.5, 0.5, 0.5, 1.5, 1.5, 2.5};
  for (int i = 0; i < 6; ++i) CHECK(res.levels[i].energy == Catch::Approx(expected[i]).margin(1e-13));
  CHECK(res.levels[0].sector == -1);  // |-z,0>
}

TEST_CASE("doubling check accepts converged ladders and flags short ones", "[spectrum]") {
  CHECK_NOTHROW(compute_spectrum(resonant(0.1), 80, 10, false, true));
  // a 4-rung ladder cannot hold the lambda=0.8 ground state
  CHECK_THROWS_AS(compute_spectrum(resonant(0.8), 4, 8, false, true, 1e-12), std::runtime_error);
}

TEST_CASE("RWA sector spectra match the analytic ladder", "[spectrum]") {
  const auto p = resonant(0.15);
  for (int sector : {1, -1}) {
    const auto numeric = compute_sector_spectrum(p, 60, sector, true, false);
    const auto analytic = rwa_sector_levels(p, sector, 40);
    for (int i = 0; i < 40; ++i)
      CHECK(numeric.values[i] == Catch::Approx(analytic[i]).margin(1e-10));
  }
}

TEST_CASE("breakdown couplings satisfy their closed forms", "[spectrum]") {
  CHECK(lambda_c_rwa(0) == 1.0);
  CHECK(lambda_c_rwa(1) == Catch::Approx(1.0 / (1.0 + std::sqrt(2.0))).margin(1e-15));
  CHECK(lambda_c_pusc(0) == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-15));
  CHECK(lambda_c_pusc(1) == Catch::Approx(1.0 / std::sqrt(6.0)).margin(1e-15));

  for (int n = 1; n <= 10000; n = n < 100 ? n + 1 : n * 3) {
    const double lc = lambda_c_rwa(n);
    CHECK(std::abs(lc * (std::sqrt(static_cast<double>(n)) + std::sqrt(n + 1.0)) - 1.0) < 1e-14);
  }
  for (int n : {25, 100, 10000}) {
    const double asymptotic = 1.0 / (2.0 * std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(lambda_c_rwa(n) / asymptotic - 1.0) < 0.01);
  }
  for (int n = 12; n <= 300; ++n)
    CHECK(std::abs(lambda_c_pusc(n) / lambda_c_rwa(n) - 1.0) < 0.01);
  // scaling respects omega0
  CHECK(lambda_c_rwa(7, 2.0) == Catch::Approx(2.0 * lambda_c_rwa(7)).margin(1e-15));
}

TEST_CASE("RWA ladder crossings happen exactly at lambda_c", "[spectrum]") {
  for (int n = 1; n <= 50; ++n) {
    const double lc = lambda_c_rwa(n);
    const double upper_below = n + lc * std::sqrt(static_cast<double>(n));  // pair n-1, plus
    const double lower_above = (n + 1.0) - lc * std::sqrt(n + 1.0);         // pair n, minus
    CHECK(std::abs(upper_below - lower_above) < 1e-12);
  }
  // ground-level crossing: pair 0 minus reaches the ground level at lambda_c(0)
  CHECK(std::abs((1.0 - lambda_c_rwa(0) * 1.0) - 0.0) < 1e-15);
}

TEST_CASE("splitting points behave as expected at n=10", "[spectrum]") {
  const auto p = resonant(0.0);
  const auto [minus, plus] = find_splitting_pair(10, 0.05, p);
  CHECK(minus.lambda_s > 0.0);
  CHECK(plus.lambda_s > 0.0);
  CHECK(minus.lambda_s < 1.0);
  CHECK(minus.lambda_s > plus.lambda_s);  // lower branch adheres longer

  // deviation at the reported point is delta up to the bisection resolution
  for (const auto& pt : {minus, plus}) {
    const int rank = pt.sign == BranchSign::minus ? 10 : 11;
    ModelParams q = p;
    q.lambda = pt.lambda_s;
    const auto s = compute_sector_spectrum(q, 100, 1, false, false);
    const double dev = std::abs(s.values[rank] - rwa_level_energy(10, pt.sign, q));
    CHECK(std::abs(dev - 0.05) < 2e-3);
  }
}

TEST_CASE("splitting points shrink with n and with delta", "[spectrum]") {
  const auto p = resonant(0.0);
  const auto at10 = find_splitting_pair(10, 0.05, p);
  const auto at40 = find_splitting_pair(40, 0.05, p);
  CHECK(at40.first.lambda_s < at10.first.lambda_s);
  CHECK(at40.second.lambda_s < at10.second.lambda_s);

  const auto tight = find_splitting_pair(15, 1e-3, p);
  const auto loose = find_splitting_pair(15, 0.05, p);
  CHECK(tight.first.lambda_s < loose.first.lambda_s);
  CHECK(tight.second.lambda_s < loose.second.lambda_s);
}

TEST_CASE("splitting search is stable under grid refinement", "[spectrum]") {
  const auto p = resonant(0.0);
  SplittingOptions fine;
  fine.coarse_step = 0.0005;
  const double coarse = find_splitting_point(10, BranchSign::minus, 0.05, p);
  const double refined = find_splitting_point(10, BranchSign::minus, 0.05, p, fine);
  CHECK(std::abs(coarse - refined) < 2e-4);
}

TEST_CASE("sector eigenvalues stay strictly ordered in lambda range of interest", "[spectrum]") {
  for (double lambda : {0.3, 0.7}) {
    for (int sector : {1, -1}) {
      const auto s = compute_sector_spectrum(resonant(lambda), 40, sector, false, false);
      for (int i = 1; i < s.values.size(); ++i) CHECK(s.values[i] - s.values[i - 1] > 1e-9);
    }
  }
}

TEST_CASE("inverse-sqrt fit recovers exact power laws", "[spectrum]") {
  std::vector<std::pair<int, double>> pts;
  for (int n = 5; n <= 40; n += 5) pts.push_back({n, 0.7 / std::sqrt(static_cast<double>(n))});
  const auto fit = fit_inverse_sqrt(pts, 0);
  CHECK(fit.coefficient == Catch::Approx(0.7).margin(1e-12));
  CHECK(fit.rms_residual < 1e-12);
  CHECK(fit.free_exponent == Catch::Approx(-0.5).margin(1e-10));
  CHECK(fit.free_prefactor == Catch::Approx(0.7).margin(1e-10));

  // offset variant
  std::vector<std::pair<int, double>> pts1;
  for (int n = 5; n <= 40; n += 5) pts1.push_back({n, 1.3 / std::sqrt(n + 1.0)});
  CHECK(fit_inverse_sqrt(pts1, 1).coefficient == Catch::Approx(1.3).margin(1e-12));

  // order independence is exact
  std::mt19937 rng(7u);
  auto shuffled = pts;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto fit2 = fit_inverse_sqrt(shuffled, 0);
  CHECK(fit2.coefficient == fit.coefficient);
  CHECK(fit2.free_exponent == fit.free_exponent);

  CHECK_THROWS_AS(fit_inverse_sqrt({{1, 1.0}, {2, 0.7}}, 0), std::invalid_argument);
  CHECK_THROWS_AS(fit_inverse_sqrt({{0, 1.0}, {2, 0.7}, {3, 0.6}, {4, 0.5}, {5, 0.4}}, 0),
                  std::invalid_argument);
}

TEST_CASE("splitting search rejects bad arguments", "[spectrum]") {
  CHECK_THROWS_AS(find_splitting_pair(-1, 0.05, resonant(0.0)), std::invalid_argument);
  CHECK_THROWS_AS(find_splitting_pair(5, -0.1, resonant(0.0)), std::invalid_argument);
  // delta larger than any deviation reachable below lambda_max
  SplittingOptions opts;
  opts.lambda_max = 0.02;
  CHECK_THROWS_AS(find_splitting_pair(2, 0.5, resonant(0.0), opts), std::runtime_error);
}
