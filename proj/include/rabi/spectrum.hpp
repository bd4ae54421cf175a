// spectrum.hpp -- parity-resolved eigenvalue tables, breakdown couplings, and
// RWA splitting points.
//
// Both Hamiltonians commute with the parity sigma_z (x) (-1)^{a^dag a}, so all
// spectra are computed per parity sector.  Basis states carry definite parity,
// which makes the sector blocks real symmetric submatrices of half dimension.
// Within a sector eigenvalue curves never cross as functions of lambda, so a
// branch is identified by its within-sector rank; eigenvector overlap between
// neighbouring grid points guards against mislabeling.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rabi/linalg.hpp"
#include "rabi/model.hpp"

namespace rabi {

struct SectorSpectrum {
  int sector = 1;                 // +1 or -1
  std::vector<int> full_indices;  // block row -> spin-major full-basis index
  Eigen::VectorXd values;         // ascending
  Eigen::MatrixXd vectors;        // empty unless requested
};

inline void check_sector(int sector) {
  if (sector != 1 && sector != -1)
    throw std::invalid_argument("parity sector must be +1 or -1");
}

// Real symmetric block of the (full or RWA) Hamiltonian in one parity sector.
// Block basis: spin-up states first (ascending n), then spin-down.
inline std::pair<Eigen::MatrixXd, std::vector<int>> build_parity_block(const ModelParams& p,
                                                                       int n_max, int sector,
                                                                       bool rwa = false) {
  p.validate();
  check_sector(sector);
  if (n_max < 1) throw std::invalid_argument("build_parity_block: n_max must be >= 1");
  std::vector<int> idx;
  std::vector<int> pos_up(n_max + 1, -1), pos_dn(n_max + 1, -1);
  for (int n = 0; n <= n_max; ++n)
    if ((n % 2 == 0 ? 1 : -1) == sector) {
      pos_up[n] = static_cast<int>(idx.size());
      idx.push_back(spin_up_index(n));
    }
  for (int n = 0; n <= n_max; ++n)
    if ((n % 2 == 0 ? -1 : 1) == sector) {
      pos_dn[n] = static_cast<int>(idx.size());
      idx.push_back(spin_down_index(n, n_max));
    }
  const int dim = static_cast<int>(idx.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (int n = 0; n <= n_max; ++n) {
    if (pos_up[n] >= 0) h(pos_up[n], pos_up[n]) = 0.5 * p.Omega + n * p.omega0;
    if (pos_dn[n] >= 0) h(pos_dn[n], pos_dn[n]) = -0.5 * p.Omega + n * p.omega0;
  }
  for (int n = 0; n < n_max; ++n) {
    const double g = p.lambda * std::sqrt(n + 1.0);
    if (pos_up[n] >= 0 && pos_dn[n + 1] >= 0) {
      h(pos_up[n], pos_dn[n + 1]) = g;
      h(pos_dn[n + 1], pos_up[n]) = g;
    }
    if (!rwa && pos_up[n + 1] >= 0 && pos_dn[n] >= 0) {
      h(pos_up[n + 1], pos_dn[n]) = g;
      h(pos_dn[n], pos_up[n + 1]) = g;
    }
  }
  return {std::move(h), std::move(idx)};
}

inline SectorSpectrum compute_sector_spectrum(const ModelParams& p, int n_max, int sector,
                                              bool rwa = false, bool want_vectors = true) {
  auto [h, idx] = build_parity_block(p, n_max, sector, rwa);
  SectorSpectrum out;
  out.sector = sector;
  out.full_indices = std::move(idx);
  const auto n = static_cast<lapack_int>(h.rows());
  out.values.resize(n);
  lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, want_vectors ? 'V' : 'N', 'L', n, h.data(),
                                   n, out.values.data());
  if (info != 0)
    throw std::runtime_error("dsyevd failed in sector spectrum (info=" + std::to_string(info) +
                             ")");
  if (want_vectors) out.vectors = std::move(h);
  return out;
}

struct SpectrumLevel {
  double energy;
  int sector;  // +1 or -1
  int rank;    // within-sector ascending index
};

struct SpectrumResult {
  std::vector<SpectrumLevel> levels;  // ascending in energy
};

// Lowest k_levels eigenvalues with parity labels.  With check_doubling set the
// computation is repeated at twice the ladder size and a mismatch beyond
// doubling_tol is reported as a truncation failure.
inline SpectrumResult compute_spectrum(const ModelParams& p, int n_max, int k_levels,
                                       bool rwa = false, bool check_doubling = false,
                                       double doubling_tol = 1e-8) {
  if (k_levels < 1 || k_levels > 2 * (n_max + 1))
    throw std::invalid_argument("compute_spectrum: k_levels out of range");
  auto merge = [&](int nm) {
    const auto even = compute_sector_spectrum(p, nm, 1, rwa, false);
    const auto odd = compute_sector_spectrum(p, nm, -1, rwa, false);
    std::vector<SpectrumLevel> levels;
    levels.reserve(even.values.size() + odd.values.size());
    for (int i = 0; i < even.values.size(); ++i) levels.push_back({even.values[i], 1, i});
    for (int i = 0; i < odd.values.size(); ++i) levels.push_back({odd.values[i], -1, i});
    std::stable_sort(levels.begin(), levels.end(),
                     [](const SpectrumLevel& a, const SpectrumLevel& b) { return a.energy < b.energy; });
    return levels;
  };
  auto levels = merge(n_max);
  levels.resize(k_levels);
  if (check_doubling) {
    const auto doubled = merge(2 * n_max);
    for (int i = 0; i < k_levels; ++i)
      if (std::abs(levels[i].energy - doubled[i].energy) > doubling_tol)
        throw std::runtime_error("compute_spectrum: level " + std::to_string(i) +
                                 " not converged under ladder doubling");
  }
  return {std::move(levels)};
}

// Rank-sorted RWA reference levels of one parity sector (untruncated ladder).
inline std::vector<double> rwa_sector_levels(const ModelParams& p, int sector, int count) {
  p.validate();
  check_sector(sector);
  if (count < 1) throw std::invalid_argument("rwa_sector_levels: count must be positive");
  std::vector<double> levels;
  if (sector == -1) levels.push_back(-0.5 * p.Omega);
  for (int n = sector == 1 ? 0 : 1; static_cast<int>(levels.size()) < count + 2; n += 2) {
    levels.push_back(rwa_level_energy(n, BranchSign::minus, p));
    levels.push_back(rwa_level_energy(n, BranchSign::plus, p));
  }
  std::sort(levels.begin(), levels.end());
  levels.resize(count);
  return levels;
}

// Coupling where the RWA pair (n-1,+) level meets the (n,-) level one rung up:
// lambda_c (sqrt(n) + sqrt(n+1)) = omega0.  n = 0 is the ground-level crossing.
inline double lambda_c_rwa(int n, double omega0 = 1.0) {
  if (n < 0) throw std::invalid_argument("lambda_c_rwa: n must be non-negative");
  if (!(omega0 > 0.0)) throw std::invalid_argument("lambda_c_rwa: omega0 must be positive");
  return omega0 / (std::sqrt(static_cast<double>(n)) + std::sqrt(n + 1.0));
}

// Perturbative ultrastrong-coupling breakdown estimate for level n.
inline double lambda_c_pusc(int n, double omega0 = 1.0) {
  if (n < 0) throw std::invalid_argument("lambda_c_pusc: n must be non-negative");
  if (!(omega0 > 0.0)) throw std::invalid_argument("lambda_c_pusc: omega0 must be positive");
  return omega0 / std::sqrt(2.0 * (2.0 * n + 1.0));
}

struct SplittingOptions {
  double coarse_step = 0.005;
  double resolution = 1e-4;
  double lambda_max = 0.0;  // 0 -> omega0
  int n_max_override = 0;   // 0 -> 4n + 60
  double overlap_floor = 0.5;
};

struct SplittingPoint {
  int n = 0;
  BranchSign sign = BranchSign::minus;
  double lambda_s = 0.0;
  double delta = 0.0;
};

// Smallest lambda at which the full-model branch (n, sign) deviates from its
// RWA partner by delta: coarse scan at coarse_step, then bisection down to
// resolution.  Branches are followed by within-sector rank; an eigenvector
// overlap below overlap_floor between neighbouring scan points aborts the
// search as ambiguous.  Both signs of one pair share the scan.
inline std::pair<SplittingPoint, SplittingPoint> find_splitting_pair(
    int n, double delta, const ModelParams& p, const SplittingOptions& opts = {}) {
  p.validate();
  if (n < 0) throw std::invalid_argument("find_splitting_pair: n must be non-negative");
  if (!(delta > 0.0)) throw std::invalid_argument("find_splitting_pair: delta must be positive");
  if (!(opts.coarse_step > 0.0) || !(opts.resolution > 0.0))
    throw std::invalid_argument("find_splitting_pair: steps must be positive");
  const int n_max = opts.n_max_override > 0 ? opts.n_max_override : 4 * n + 60;
  if (n_max < n + 2) throw std::invalid_argument("find_splitting_pair: ladder too short");
  const int sector = (n % 2 == 0) ? 1 : -1;
  const double lambda_max = opts.lambda_max > 0.0 ? opts.lambda_max : p.omega0;
  const int rank_of[2] = {n, n + 1};  // minus, plus

  auto at = [&](double lambda, bool vectors) {
    ModelParams q = p;
    q.lambda = lambda;
    return compute_sector_spectrum(q, n_max, sector, false, vectors);
  };
  auto rwa_ref = [&](double lambda, int which) {
    ModelParams q = p;
    q.lambda = lambda;
    return rwa_level_energy(n, which == 0 ? BranchSign::minus : BranchSign::plus, q);
  };

  double bracket_lo[2] = {0.0, 0.0}, bracket_hi[2] = {0.0, 0.0};
  bool found[2] = {false, false};
  Eigen::MatrixXd prev_vectors;
  double lambda_prev = 0.0;
  for (double lambda = opts.coarse_step; lambda <= lambda_max + 0.5 * opts.coarse_step;
       lambda += opts.coarse_step) {
    const auto s = at(lambda, true);
    if (prev_vectors.size() > 0) {
      for (int which : {0, 1}) {
        const double overlap =
            std::abs(prev_vectors.col(rank_of[which]).dot(s.vectors.col(rank_of[which])));
        if (overlap < opts.overlap_floor)
          throw std::runtime_error("find_splitting_pair: branch tracking ambiguous near lambda=" +
                                   std::to_string(lambda));
      }
    }
    for (int which : {0, 1}) {
      if (found[which]) continue;
      const double dev = std::abs(s.values[rank_of[which]] - rwa_ref(lambda, which));
      if (dev > delta) {
        bracket_lo[which] = lambda_prev;
        bracket_hi[which] = lambda;
        found[which] = true;
      }
    }
    prev_vectors = s.vectors;
    lambda_prev = lambda;
    if (found[0] && found[1]) break;
  }
  for (int which : {0, 1})
    if (!found[which])
      throw std::runtime_error("find_splitting_pair: no splitting below lambda_max for n=" +
                               std::to_string(n));

  SplittingPoint out[2];
  for (int which : {0, 1}) {
    double lo = bracket_lo[which], hi = bracket_hi[which];
    while (hi - lo > opts.resolution) {
      const double mid = 0.5 * (lo + hi);
      const auto s = at(mid, false);
      const double dev = std::abs(s.values[rank_of[which]] - rwa_ref(mid, which));
      (dev > delta ? hi : lo) = mid;
    }
    out[which].n = n;
    out[which].sign = which == 0 ? BranchSign::minus : BranchSign::plus;
    out[which].lambda_s = 0.5 * (lo + hi);
    out[which].delta = delta;
  }
  return {out[0], out[1]};
}

inline double find_splitting_point(int n, BranchSign sign, double delta, const ModelParams& p,
                                   const SplittingOptions& opts = {}) {
  const auto [minus, plus] = find_splitting_pair(n, delta, p, opts);
  return sign == BranchSign::minus ? minus.lambda_s : plus.lambda_s;
}

struct InverseSqrtFit {
  double coefficient = 0.0;    // c in y = c / sqrt(n + offset)
  double rms_residual = 0.0;
  double free_prefactor = 0.0;  // c in y = c n^p
  double free_exponent = 0.0;   // p
};

// Least-squares fit of splitting points against c / sqrt(n + offset), plus an
// unconstrained power law in n.  Points are sorted internally so the result is
// independent of input order.
inline InverseSqrtFit fit_inverse_sqrt(std::vector<std::pair<int, double>> points, int offset) {
  if (points.size() < 5)
    throw std::invalid_argument("fit_inverse_sqrt: need at least 5 points");
  if (offset < 0) throw std::invalid_argument("fit_inverse_sqrt: offset must be non-negative");
  std::sort(points.begin(), points.end());
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [n, y] : points) {
    if (n < 1) throw std::invalid_argument("fit_inverse_sqrt: n must be >= 1");
    if (!(y > 0.0)) throw std::invalid_argument("fit_inverse_sqrt: values must be positive");
    const double x = 1.0 / std::sqrt(static_cast<double>(n + offset));
    sxx += x * x;
    sxy += x * y;
  }
  InverseSqrtFit fit;
  fit.coefficient = sxy / sxx;
  double sse = 0.0;
  for (const auto& [n, y] : points) {
    const double r = y - fit.coefficient / std::sqrt(static_cast<double>(n + offset));
    sse += r * r;
  }
  fit.rms_residual = std::sqrt(sse / static_cast<double>(points.size()));

  double su = 0.0, sv = 0.0, suu = 0.0, suv = 0.0;
  const auto count = static_cast<double>(points.size());
  for (const auto& [n, y] : points) {
    const double u = std::log(static_cast<double>(n));
    const double v = std::log(y);
    su += u;
    sv += v;
    suu += u * u;
    suv += u * v;
  }
  const double denom = count * suu - su * su;
  if (std::abs(denom) < 1e-12)
    throw std::invalid_argument("fit_inverse_sqrt: degenerate abscissae for power-law fit");
  fit.free_exponent = (count * suv - su * sv) / denom;
  fit.free_prefactor = std::exp((sv - fit.free_exponent * su) / count);
  return fit;
}

}  // namespace rabi
