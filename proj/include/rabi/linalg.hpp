// linalg.hpp -- dense self-adjoint eigensolvers (LAPACK-backed) and small helpers.

#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#define LAPACK_COMPLEX_CPP
#include <lapacke.h>

namespace rabi {

using Complex = std::complex<double>;

struct EigenSystem {
  Eigen::VectorXd values;    // ascending
  Eigen::MatrixXcd vectors;  // column k belongs to values[k]
};

inline double hermiticity_error(const Eigen::MatrixXcd& h) {
  return (h - h.adjoint()).cwiseAbs().maxCoeff();
}

// Eigendecomposition of a real symmetric matrix, in place (dsyevd).
inline Eigen::VectorXd eig_symmetric_inplace(Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("eig_symmetric: matrix not square");
  const auto n = static_cast<lapack_int>(a.rows());
  Eigen::VectorXd w(n);
  lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, a.data(), n, w.data());
  if (info != 0)
    throw std::runtime_error("dsyevd failed to converge (info=" + std::to_string(info) + ")");
  return w;
}

// Self-adjoint eigendecomposition. Dispatches to the real path when the
// imaginary part vanishes identically, zheevd otherwise.
inline EigenSystem eig_selfadjoint(const Eigen::MatrixXcd& h) {
  if (h.rows() != h.cols()) throw std::invalid_argument("eig_selfadjoint: matrix not square");
  if (h.size() == 0) throw std::invalid_argument("eig_selfadjoint: empty matrix");
  if (hermiticity_error(h) > 1e-12)
    throw std::invalid_argument("eig_selfadjoint: matrix is not Hermitian");
  EigenSystem es;
  if (h.imag().cwiseAbs().maxCoeff() == 0.0) {
    Eigen::MatrixXd a = h.real();
    es.values = eig_symmetric_inplace(a);
    es.vectors = a.cast<Complex>();
    return es;
  }
  Eigen::MatrixXcd a = h;
  const auto n = static_cast<lapack_int>(a.rows());
  es.values.resize(n);
  lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'V', 'L', n,
                                   reinterpret_cast<lapack_complex_double*>(a.data()), n,
                                   es.values.data());
  if (info != 0)
    throw std::runtime_error("zheevd failed to converge (info=" + std::to_string(info) + ")");
  es.vectors = std::move(a);
  return es;
}

inline std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace rabi
