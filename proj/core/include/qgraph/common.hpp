#pragma once

#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qgraph {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using RMatrix = Eigen::MatrixXd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// Base of everything the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid input parameters. The CLI maps this to exit status 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A numerical invariant (unitarity, completeness, ...) was violated.
// The CLI maps this to exit status 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SolverError : public NumericalError {
 public:
  SolverError(const std::string& what, double k_lo, double k_hi)
      : NumericalError(what + " on [" + std::to_string(k_lo) + ", " +
                       std::to_string(k_hi) + "]"),
        k_lo_(k_lo),
        k_hi_(k_hi) {}
  double k_lo() const { return k_lo_; }
  double k_hi() const { return k_hi_; }

 private:
  double k_lo_;
  double k_hi_;
};

using Rng = std::mt19937_64;

// splitmix64 finalizer: maps (seed, stream) to well-separated child seeds.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Max-norm distance of M M^dagger from the identity.
template <class Derived>
double unitarity_residual(const Eigen::MatrixBase<Derived>& m) {
  const auto n = m.rows();
  return (m * m.adjoint() - Eigen::MatrixXcd::Identity(n, n)).cwiseAbs().maxCoeff();
}

template <class Derived>
double symmetry_residual(const Eigen::MatrixBase<Derived>& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

}  // namespace qgraph
