#pragma once

#include <atomic>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace oddm {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;
using RealVec = Eigen::VectorXd;
using RealMat = Eigen::MatrixXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Propagation speed used for Doppler arithmetic. The usual link-budget
// convention of 3e8 m/s, not the CODATA value.
inline constexpr double kSpeedOfLight = 3.0e8;

/// Thrown when a configuration file or scenario parameter is invalid.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Thrown when an iterative solver detects divergence.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Global operation counters. Problem-sized linear algebra goes through
// these so tests can assert which code paths touch dense solves.
// Constant-size work (e.g. a 3x3 damping combiner) is not counted.
namespace ops {

inline std::atomic<std::int64_t> matvec_applies{0};
inline std::atomic<std::int64_t> dense_solves{0};
inline std::atomic<std::int64_t> dense_factorizations{0};

inline void reset() {
  matvec_applies = 0;
  dense_solves = 0;
  dense_factorizations = 0;
}

}  // namespace ops

}  // namespace oddm
