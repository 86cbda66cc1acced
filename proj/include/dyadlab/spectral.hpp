#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>

#include "dyadlab/measure.hpp"

namespace dyadlab {

struct SpectralOptions {
  /// Dense symmetric eigensolves up to this many coordinates, power iteration above.
  std::size_t dense_limit = 4096;
  double tolerance = 1e-10;
  std::size_t max_iterations = 100000;
  std::uint64_t seed = 0x5eed;
};

/// Largest eigenvalue of a symmetric positive semidefinite matrix.
double largest_eigenvalue(const Eigen::MatrixXd& sym);

using LinearMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct PowerIterationResult {
  double value = 0.0;  // largest eigenvalue of the iterated PSD map
  std::size_t iterations = 0;
  bool converged = false;
  Eigen::VectorXd vector;
};

/// Power iteration for the top eigenvalue of a PSD map, started from a seeded
/// random vector. Stops once successive Rayleigh quotients agree to `tolerance`
/// (relative).
PowerIterationResult power_iteration(const LinearMap& psd_map, Eigen::Index dim,
                                     const SpectralOptions& opts);

/// Norm of a leaf operator A : L^2(in) -> L^2(out), i.e. the largest singular
/// value of M_out^{1/2} A M_in^{-1/2} on the positive-mass coordinates.
double weighted_operator_norm(const Eigen::MatrixXd& leaf_operator, const MeasureGrid& in,
                              const MeasureGrid& out, const SpectralOptions& opts = {});

}  // namespace dyadlab
