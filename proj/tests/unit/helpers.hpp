#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "dyadlab/generators.hpp"
#include "dyadlab/operators.hpp"

namespace dyadlab::test {

inline double rel(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

inline Eigen::MatrixXd dense(const Eigen::SparseMatrix<double>& s) { return Eigen::MatrixXd(s); }

/// Two roots side by side, so cross-root arithmetic gets exercised.
inline LatticePtr two_root_lattice(int dim, int depth) {
  std::vector<Cube> roots{Cube{0, std::vector<std::int64_t>(static_cast<std::size_t>(dim), 0)},
                          Cube{0, std::vector<std::int64_t>(static_cast<std::size_t>(dim), 0)}};
  roots[1].coords[0] = 1;
  return build_lattice(dim, 0, -depth, roots);
}

/// Weighted measure of a kind picked by `kind`: lognormal, zero blocks or atoms.
inline MeasureGrid some_measure(const LatticePtr& lat, int kind, std::uint64_t seed) {
  switch (kind % 3) {
    case 0: return lognormal_measure(lat, 1.0, seed);
    case 1: return zero_blocks_measure(lat, 0.3, seed);
    default: return sparse_atoms_measure(lat, std::max<std::size_t>(2, lat->num_leaves() / 3), seed);
  }
}

inline Eigen::VectorXd randn(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Eigen::VectorXd v(n);
  for (auto& x : v) x = z(rng);
  return v;
}

}  // namespace dyadlab::test
