#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <vector>

#include "dyadlab/analysis.hpp"

namespace dyadlab {

/// Everything needed to evaluate the sufficiency ratio of one two-weight problem.
struct Instance {
  LatticePtr lattice;
  Eigen::VectorXd mu_mass;
  Eigen::VectorXd nu_mass;
  Eigen::SparseMatrix<double> coefficients;  // unweighted Haar slots, out x in
  int radius = 0;

  BandOperator band() const;
  InducedOperator induced() const;
  TestingReport evaluate(const SpectralOptions& opts = {}) const;
};

struct SearchOptions {
  std::size_t iterations = 0;
  double mass_step = 0.5;   // log-normal multiplicative step on one leaf mass
  double entry_step = 0.25;  // additive step on one coefficient, relative to the largest
  std::uint64_t seed = 0;
  SpectralOptions spectral;
};

struct SearchResult {
  double seed_rho = 0.0;
  double best_rho = 0.0;
  std::vector<double> trajectory;  // incumbent ratio after each iteration
  std::size_t accepted = 0;
  Instance best;
  TestingReport best_report;
};

/// Hill climbing on the sufficiency ratio: each iteration perturbs one leaf mass
/// of mu or nu, or one nonzero coefficient, and keeps the candidate only when
/// the ratio strictly improves. Zero masses and zero coefficients stay zero, so
/// the band structure and the zero blocks of the start instance are preserved.
SearchResult extremal_search(const Instance& start, const SearchOptions& opts);

}  // namespace dyadlab
