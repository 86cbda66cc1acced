#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "dyadlab/operators.hpp"
#include "dyadlab/spectral.hpp"

namespace dyadlab {

enum class ParaproductSide {
  Mu,  // Pi^mu_T : L^2(mu) -> L^2(nu), built from T_mu
  Nu,  // Pi^nu_{T*} : L^2(nu) -> L^2(mu), built from T*_nu
};

/// Leaf matrix of
///   Pi f = sum_Q E_Q f * sum_{R in Q, l(R) = 2^-r l(Q)} Delta_R (T chi_Q),
/// with averages taken in the input measure and martingale differences in the
/// output measure.
struct Paraproduct {
  ParaproductSide side = ParaproductSide::Mu;
  int radius = 0;
  Eigen::MatrixXd matrix;
};

/// replacement_levels > 0 uses chi_{Q'} with Q' = Q^(replacement_levels) in the
/// inner term instead of chi_Q; for a well-localized operator the result is the
/// same matrix.
Paraproduct build_paraproduct(const InducedOperator& op, int r,
                              ParaproductSide side = ParaproductSide::Mu,
                              int replacement_levels = 0);

struct EntryWitness {
  int which = 0;  // 1, 2 or 3
  Cube q;
  Cube r;
  int q_component = 0;
  int r_component = 0;
  double paraproduct_entry = 0.0;
  double operator_entry = 0.0;
};

struct ParaproductEntryReport {
  bool pass = true;
  /// Largest deviation per case, relative to the largest entry of the operator
  /// or paraproduct matrix in the weighted Haar bases.
  double case1_max = 0.0;
  double case2_max = 0.0;
  double case3_max = 0.0;
  std::size_t case1_count = 0;
  std::size_t case2_count = 0;
  std::size_t case3_count = 0;
  std::optional<EntryWitness> witness;
};

/// Entrywise check of the paraproduct matrix against the operator in the
/// weighted Haar bases (mu-Haar in, nu-Haar out):
///   (1) l(R) >= 2^-r l(Q)  => <Pi h_Q, h_R> = 0
///   (2) R not inside Q     => <Pi h_Q, h_R> = 0
///   (3) l(R) <  2^-r l(Q)  => <Pi h_Q, h_R> = <T_mu h_Q, h_R>
ParaproductEntryReport verify_paraproduct_entries(const Paraproduct& pi, const InducedOperator& op, int r,
                             double tolerance = 1e-9);

struct RemainderReport {
  bool pass = true;
  /// Largest off-band entry of T - Pi^mu - (Pi^nu)*, normalized by the largest
  /// entry of T in the weighted Haar bases.
  double off_band_max = 0.0;
  std::size_t off_band_entries = 0;
  std::size_t in_band_entries = 0;
  double in_band_max = 0.0;  // raw largest in-band entry
  /// 2^N * C_diag when a diagonal testing constant was supplied.
  std::optional<double> in_band_bound;
  std::optional<EntryWitness> witness;
};

RemainderReport remainder_diagonals(const InducedOperator& op, const Paraproduct& pi_mu,
                                    const Paraproduct& pi_nu, double zero_tol = 1e-12,
                                    std::optional<double> c_diag = std::nullopt);

/// Nonnegative number per active cube, indexed by cube id.
struct CarlesonSequence {
  LatticePtr lattice;
  std::vector<double> values;
};

/// a_Q = sum over R in Q with l(R) = 2^-r l(Q) of ||Delta^nu_R T_mu chi_Q||^2_nu.
CarlesonSequence carleson_sequence(const InducedOperator& op, int r);

/// Smallest C with sum_{Q in R} a_Q <= C mu(R) over active R; +infinity when a
/// cube of zero mass carries a positive sum.
double carleson_constant(const CarlesonSequence& a, const MeasureGrid& mu);

/// Optimal C in sum_R a_R |f_R|^2 <= C ||f||^2_mu, f_R the mu-average over R.
double embedding_constant(const CarlesonSequence& a, const MeasureGrid& mu,
                          const SpectralOptions& opts = {});

/// Random sequence rescaled to Carleson constant exactly 1.
CarlesonSequence random_carleson_sequence(const MeasureGrid& mu, std::uint64_t seed,
                                          double zero_probability = 0.5);

struct GreedyCarlesonResult {
  CarlesonSequence sequence;
  double embedding = 0.0;
  std::size_t steps = 0;
};

/// Search for a Carleson sequence (constant 1) with large embedding constant.
/// Alternates between the top eigenvector x of the embedding form and the
/// sequence maximizing sum_Q a_Q |x_Q|^2, filled greedily by weight; starts
/// from a point mass on the lightest leaf and stops when the constant stalls.
/// `steps` counts the rounds.
GreedyCarlesonResult greedy_carleson_sequence(const MeasureGrid& mu,
                                              const SpectralOptions& opts = {});

}  // namespace dyadlab
