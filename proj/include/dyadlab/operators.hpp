#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "dyadlab/measure.hpp"

namespace dyadlab {

/// One coefficient (T h_in, h_out) of an operator in the unweighted Haar basis.
struct BandEntry {
  BasisLabel out;
  BasisLabel in;
  double value = 0.0;
};

/// Entry addressed by grid cubes, as read from a config file.
struct ExplicitEntry {
  Cube out_cube;
  int out_component = 0;
  Cube in_cube;
  int in_component = 0;
  double value = 0.0;
};

/// Matrix of T in the unweighted Haar basis of a lattice (plus optional
/// pairings with the normalized root indicators). Rows index the output slot,
/// columns the input slot, both as laid out by lebesgue_haar_system.
class BandOperator {
 public:
  BandOperator(LatticePtr lattice, Eigen::SparseMatrix<double> coefficients, int radius,
               std::size_t truncated_terms = 0);

  const Lattice& lattice() const { return *lattice_; }
  const LatticePtr& lattice_ptr() const { return lattice_; }
  int radius() const { return radius_; }
  const Eigen::SparseMatrix<double>& coefficients() const { return coeffs_; }
  /// Terms dropped because they would need Haar functions below the leaf level.
  std::size_t truncated_terms() const { return truncated_; }

  std::vector<BandEntry> entries() const;
  double entry(CubeId out_cube, int out_component, CubeId in_cube, int in_component) const;
  bool has_root_blocks() const;
  /// Largest tree distance carried by a nonzero entry; nullopt for infinity.
  std::optional<int> support_radius() const;

 private:
  LatticePtr lattice_;
  Eigen::SparseMatrix<double> coeffs_;
  int radius_ = 0;
  std::size_t truncated_ = 0;
};

/// alpha, one value per non-leaf cube in id order.
struct MultiplierSpec {
  std::vector<double> alpha;
};

BandOperator haar_multiplier(const LatticePtr& lattice, const MultiplierSpec& spec);
BandOperator haar_multiplier(const LatticePtr& lattice, double alpha);

/// S f = sum over I of (f, h_I)(h_{I+} - h_{I-}); one-dimensional only. Terms
/// whose halves are leaves are dropped and counted in truncated_terms().
BandOperator haar_shift(const LatticePtr& lattice);

/// i.i.d. uniform [-amplitude, amplitude] entries on every pair of Haar slots at
/// tree distance <= r; root indicators take part when root_blocks is set.
BandOperator random_band(const LatticePtr& lattice, int r, std::uint64_t seed, double amplitude,
                         bool root_blocks = false);

/// Identity on the leaf space: alpha = 1 multiplier plus unit root blocks.
BandOperator identity_band(const LatticePtr& lattice);

/// Operator from explicit entries. A negative radius means "measure it".
BandOperator explicit_band(const LatticePtr& lattice, const std::vector<ExplicitEntry>& entries,
                           int radius = -1);

struct BandCheck {
  bool pass = true;
  double max_violation = 0.0;  // normalized by the largest absolute entry
  std::optional<BandEntry> witness;
  std::optional<int> witness_distance;  // nullopt with a witness means infinite
};

BandCheck check_band(const BandOperator& op, int r, double zero_tol = 1e-12);

/// T_mu = T M_u acting L^2(mu) -> L^2(nu), stored through its leaf kernel K:
/// T_mu f = K (mu * f) and T*_nu g = K^T (nu * g), so that
/// <T_mu f, g>_nu = g^T M_nu K M_mu f.
class InducedOperator {
 public:
  /// Lattices larger than this keep only the factored form H B H^T.
  static constexpr std::size_t kDenseLeafLimit = 4096;

  InducedOperator(const BandOperator& op, MeasureGrid mu, MeasureGrid nu);

  /// Arbitrary leaf kernel; used for planted and adversarial operators.
  static InducedOperator from_kernel(Eigen::MatrixXd kernel, MeasureGrid mu, MeasureGrid nu,
                                     int radius);

  const Lattice& lattice() const { return mu_.lattice(); }
  const LatticePtr& lattice_ptr() const { return mu_.lattice_ptr(); }
  const MeasureGrid& mu() const { return mu_; }
  const MeasureGrid& nu() const { return nu_; }
  int radius() const { return radius_; }

  bool has_dense_kernel() const { return static_cast<bool>(kernel_); }
  const Eigen::MatrixXd& kernel() const;
  /// Leaf matrix of f -> T_mu f, i.e. K M_mu.
  Eigen::MatrixXd leaf_matrix() const;

  Eigen::VectorXd apply(const Eigen::VectorXd& f) const;
  Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& g) const;

  /// T*_nu viewed as an induced operator L^2(nu) -> L^2(mu).
  InducedOperator adjoint() const;

 private:
  struct Factored {
    Eigen::SparseMatrix<double> haar;
    Eigen::SparseMatrix<double> coeffs;
  };

  InducedOperator(MeasureGrid mu, MeasureGrid nu, int radius) : mu_(std::move(mu)), nu_(std::move(nu)), radius_(radius) {}

  MeasureGrid mu_;
  MeasureGrid nu_;
  int radius_ = 0;
  std::shared_ptr<const Eigen::MatrixXd> kernel_;
  std::shared_ptr<const Factored> factored_;
  bool transposed_ = false;
};

InducedOperator induce(const BandOperator& op, const MeasureGrid& mu, const MeasureGrid& nu);

/// <T_mu chi_Q, chi_R>_nu.
double bilinear(const InducedOperator& op, CubeId q, CubeId r);

/// Column Q holds T_mu chi_Q, for every active cube Q in id order.
Eigen::MatrixXd indicator_images(const InducedOperator& op);

/// Matrix of a leaf operator A : L^2(in) -> L^2(out) in weighted Haar systems:
/// entry (j, i) = <A w_i, v_j>_out.
Eigen::MatrixXd haar_matrix(const Eigen::MatrixXd& leaf_operator, const HaarSystem& in_system,
                            const MeasureGrid& out_measure, const HaarSystem& out_system);

struct LocalizationWitness {
  bool adjoint_side = false;  // false: T_mu against nu-Haar; true: T*_nu against mu-Haar
  Cube test_cube;             // Q, tested through chi_Q
  Cube haar_cube;             // R, carrying the weighted Haar function
  int component = 0;
  double value = 0.0;
};

struct LocalizationReport {
  bool pass = true;
  double max_violation = 0.0;  // normalized by the largest scanned entry
  std::size_t pairs_checked = 0;
  std::size_t entries_flagged = 0;
  std::optional<LocalizationWitness> witness;
};

/// Scans <T_mu chi_Q, h_R^nu>_nu over all l(R) <= l(Q) and flags the entries that
/// must vanish when R is not inside Q^(r), or l(R) <= 2^-r l(Q) and R is not
/// inside Q; then does the same for T*_nu with mu-Haar functions.
LocalizationReport check_well_localized(const InducedOperator& op, int r,
                                        double zero_tol = 1e-12);

/// One-sided scan (lower triangular localization of op only).
LocalizationReport check_lower_triangular(const InducedOperator& op, int r, double zero_tol,
                                          bool adjoint_side);

}  // namespace dyadlab
