#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>

#include "dyadlab/operators.hpp"
#include "dyadlab/paraproduct.hpp"
#include "dyadlab/spectral.hpp"

namespace dyadlab {

/// ||T_mu||_{L^2(mu) -> L^2(nu)}: largest singular value of
/// M_nu^{1/2} K M_mu^{1/2} on the positive-mass coordinates.
double operator_norm(const InducedOperator& op, const SpectralOptions& opts = {});

struct UnboundedWitness {
  std::string constant;  // which testing constant blew up
  Cube q;
  std::optional<Cube> r;  // second cube for the pairing constants
  double value = 0.0;     // the nonzero quantity sitting over zero mass
};

struct TestingReport {
  double c_direct_global = 0.0;   // sup ||T_mu chi_Q||^2_nu / mu(Q)
  double c_adjoint_global = 0.0;  // sup ||T*_nu chi_Q||^2_mu / nu(Q)
  double c_direct_local = 0.0;    // sup int_Q |T_mu chi_Q|^2 dnu / mu(Q)
  double c_adjoint_local = 0.0;   // sup int_Q |T*_nu chi_Q|^2 dmu / nu(Q)
  /// Same as c_adjoint_local but integrated against nu.
  double c_adjoint_local_nu = 0.0;
  /// sup over 2^-r l(Q) <= l(R) <= 2^r l(Q) of |<T_mu chi_Q, chi_R>_nu| / (mu(Q) nu(R))^{1/2}.
  double c_diag = 0.0;
  /// |<T chi_Q, chi_R>| / (mu(Q) nu(Q))^{1/2} with the unweighted pairing, same pairs.
  double c_diag_unweighted = 0.0;
  double norm = 0.0;
  double rho = 0.0;
  std::optional<UnboundedWitness> unbounded;

  /// sqrt of each global/local constant and C_diag stay below the norm.
  bool necessity_holds(double tol = 1e-9) const;
};

/// Testing constants of T_mu at band radius r, together with its norm and the
/// sufficiency ratio.
TestingReport testing_constants(const InducedOperator& op, int r, const SpectralOptions& opts = {});

/// norm / (sqrt(C_direct_local) + sqrt(C_adjoint_local) + C_diag); 0 for the zero
/// operator and for infinite testing constants, +infinity when the testing
/// constants vanish on a nonzero operator.
double sufficiency_ratio(const TestingReport& rep);
double sufficiency_ratio(const InducedOperator& op, int r, const SpectralOptions& opts = {});

struct DecompositionTerms {
  double total = 0.0;          // <T_mu f, g>_nu
  double paraproduct_mu = 0.0;  // <Pi^mu f_D, g_D>_nu
  double paraproduct_nu = 0.0;  // <f_D, Pi^nu g_D>_mu
  double comparable = 0.0;      // sum over |depth Q - depth R| <= r of <T_mu D_Q f, D_R g>_nu
  double average_average = 0.0;  // <T_mu f_E, g_E>_nu
  double average_difference = 0.0;  // <T_mu f_E, g_D>_nu
  double difference_average = 0.0;  // <T_mu f_D, g_E>_nu
  double residual = 0.0;
  double relative_residual = 0.0;  // residual / (||f||_mu ||g||_nu)
};

/// Splits <T_mu f, g>_nu into paraproducts, comparable-scale blocks and the
/// root-average terms; f_D, f_E are the martingale and root-average parts.
DecompositionTerms decomposition_identity(const InducedOperator& op, int r, const Eigen::VectorXd& f,
                                          const Eigen::VectorXd& g);
DecompositionTerms decomposition_identity(const InducedOperator& op, const Paraproduct& pi_mu,
                                          const Paraproduct& pi_nu, const Eigen::VectorXd& f,
                                          const Eigen::VectorXd& g);

struct ComparableBlocks {
  std::size_t max_count = 0;  // largest number of R with a nonzero block, over Q
  std::size_t bound = 0;      // M(N, r)
  std::optional<Cube> worst_q;
};

/// For every Q, counts the cubes R with |depth Q - depth R| <= r whose weighted
/// Haar block <T_mu h_Q, h_R>_nu is nonzero.
ComparableBlocks comparable_block_count(const InducedOperator& op, int r, double zero_tol = 1e-12);

/// sum_{t=r}^{2r} 2^{N t} + r 2^{N r}.
std::size_t comparable_block_bound(int dim, int r);

}  // namespace dyadlab
