#include <doctest.h>

#include "dyadlab/analysis.hpp"
#include "dyadlab/operators.hpp"
#include "helpers.hpp"

using namespace dyadlab;

namespace {

// Haar functions of a 1D lattice written out by hand, one column per
// Lebesgue slot: (chi_right - chi_left)/sqrt|I|, and chi_root/sqrt|root|.
Eigen::MatrixXd haar_1d_by_hand(const Lattice& lat) {
  const auto n = static_cast<Eigen::Index>(lat.num_leaves());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t s = 0; s < lat.num_leaves(); ++s) {
    const BasisLabel l = lebesgue_label(lat, s);
    const Cube& q = lat.cube(l.cube);
    const double side = std::ldexp(1.0, q.level);
    for (std::size_t i = 0; i < lat.num_leaves(); ++i) {
      const Cube& leaf = lat.cube(lat.leaf_cube(i));
      if (!contains(q, leaf)) continue;
      double v = 1.0 / std::sqrt(side);
      if (!l.is_root_indicator()) {
        const Cube half = ancestor(leaf, leaf.level < q.level - 1 ? q.level - 1 - leaf.level : 0);
        v *= (half.coords[0] == 2 * q.coords[0]) ? -1.0 : 1.0;
      }
      h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) = v;
    }
  }
  return h;
}

// <T(chi_Q u), chi_R v> in L^2(dx), T given by its Haar coefficients.
double pairing_by_hand(const Eigen::MatrixXd& h, const Eigen::MatrixXd& coeffs, const MeasureGrid& mu,
                       const MeasureGrid& nu, CubeId q, CubeId r) {
  const Lattice& lat = mu.lattice();
  Eigen::VectorXd a = Eigen::VectorXd::Zero(h.cols());
  Eigen::VectorXd b = Eigen::VectorXd::Zero(h.cols());
  for (std::size_t i = 0; i < lat.num_leaves(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    if (lat.leaves(q).contains(i)) a += h.row(k).transpose() * mu.leaf_mass()[k];
    if (lat.leaves(r).contains(i)) b += h.row(k).transpose() * nu.leaf_mass()[k];
  }
  return b.dot(coeffs * a);
}

}  // namespace

TEST_CASE("bilinear form matches the hand-built Haar expansion") {
  for (int r = 0; r <= 2; ++r) {
    const LatticePtr lat = test::two_root_lattice(1, 4);
    const MeasureGrid mu = zero_blocks_measure(lat, 0.2, 3 + r);
    const MeasureGrid nu = lognormal_measure(lat, 0.8, 4 + r);
    const BandOperator band = random_band(lat, r, 10 + r, 1.0, true);
    const InducedOperator op = induce(band, mu, nu);
    const Eigen::MatrixXd h = haar_1d_by_hand(*lat);
    const Eigen::MatrixXd c = test::dense(band.coefficients());
    double worst = 0.0;
    for (CubeId q = 0; q < lat->num_cubes(); ++q) {
      for (CubeId rc = 0; rc < lat->num_cubes(); ++rc) {
        worst = std::max(worst, std::abs(bilinear(op, q, rc) - pairing_by_hand(h, c, mu, nu, q, rc)));
      }
    }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("identity band induces multiplication by the density") {
  const LatticePtr lat = test::two_root_lattice(2, 2);
  const MeasureGrid mu = lognormal_measure(lat, 1.0, 1);
  const InducedOperator op = induce(identity_band(lat), mu, mu);
  const Eigen::VectorXd f = test::randn(static_cast<Eigen::Index>(lat->num_leaves()), 2);
  CHECK((op.apply(f) - mu.density().cwiseProduct(f)).norm() <= 1e-12 * f.norm() * mu.density().maxCoeff());
}

TEST_CASE("Haar multiplier with alpha = 1 projects onto mean-zero functions") {
  const LatticePtr lat = unit_lattice(1, 0, -4);
  const MeasureGrid dx = lebesgue_measure(lat);
  const InducedOperator op = induce(haar_multiplier(lat, 1.0), dx, dx);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(16);
  CHECK(op.apply(one).norm() <= 1e-12);
  const Eigen::VectorXd f = test::randn(16, 3);
  const Eigen::VectorXd mean_free = f.array() - f.mean();
  CHECK((op.apply(f) - mean_free).norm() <= 1e-12);
  CHECK(operator_norm(op) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(haar_multiplier(lat, 2.0).radius() == 0);
}

TEST_CASE("Haar shift: S h_I = h_{I+} - h_{I-} with boundary truncation") {
  const LatticePtr lat = unit_lattice(1, 0, -4);
  const BandOperator s = haar_shift(lat);
  CHECK(s.radius() == 1);
  CHECK(s.truncated_terms() == 8);  // intervals whose halves are leaves
  CHECK(check_band(s, 1).pass);
  const Eigen::MatrixXd h = haar_1d_by_hand(*lat);
  const MeasureGrid dx = lebesgue_measure(lat);
  const InducedOperator op = induce(s, dx, dx);
  for (CubeId q = 0; q < lat->num_interior(); ++q) {
    const Eigen::VectorXd hq = h.col(static_cast<Eigen::Index>(lebesgue_slot(*lat, q, 0)));
    Eigen::VectorXd want = Eigen::VectorXd::Zero(16);
    if (lat->depth_of(q) + 1 < lat->depth()) {
      want = h.col(static_cast<Eigen::Index>(lebesgue_slot(*lat, lat->child(q, 1), 0))) -
             h.col(static_cast<Eigen::Index>(lebesgue_slot(*lat, lat->child(q, 0), 0)));
    }
    CHECK((op.apply(hq) - want).norm() <= 1e-12);
  }
  CHECK_THROWS(haar_shift(unit_lattice(2, 0, -2)));
}

TEST_CASE("random band respects its radius and fills it") {
  for (int dim = 1; dim <= 2; ++dim) {
    for (int r = 0; r <= 2; ++r) {
      const LatticePtr lat = test::two_root_lattice(dim, 3);
      const BandOperator band = random_band(lat, r, 100 + r, 2.0, r == 1);
      CHECK(band.radius() == r);
      CHECK(band.support_radius() == r);
      CHECK(check_band(band, r).pass);
      if (r > 0) {
        const BandCheck tight = check_band(band, r - 1);
        CHECK_FALSE(tight.pass);
        REQUIRE(tight.witness_distance.has_value());
        CHECK(*tight.witness_distance == r);
      }
      for (const BandEntry& e : band.entries()) CHECK(std::abs(e.value) <= 2.0);
      CHECK(band.has_root_blocks() == (r == 1));
    }
  }
}

TEST_CASE("explicit entries and band violations") {
  const LatticePtr lat = unit_lattice(1, 0, -3);
  std::vector<ExplicitEntry> entries{{Cube{-2, {3}}, 0, Cube{-2, {0}}, 0, 1.5},
                                     {Cube{0, {0}}, BasisLabel::kRootIndicator, Cube{0, {0}}, 0, -0.5}};
  const BandOperator band = explicit_band(lat, entries);
  CHECK(band.radius() == 4);
  CHECK(band.entry(*lat->find(Cube{-2, {3}}), 0, *lat->find(Cube{-2, {0}}), 0) == 1.5);
  const BandCheck c = check_band(band, 2);
  CHECK_FALSE(c.pass);
  CHECK(c.max_violation == doctest::Approx(1.0));
  CHECK(c.witness_distance == 4);
  CHECK_THROWS(explicit_band(lat, {{Cube{-5, {0}}, 0, Cube{0, {0}}, 0, 1.0}}));
}

TEST_CASE("adjoint duality") {
  for (int i = 0; i < 100; ++i) {
    const LatticePtr lat = test::two_root_lattice(1 + i % 2, 2 + i % 3);
    const MeasureGrid mu = test::some_measure(lat, i, 1000 + i);
    const MeasureGrid nu = test::some_measure(lat, i + 1, 2000 + i);
    const InducedOperator op = induce(random_band(lat, i % 2, i, 1.0, i % 3 == 0), mu, nu);
    const auto n = static_cast<Eigen::Index>(lat->num_leaves());
    const Eigen::VectorXd f = test::randn(n, 3 * i);
    const Eigen::VectorXd g = test::randn(n, 3 * i + 1);
    const double lhs = op.apply(f).cwiseProduct(nu.leaf_mass()).dot(g);
    const double rhs = f.cwiseProduct(mu.leaf_mass()).dot(op.apply_adjoint(g));
    const double scale = std::sqrt(f.cwiseAbs2().dot(mu.leaf_mass()) * g.cwiseAbs2().dot(nu.leaf_mass())) *
                         std::max(operator_norm(op), 1e-300);
    CHECK(std::abs(lhs - rhs) <= 1e-11 * scale);
    const InducedOperator adj = op.adjoint();
    CHECK((adj.apply(g) - op.apply_adjoint(g)).norm() <= 1e-12 * std::max(1.0, op.apply_adjoint(g).norm()));
  }
}

TEST_CASE("factored form agrees with the dense kernel") {
  const LatticePtr lat = unit_lattice(1, 0, -13);  // 8192 leaves: no dense kernel
  const MeasureGrid mu = lognormal_measure(lat, 0.5, 1);
  const BandOperator band = random_band(lat, 1, 2, 1.0, true);
  const InducedOperator big = induce(band, mu, mu);
  CHECK_FALSE(big.has_dense_kernel());
  CHECK_THROWS_AS(big.kernel(), std::length_error);
  const Eigen::VectorXd f = test::randn(8192, 5);
  const Eigen::VectorXd g = test::randn(8192, 6);
  const double lhs = big.apply(f).cwiseProduct(mu.leaf_mass()).dot(g);
  const double rhs = f.cwiseProduct(mu.leaf_mass()).dot(big.apply_adjoint(g));
  CHECK(test::rel(lhs, rhs) <= 1e-10);
  CHECK((big.adjoint().apply(g) - big.apply_adjoint(g)).norm() <= 1e-12 * big.apply_adjoint(g).norm());

  const LatticePtr small = unit_lattice(1, 0, -6);
  const MeasureGrid ms = lognormal_measure(small, 0.5, 1);
  const BandOperator bs = random_band(small, 1, 2, 1.0, true);
  const InducedOperator dense = induce(bs, ms, ms);
  const Eigen::VectorXd fs = test::randn(64, 7);
  const Eigen::MatrixXd h = test::dense(lebesgue_haar_system(small).basis);
  const Eigen::VectorXd factored = h * (test::dense(bs.coefficients()) * (h.transpose() * fs.cwiseProduct(ms.leaf_mass())));
  CHECK((dense.apply(fs) - factored).norm() <= 1e-12 * factored.norm());
}

TEST_CASE("induced band operators are well localized, including zero blocks") {
  for (int i = 0; i < 30; ++i) {
    const int r = i % 3;
    const LatticePtr lat = test::two_root_lattice(1 + i % 2, 3 + (i % 2 == 0 ? i % 3 : 0));
    const MeasureGrid mu = zero_blocks_measure(lat, 0.3, 50 + i);
    const MeasureGrid nu = test::some_measure(lat, i, 60 + i);
    const InducedOperator op = induce(random_band(lat, r, 70 + i, 1.0, i % 4 == 0), mu, nu);
    const LocalizationReport rep = check_well_localized(op, r);
    CHECK(rep.pass);
    CHECK(rep.max_violation <= 1e-12);
    CHECK(rep.entries_flagged > 0);
  }
  const LatticePtr lat = unit_lattice(1, 0, -3);
  const MeasureGrid dx = lebesgue_measure(lat);
  const InducedOperator zero = InducedOperator::from_kernel(Eigen::MatrixXd::Zero(8, 8), dx, dx, 0);
  CHECK(check_well_localized(zero, 0).pass);
}

TEST_CASE("planted localization violation is caught with its witness") {
  const LatticePtr lat = unit_lattice(1, 0, -4);
  const MeasureGrid dx = lebesgue_measure(lat);
  // T chi_{leaf 0} lands on leaf 15: far outside any Q^(1) of the first leaf.
  Eigen::MatrixXd k = Eigen::MatrixXd::Identity(16, 16);
  k(15, 0) = 0.5;
  const InducedOperator op = InducedOperator::from_kernel(k, dx, dx, 1);
  const LocalizationReport direct = check_lower_triangular(op, 1, 1e-12, false);
  CHECK_FALSE(direct.pass);
  REQUIRE(direct.witness.has_value());
  CHECK(contains(direct.witness->test_cube, lat->cube(lat->leaf_cube(0))));
  CHECK_FALSE(contains(direct.witness->test_cube, direct.witness->haar_cube));
  const LocalizationReport both = check_well_localized(op, 1);
  CHECK_FALSE(both.pass);
  CHECK(both.max_violation > 1e-3);
}

TEST_CASE("weight monotonicity: shrinking nu never increases the norm") {
  for (int i = 0; i < 50; ++i) {
    const LatticePtr lat = test::two_root_lattice(1 + i % 2, 2 + i % 2);
    const MeasureGrid mu = test::some_measure(lat, i, 300 + i);
    const MeasureGrid nu = lognormal_measure(lat, 1.0, 400 + i);
    const Eigen::VectorXd shrink = (test::randn(nu.leaf_mass().size(), 500 + i).array().abs() / 3.0).min(1.0);
    const MeasureGrid nu2(lat, nu.leaf_mass().cwiseProduct(shrink));
    const BandOperator band = random_band(lat, i % 3 == 0 ? 0 : 1, 600 + i, 1.0, i % 2 == 0);
    CHECK(operator_norm(induce(band, mu, nu2)) <= operator_norm(induce(band, mu, nu)) * (1 + 1e-12));
  }
}
