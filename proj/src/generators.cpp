#include "dyadlab/generators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dyadlab {

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x6479u};
  return Rng(seq);
}

MeasureGrid uniform_measure(const LatticePtr& lattice, double mass_per_leaf) {
  return MeasureGrid(lattice, Eigen::VectorXd::Constant(
                                  static_cast<Eigen::Index>(lattice->num_leaves()), mass_per_leaf));
}

MeasureGrid lebesgue_measure(const LatticePtr& lattice) {
  return uniform_measure(lattice, lattice->leaf_volume());
}

MeasureGrid lognormal_measure(const LatticePtr& lattice, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("lognormal sigma must be nonnegative");
  Rng rng = make_rng(seed, 1);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd m(static_cast<Eigen::Index>(lattice->num_leaves()));
  for (Eigen::Index i = 0; i < m.size(); ++i) m[i] = lattice->leaf_volume() * std::exp(sigma * z(rng));
  return MeasureGrid(lattice, std::move(m));
}

MeasureGrid sparse_atoms_measure(const LatticePtr& lattice, std::size_t count, std::uint64_t seed) {
  const std::size_t n = lattice->num_leaves();
  if (count > n) throw std::invalid_argument("more atoms than leaves");
  Rng rng = make_rng(seed, 2);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < count; ++k) {
    m[static_cast<Eigen::Index>(order[k])] = lattice->leaf_volume() * std::exp(z(rng));
  }
  return MeasureGrid(lattice, std::move(m));
}

MeasureGrid zero_blocks_measure(const LatticePtr& lattice, double fraction, std::uint64_t seed,
                                double sigma) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("zero_blocks fraction must be in [0, 1)");
  }
  Eigen::VectorXd m = lognormal_measure(lattice, sigma, seed).leaf_mass();
  Rng rng = make_rng(seed, 3);
  const std::size_t n = lattice->num_leaves();
  const auto target = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
  // Blocks are drawn below the roots so no root is emptied by a single draw.
  const CubeId first = lattice->num_roots();
  std::uniform_int_distribution<CubeId> pick(first, lattice->num_cubes() - 1);
  std::size_t zeroed = 0;
  while (zeroed < target) {
    const LeafRange lr = lattice->leaves(pick(rng));
    for (std::size_t i = lr.begin; i < lr.end; ++i) {
      auto& v = m[static_cast<Eigen::Index>(i)];
      if (v != 0.0) {
        v = 0.0;
        ++zeroed;
      }
    }
  }
  return MeasureGrid(lattice, std::move(m));
}

GridFunction random_function(const LatticePtr& lattice, std::uint64_t seed) {
  Rng rng = make_rng(seed, 4);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(lattice->num_leaves()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = z(rng);
  return GridFunction(lattice, std::move(v));
}

}  // namespace dyadlab
