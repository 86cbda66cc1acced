#pragma once

#include <cstdint>
#include <random>

#include "dyadlab/measure.hpp"

namespace dyadlab {

using Rng = std::mt19937_64;

/// Independent, reproducible stream for (seed, stream) pairs.
Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0);

/// Every leaf gets `mass_per_leaf`.
MeasureGrid uniform_measure(const LatticePtr& lattice, double mass_per_leaf = 1.0);

/// Lebesgue measure: every leaf gets its volume.
MeasureGrid lebesgue_measure(const LatticePtr& lattice);

/// Leaf density exp(sigma * Z), Z standard normal.
MeasureGrid lognormal_measure(const LatticePtr& lattice, double sigma, std::uint64_t seed);

/// `count` distinct leaves carry lognormal(1) mass; all other leaves are empty.
MeasureGrid sparse_atoms_measure(const LatticePtr& lattice, std::size_t count, std::uint64_t seed);

/// Lognormal(sigma) density with randomly chosen active cubes zeroed until at
/// least `fraction` of the leaves are empty.
MeasureGrid zero_blocks_measure(const LatticePtr& lattice, double fraction, std::uint64_t seed,
                                double sigma = 1.0);

/// Standard normal leaf values.
GridFunction random_function(const LatticePtr& lattice, std::uint64_t seed);

}  // namespace dyadlab
