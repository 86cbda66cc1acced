#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dyadlab {

/// A dyadic cube of the standard grid: side 2^level, lower corner coords * 2^level.
///
/// Levels and coordinates are integers, so containment and ancestry are exact.
struct Cube {
  int level = 0;
  std::vector<std::int64_t> coords;

  Cube() = default;
  Cube(int lvl, std::vector<std::int64_t> k) : level(lvl), coords(std::move(k)) {}

  int dim() const { return static_cast<int>(coords.size()); }

  friend bool operator==(const Cube&, const Cube&) = default;
  friend std::strong_ordering operator<=>(const Cube& a, const Cube& b) {
    if (auto c = a.level <=> b.level; c != 0) return c;
    return a.coords <=> b.coords;
  }
};

/// The 2^N children of q, in lexicographic order of their coordinates.
std::vector<Cube> children(const Cube& q);

/// The i-th child (first coordinate is the most significant bit of i).
Cube child(const Cube& q, unsigned i);

Cube parent(const Cube& q);

/// q^(k): the cube of side 2^k * side(q) containing q.
Cube ancestor(const Cube& q, int k);

/// True when inner is a subset of outer (equality included).
bool contains(const Cube& outer, const Cube& inner);

bool intersects(const Cube& a, const Cube& b);

/// Least common dyadic ancestor, or nullopt when the cubes lie in different
/// quadrants of the standard grid and never merge.
std::optional<Cube> common_ancestor(const Cube& a, const Cube& b);

/// Graph distance in the 2^N-ary dyadic tree; nullopt stands for infinity.
std::optional<int> tree_distance(const Cube& a, const Cube& b);

std::string to_string(const Cube& q);

}  // namespace dyadlab
