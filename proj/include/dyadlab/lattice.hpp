#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "dyadlab/cube.hpp"

namespace dyadlab {

using CubeId = std::size_t;

/// Half-open range of leaf indices covered by an active cube.
struct LeafRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool contains(std::size_t leaf) const { return leaf >= begin && leaf < end; }
};

/// Finite truncation of the standard dyadic lattice: every descendant of the
/// roots from top_level down to leaf_level.
///
/// Active cubes are numbered top-down (depth 0 = roots), root-major within a
/// depth, and in Morton order inside each root, so the leaves under any active
/// cube form a contiguous range of leaf indices. Cube arithmetic beyond the
/// active set (ancestors above the roots, distances across roots) is global.
class Lattice {
 public:
  static std::shared_ptr<const Lattice> build(int dim, int top_level, int leaf_level,
                                              std::vector<Cube> roots);

  int dim() const { return dim_; }
  int top_level() const { return top_level_; }
  int leaf_level() const { return leaf_level_; }
  int depth() const { return top_level_ - leaf_level_; }
  std::size_t fanout() const { return fanout_; }

  const std::vector<Cube>& roots() const { return roots_; }
  std::size_t num_roots() const { return roots_.size(); }
  std::size_t num_cubes() const { return cubes_.size(); }
  std::size_t num_leaves() const { return num_leaves_; }
  /// Non-leaf cubes come first in the numbering: ids [0, num_interior()).
  std::size_t num_interior() const { return num_cubes() - num_leaves_; }

  const Cube& cube(CubeId id) const { return cubes_.at(id); }
  int depth_of(CubeId id) const { return info_[id].depth; }
  int level_of(CubeId id) const { return top_level_ - info_[id].depth; }
  bool is_leaf(CubeId id) const { return info_[id].depth == depth(); }
  std::size_t root_of(CubeId id) const { return info_[id].root; }
  LeafRange leaves(CubeId id) const { return info_[id].leaves; }
  std::optional<CubeId> parent(CubeId id) const;
  CubeId child(CubeId id, unsigned i) const;
  CubeId ancestor_at_depth(CubeId id, int target_depth) const;

  /// Ids of active cubes at depth t form [depth_begin(t), depth_begin(t + 1)).
  CubeId depth_begin(int t) const { return depth_offset_.at(static_cast<std::size_t>(t)); }
  CubeId leaf_cube(std::size_t leaf) const { return depth_offset_[static_cast<std::size_t>(depth())] + leaf; }
  CubeId root_cube(std::size_t root) const { return root; }

  std::optional<CubeId> find(const Cube& q) const;

  /// inner is a subset of outer.
  bool contains(CubeId outer, CubeId inner) const;
  /// r is a subset of q^(k); q^(k) may lie above the roots.
  bool inside_ancestor(CubeId r, CubeId q, int k) const;
  /// Tree distance; nullopt when the two roots have no common ancestor.
  std::optional<int> distance(CubeId a, CubeId b) const;

  /// Leaves (as a leaf-index list) covered by an arbitrary cube of the grid.
  std::vector<std::size_t> leaves_inside(const Cube& q) const;

  /// Lebesgue measure of a leaf cell, (2^leaf_level)^N.
  double leaf_volume() const;
  double volume(CubeId id) const;

  /// Internal leaf index of the leaf at position `flat` in the row-major
  /// (first coordinate slowest) order of root `root`.
  std::size_t leaf_from_row_major(std::size_t root, std::size_t flat) const;

  friend bool operator==(const Lattice& a, const Lattice& b) {
    return a.dim_ == b.dim_ && a.top_level_ == b.top_level_ && a.leaf_level_ == b.leaf_level_ &&
           a.roots_ == b.roots_;
  }

 private:
  struct Info {
    int depth = 0;
    std::size_t root = 0;
    std::size_t morton = 0;
    LeafRange leaves;
  };

  Lattice() = default;

  int dim_ = 1;
  int top_level_ = 0;
  int leaf_level_ = 0;
  std::size_t fanout_ = 2;
  std::size_t leaves_per_root_ = 0;
  std::size_t num_leaves_ = 0;
  std::vector<Cube> roots_;
  std::vector<Cube> cubes_;
  std::vector<Info> info_;
  std::vector<CubeId> depth_offset_;
  // merge_height_[a][b]: levels above the roots at which roots a and b first
  // share an ancestor; -1 when they never do.
  std::vector<std::vector<int>> merge_height_;
  std::map<std::vector<std::int64_t>, std::size_t> root_index_;
};

using LatticePtr = std::shared_ptr<const Lattice>;

/// Convenience wrapper around Lattice::build.
LatticePtr build_lattice(int dim, int top_level, int leaf_level, std::vector<Cube> roots);

/// Single root [0, 2^top_level)^N.
LatticePtr unit_lattice(int dim, int top_level, int leaf_level);

}  // namespace dyadlab
