#include "dyadlab/lattice.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dyadlab {

namespace {

constexpr int kMaxDim = 8;
constexpr std::size_t kMaxLeaves = std::size_t{1} << 24;

}  // namespace

std::shared_ptr<const Lattice> Lattice::build(int dim, int top_level, int leaf_level,
                                              std::vector<Cube> roots) {
  if (dim < 1 || dim > kMaxDim) {
    throw std::invalid_argument("dimension must be in [1, " + std::to_string(kMaxDim) + "]");
  }
  if (top_level <= leaf_level) {
    throw std::invalid_argument("top_level must exceed leaf_level (got top " +
                                std::to_string(top_level) + ", leaf " +
                                std::to_string(leaf_level) + ")");
  }
  if (roots.empty()) throw std::invalid_argument("lattice needs at least one root");

  std::shared_ptr<Lattice> lat(new Lattice());
  lat->dim_ = dim;
  lat->top_level_ = top_level;
  lat->leaf_level_ = leaf_level;
  lat->fanout_ = std::size_t{1} << dim;

  const int depth = top_level - leaf_level;
  if (static_cast<long long>(dim) * depth >= 62) throw std::invalid_argument("lattice too deep");
  lat->leaves_per_root_ = std::size_t{1} << (dim * depth);
  if (lat->leaves_per_root_ * roots.size() > kMaxLeaves) {
    throw std::invalid_argument("lattice has more than 2^24 leaves");
  }
  lat->num_leaves_ = lat->leaves_per_root_ * roots.size();

  for (std::size_t i = 0; i < roots.size(); ++i) {
    const Cube& r = roots[i];
    if (r.dim() != dim) throw std::invalid_argument("root " + to_string(r) + " has wrong dimension");
    if (r.level != top_level) {
      throw std::invalid_argument("root " + to_string(r) + " is not at top_level");
    }
    if (!lat->root_index_.emplace(r.coords, i).second) {
      throw std::invalid_argument("overlapping roots: " + to_string(r) + " repeated");
    }
  }
  lat->roots_ = std::move(roots);

  const std::size_t nroots = lat->roots_.size();
  lat->merge_height_.assign(nroots, std::vector<int>(nroots, 0));
  for (std::size_t a = 0; a < nroots; ++a) {
    for (std::size_t b = 0; b < nroots; ++b) {
      auto d = tree_distance(lat->roots_[a], lat->roots_[b]);
      lat->merge_height_[a][b] = d ? *d / 2 : -1;
    }
  }

  // Top-down enumeration; within a depth, root-major then Morton order.
  lat->depth_offset_.assign(static_cast<std::size_t>(depth) + 2, 0);
  std::size_t per_root = 1;
  for (int t = 0; t <= depth; ++t) {
    lat->depth_offset_[t + 1] = lat->depth_offset_[t] + per_root * nroots;
    per_root *= lat->fanout_;
  }
  const std::size_t total = lat->depth_offset_.back();
  lat->cubes_.reserve(total);
  lat->info_.reserve(total);

  for (std::size_t r = 0; r < nroots; ++r) {
    lat->cubes_.push_back(lat->roots_[r]);
    lat->info_.push_back({0, r, 0, {r * lat->leaves_per_root_, (r + 1) * lat->leaves_per_root_}});
  }
  for (int t = 1; t <= depth; ++t) {
    const std::size_t span = lat->leaves_per_root_ >> (dim * t);
    for (CubeId p = lat->depth_offset_[t - 1]; p < lat->depth_offset_[t]; ++p) {
      const Cube parent_cube = lat->cubes_[p];
      const Info pinfo = lat->info_[p];
      for (unsigned i = 0; i < lat->fanout_; ++i) {
        const std::size_t m = pinfo.morton * lat->fanout_ + i;
        const std::size_t begin = pinfo.root * lat->leaves_per_root_ + m * span;
        lat->cubes_.push_back(dyadlab::child(parent_cube, i));
        lat->info_.push_back({t, pinfo.root, m, {begin, begin + span}});
      }
    }
  }
  return lat;
}

std::optional<CubeId> Lattice::parent(CubeId id) const {
  const Info& in = info_.at(id);
  if (in.depth == 0) return std::nullopt;
  const std::size_t per_root = std::size_t{1} << (dim_ * (in.depth - 1));
  return depth_offset_[in.depth - 1] + in.root * per_root + in.morton / fanout_;
}

CubeId Lattice::child(CubeId id, unsigned i) const {
  const Info& in = info_.at(id);
  if (in.depth == depth()) throw std::invalid_argument("leaf cube has no children in the lattice");
  if (i >= fanout_) throw std::out_of_range("child index out of range");
  const std::size_t per_root = std::size_t{1} << (dim_ * (in.depth + 1));
  return depth_offset_[in.depth + 1] + in.root * per_root + in.morton * fanout_ + i;
}

CubeId Lattice::ancestor_at_depth(CubeId id, int target_depth) const {
  const Info& in = info_.at(id);
  if (target_depth < 0 || target_depth > in.depth) {
    throw std::out_of_range("ancestor depth out of range");
  }
  const int up = in.depth - target_depth;
  const std::size_t per_root = std::size_t{1} << (dim_ * target_depth);
  return depth_offset_[target_depth] + in.root * per_root + (in.morton >> (dim_ * up));
}

std::optional<CubeId> Lattice::find(const Cube& q) const {
  if (q.dim() != dim_ || q.level > top_level_ || q.level < leaf_level_) return std::nullopt;
  const int t = top_level_ - q.level;
  const Cube top = dyadlab::ancestor(q, t);
  auto it = root_index_.find(top.coords);
  if (it == root_index_.end()) return std::nullopt;
  std::size_t m = 0;
  for (int s = t - 1; s >= 0; --s) {
    unsigned i = 0;
    for (int d = 0; d < dim_; ++d) {
      const std::int64_t rel = q.coords[d] - (top.coords[d] << t);
      i |= static_cast<unsigned>((rel >> s) & 1) << (dim_ - 1 - d);
    }
    m = m * fanout_ + i;
  }
  const std::size_t per_root = std::size_t{1} << (dim_ * t);
  return depth_offset_[t] + it->second * per_root + m;
}

bool Lattice::contains(CubeId outer, CubeId inner) const {
  const Info& o = info_.at(outer);
  const Info& i = info_.at(inner);
  return o.leaves.begin <= i.leaves.begin && i.leaves.end <= o.leaves.end;
}

bool Lattice::inside_ancestor(CubeId r, CubeId q, int k) const {
  if (k < 0) throw std::invalid_argument("ancestor order must be nonnegative");
  const Info& ri = info_.at(r);
  const Info& qi = info_.at(q);
  const int anc_depth = qi.depth - k;
  if (anc_depth > ri.depth) return false;
  if (ri.root == qi.root) {
    if (anc_depth <= 0) return true;
    return ancestor_at_depth(r, anc_depth) == ancestor_at_depth(q, anc_depth);
  }
  const int h = merge_height_[qi.root][ri.root];
  return h >= 0 && -anc_depth >= h;
}

std::optional<int> Lattice::distance(CubeId a, CubeId b) const {
  const Info& ai = info_.at(a);
  const Info& bi = info_.at(b);
  if (ai.root != bi.root) {
    const int h = merge_height_[ai.root][bi.root];
    if (h < 0) return std::nullopt;
    return ai.depth + bi.depth + 2 * h;
  }
  int t = std::min(ai.depth, bi.depth);
  while (ancestor_at_depth(a, t) != ancestor_at_depth(b, t)) --t;
  return (ai.depth - t) + (bi.depth - t);
}

std::vector<std::size_t> Lattice::leaves_inside(const Cube& q) const {
  std::vector<std::size_t> out;
  if (q.dim() != dim_) throw std::invalid_argument("cube dimension does not match lattice");
  if (q.level < leaf_level_) {
    throw std::invalid_argument("cube " + to_string(q) + " is finer than the leaf level");
  }
  if (q.level <= top_level_) {
    if (auto id = find(q)) {
      const LeafRange lr = leaves(*id);
      for (std::size_t i = lr.begin; i < lr.end; ++i) out.push_back(i);
    }
    return out;
  }
  for (std::size_t r = 0; r < roots_.size(); ++r) {
    if (dyadlab::contains(q, roots_[r])) {
      for (std::size_t i = r * leaves_per_root_; i < (r + 1) * leaves_per_root_; ++i) {
        out.push_back(i);
      }
    }
  }
  return out;
}

double Lattice::leaf_volume() const { return std::ldexp(1.0, dim_ * leaf_level_); }

double Lattice::volume(CubeId id) const { return std::ldexp(1.0, dim_ * level_of(id)); }

std::size_t Lattice::leaf_from_row_major(std::size_t root, std::size_t flat) const {
  if (root >= roots_.size() || flat >= leaves_per_root_) {
    throw std::out_of_range("row-major leaf position out of range");
  }
  const int depth_bits = depth();
  const std::size_t side = std::size_t{1} << depth_bits;
  std::vector<std::size_t> rel(static_cast<std::size_t>(dim_));
  for (int d = dim_ - 1; d >= 0; --d) {
    rel[d] = flat % side;
    flat /= side;
  }
  std::size_t m = 0;
  for (int s = depth_bits - 1; s >= 0; --s) {
    for (int d = 0; d < dim_; ++d) m = (m << 1) | ((rel[d] >> s) & 1);
  }
  return root * leaves_per_root_ + m;
}

LatticePtr build_lattice(int dim, int top_level, int leaf_level, std::vector<Cube> roots) {
  return Lattice::build(dim, top_level, leaf_level, std::move(roots));
}

LatticePtr unit_lattice(int dim, int top_level, int leaf_level) {
  return Lattice::build(dim, top_level, leaf_level,
                        {Cube{top_level, std::vector<std::int64_t>(dim, 0)}});
}

}  // namespace dyadlab
