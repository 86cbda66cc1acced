#include "dyadlab/cube.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace dyadlab {

namespace {

void require_same_dim(const Cube& a, const Cube& b) {
  if (a.dim() != b.dim()) throw std::invalid_argument("cubes of different dimension");
}

// Arithmetic shift is floor division by 2^k for negative coordinates too.
std::int64_t floor_shift(std::int64_t x, int k) { return k >= 63 ? (x < 0 ? -1 : 0) : (x >> k); }

bool is_fixed_point(const Cube& q) {
  return std::all_of(q.coords.begin(), q.coords.end(),
                     [](std::int64_t k) { return k == 0 || k == -1; });
}

}  // namespace

Cube child(const Cube& q, unsigned i) {
  const int n = q.dim();
  if (n <= 0) throw std::invalid_argument("cube has no coordinates");
  if (i >= (1u << n)) throw std::out_of_range("child index out of range");
  Cube c{q.level - 1, q.coords};
  for (int d = 0; d < n; ++d) {
    c.coords[d] = 2 * q.coords[d] + ((i >> (n - 1 - d)) & 1u);
  }
  return c;
}

std::vector<Cube> children(const Cube& q) {
  const unsigned count = 1u << q.dim();
  std::vector<Cube> out;
  out.reserve(count);
  for (unsigned i = 0; i < count; ++i) out.push_back(child(q, i));
  return out;
}

Cube parent(const Cube& q) { return ancestor(q, 1); }

Cube ancestor(const Cube& q, int k) {
  if (k < 0) throw std::invalid_argument("ancestor order must be nonnegative");
  Cube a{q.level + k, q.coords};
  for (auto& c : a.coords) c = floor_shift(c, k);
  return a;
}

bool contains(const Cube& outer, const Cube& inner) {
  require_same_dim(outer, inner);
  if (inner.level > outer.level) return false;
  return ancestor(inner, outer.level - inner.level) == outer;
}

bool intersects(const Cube& a, const Cube& b) { return contains(a, b) || contains(b, a); }

std::optional<Cube> common_ancestor(const Cube& a, const Cube& b) {
  require_same_dim(a, b);
  const int level = std::max(a.level, b.level);
  Cube x = ancestor(a, level - a.level);
  Cube y = ancestor(b, level - b.level);
  while (x != y) {
    // Coordinates 0 and -1 are fixed by the parent map; two distinct fixed
    // cubes sit in different orthants and have no common ancestor.
    if (is_fixed_point(x) && is_fixed_point(y)) return std::nullopt;
    x = parent(x);
    y = parent(y);
  }
  return x;
}

std::optional<int> tree_distance(const Cube& a, const Cube& b) {
  auto lca = common_ancestor(a, b);
  if (!lca) return std::nullopt;
  return (lca->level - a.level) + (lca->level - b.level);
}

std::string to_string(const Cube& q) {
  std::ostringstream os;
  os << "{level=" << q.level << ", coords=[";
  for (std::size_t i = 0; i < q.coords.size(); ++i) os << (i ? "," : "") << q.coords[i];
  os << "]}";
  return os.str();
}

}  // namespace dyadlab
