#include <doctest.h>

#include <algorithm>
#include <set>

#include "dyadlab/lattice.hpp"
#include "helpers.hpp"

using namespace dyadlab;

namespace {

// Independent ancestor walk: climb both cubes to a common level, then together.
std::optional<int> brute_distance(Cube a, Cube b) {
  int steps = 0;
  while (a.level < b.level) { a = parent(a); ++steps; }
  while (b.level < a.level) { b = parent(b); ++steps; }
  for (int k = 0; k < 80; ++k) {
    if (a == b) return steps;
    a = parent(a);
    b = parent(b);
    steps += 2;
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("children are the 2^N lexicographic halves and invert parent") {
  const Cube q{-1, {3, -2}};
  const auto ch = children(q);
  REQUIRE(ch.size() == 4);
  CHECK(ch[0] == Cube{-2, {6, -4}});
  CHECK(ch[1] == Cube{-2, {6, -3}});
  CHECK(ch[2] == Cube{-2, {7, -4}});
  CHECK(ch[3] == Cube{-2, {7, -3}});
  for (const Cube& c : ch) CHECK(parent(c) == q);
  CHECK(parent(Cube{0, {-1}}) == Cube{1, {-1}});
  CHECK(parent(Cube{0, {-3}}) == Cube{1, {-2}});
}

TEST_CASE("ancestor climbs k levels") {
  const Cube q{-3, {5}};
  CHECK(ancestor(q, 0) == q);
  CHECK(ancestor(q, 1) == Cube{-2, {2}});
  CHECK(ancestor(q, 3) == Cube{0, {0}});
  CHECK_THROWS(ancestor(q, -1));
}

TEST_CASE("tree distance") {
  const Cube a{-2, {1}};
  CHECK(tree_distance(a, a) == 0);
  CHECK(tree_distance(a, Cube{-2, {0}}) == 2);
  CHECK(tree_distance(a, parent(a)) == 1);
  CHECK(tree_distance(Cube{-3, {0}}, Cube{-3, {7}}) == 6);
  // [-1, 0) and [0, 1) are separated by the origin.
  CHECK_FALSE(tree_distance(Cube{0, {-1}}, Cube{0, {0}}).has_value());
  CHECK_FALSE(tree_distance(Cube{-4, {-1, 2}}, Cube{-4, {0, 2}}).has_value());

  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> coord(-20, 20), lev(-4, 1);
  for (int i = 0; i < 500; ++i) {
    const Cube x{lev(rng), {coord(rng), coord(rng)}};
    const Cube y{lev(rng), {coord(rng), coord(rng)}};
    CHECK(tree_distance(x, y) == brute_distance(x, y));
  }
}

TEST_CASE("lattice numbering") {
  for (int dim = 1; dim <= 3; ++dim) {
    const LatticePtr lat = test::two_root_lattice(dim, 3);
    const std::size_t f = std::size_t{1} << dim;
    CHECK(lat->num_leaves() == 2 * f * f * f);
    CHECK(lat->num_cubes() == 2 * (1 + f + f * f + f * f * f));
    CHECK(lat->num_interior() == lat->num_cubes() - lat->num_leaves());
    std::set<Cube> seen;
    for (CubeId id = 0; id < lat->num_cubes(); ++id) {
      const Cube& q = lat->cube(id);
      CHECK(seen.insert(q).second);
      CHECK(lat->find(q) == id);
      CHECK(lat->level_of(id) == q.level);
      CHECK(lat->is_leaf(id) == (id >= lat->num_interior()));
      // Leaves under a cube form the advertised contiguous range.
      auto inside = lat->leaves_inside(q);
      std::sort(inside.begin(), inside.end());
      const LeafRange r = lat->leaves(id);
      REQUIRE(inside.size() == r.size());
      for (std::size_t k = 0; k < inside.size(); ++k) CHECK(inside[k] == r.begin + k);
      if (auto p = lat->parent(id)) {
        CHECK(lat->cube(*p) == parent(q));
        CHECK(lat->contains(*p, id));
      }
      if (!lat->is_leaf(id)) {
        const auto ch = children(q);
        for (unsigned i = 0; i < f; ++i) CHECK(lat->cube(lat->child(id, i)) == ch[i]);
      }
      CHECK(lat->volume(id) == doctest::Approx(std::ldexp(1.0, dim * q.level)));
    }
    CHECK_FALSE(lat->find(Cube{0, std::vector<std::int64_t>(static_cast<std::size_t>(dim), 5)}).has_value());
  }
}

TEST_CASE("row-major leaf order is a bijection onto each root") {
  const LatticePtr lat = test::two_root_lattice(2, 2);
  const std::size_t per_root = lat->num_leaves() / 2;
  for (std::size_t root = 0; root < 2; ++root) {
    std::set<std::size_t> hit;
    for (std::size_t flat = 0; flat < per_root; ++flat) {
      const std::size_t leaf = lat->leaf_from_row_major(root, flat);
      CHECK(hit.insert(leaf).second);
      const Cube& q = lat->cube(lat->leaf_cube(leaf));
      const Cube& r = lat->roots()[root];
      CHECK(q.coords[0] - r.coords[0] * 4 == static_cast<std::int64_t>(flat / 4));
      CHECK(q.coords[1] - r.coords[1] * 4 == static_cast<std::int64_t>(flat % 4));
    }
  }
}

TEST_CASE("lattice distances agree with cube arithmetic, across roots too") {
  const LatticePtr lat = build_lattice(1, 0, -3, {Cube{0, {-1}}, Cube{0, {0}}, Cube{0, {1}}, Cube{0, {3}}});
  for (CubeId a = 0; a < lat->num_cubes(); ++a) {
    for (CubeId b = 0; b < lat->num_cubes(); ++b) {
      CHECK(lat->distance(a, b) == tree_distance(lat->cube(a), lat->cube(b)));
      for (int k = 0; k <= 3; ++k) {
        CHECK(lat->inside_ancestor(a, b, k) == contains(ancestor(lat->cube(b), k), lat->cube(a)));
      }
    }
  }
}

TEST_CASE("build_lattice validation") {
  CHECK_THROWS(build_lattice(1, 0, 0, {Cube{0, {0}}}));
  CHECK_THROWS(build_lattice(1, 0, 2, {Cube{0, {0}}}));
  CHECK_THROWS(build_lattice(1, 0, -2, {}));
  CHECK_THROWS(build_lattice(1, 0, -2, {Cube{0, {0}}, Cube{0, {0}}}));
  CHECK_THROWS(build_lattice(1, 0, -2, {Cube{1, {0}}}));
  CHECK_THROWS(build_lattice(2, 0, -2, {Cube{0, {0}}}));
  CHECK_THROWS(build_lattice(0, 0, -2, {Cube{0, {}}}));
  CHECK_NOTHROW(build_lattice(2, 3, -1, {Cube{3, {-1, 4}}}));
}
