#include "dyadlab/measure.hpp"

#include <cmath>
#include <stdexcept>

namespace dyadlab {

namespace {

void require_lattice(const MeasureGrid& mu, const GridFunction& f) {
  if (!f.lattice || !(*f.lattice == mu.lattice())) {
    throw std::invalid_argument("grid function and measure live on different lattices");
  }
  if (static_cast<std::size_t>(f.values.size()) != mu.size()) {
    throw std::invalid_argument("grid function has the wrong number of leaves");
  }
}

void require_interior(const Lattice& lat, CubeId q) {
  if (q >= lat.num_cubes()) throw std::out_of_range("cube id out of range");
  if (lat.is_leaf(q)) throw std::invalid_argument("leaf cube has no children in the lattice");
}

}  // namespace

MeasureGrid::MeasureGrid(LatticePtr lattice, Eigen::VectorXd leaf_mass)
    : lattice_(std::move(lattice)), leaf_mass_(std::move(leaf_mass)) {
  if (!lattice_) throw std::invalid_argument("measure needs a lattice");
  if (static_cast<std::size_t>(leaf_mass_.size()) != lattice_->num_leaves()) {
    throw std::invalid_argument("expected " + std::to_string(lattice_->num_leaves()) +
                                " leaf masses, got " + std::to_string(leaf_mass_.size()));
  }
  for (Eigen::Index i = 0; i < leaf_mass_.size(); ++i) {
    if (!std::isfinite(leaf_mass_[i]) || leaf_mass_[i] < 0.0) {
      throw std::invalid_argument("leaf masses must be finite and nonnegative");
    }
  }
  cube_mass_ = cube_integrals(*this, Eigen::VectorXd::Ones(leaf_mass_.size()));
}

double MeasureGrid::mass(const Cube& q) const {
  double m = 0.0;
  for (std::size_t leaf : lattice_->leaves_inside(q)) m += leaf_mass_[static_cast<Eigen::Index>(leaf)];
  return m;
}

double MeasureGrid::total() const { return leaf_mass_.sum(); }

Eigen::VectorXd MeasureGrid::density() const { return leaf_mass_ / lattice_->leaf_volume(); }

GridFunction::GridFunction(LatticePtr lat, Eigen::VectorXd v)
    : lattice(std::move(lat)), values(std::move(v)) {
  if (!lattice) throw std::invalid_argument("grid function needs a lattice");
  if (static_cast<std::size_t>(values.size()) != lattice->num_leaves()) {
    throw std::invalid_argument("grid function has the wrong number of leaves");
  }
}

GridFunction GridFunction::zeros(LatticePtr lat) {
  const auto n = static_cast<Eigen::Index>(lat->num_leaves());
  return GridFunction(std::move(lat), Eigen::VectorXd::Zero(n));
}

GridFunction GridFunction::indicator(LatticePtr lat, CubeId q) {
  GridFunction g = zeros(lat);
  const LeafRange lr = g.lattice->leaves(q);
  g.values.segment(static_cast<Eigen::Index>(lr.begin), static_cast<Eigen::Index>(lr.size()))
      .setOnes();
  return g;
}

GridFunction MartingaleDecomposition::reconstruct() const {
  LatticePtr lat;
  if (!differences.empty()) lat = differences.front().second.lattice;
  else if (!root_averages.empty()) lat = root_averages.front().second.lattice;
  else throw std::invalid_argument("empty decomposition");
  GridFunction sum = GridFunction::zeros(lat);
  for (const auto& [id, g] : differences) sum.values += g.values;
  for (const auto& [id, g] : root_averages) sum.values += g.values;
  return sum;
}

double inner(const MeasureGrid& mu, const GridFunction& f, const GridFunction& g) {
  require_lattice(mu, f);
  require_lattice(mu, g);
  return (f.values.array() * g.values.array() * mu.leaf_mass().array()).sum();
}

double norm_squared(const MeasureGrid& mu, const GridFunction& f) { return inner(mu, f, f); }

std::vector<double> cube_integrals(const MeasureGrid& mu, const Eigen::VectorXd& f) {
  const Lattice& lat = mu.lattice();
  std::vector<double> out(lat.num_cubes(), 0.0);
  const CubeId first_leaf = lat.leaf_cube(0);
  for (std::size_t i = 0; i < lat.num_leaves(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    out[first_leaf + i] = f[k] * mu.leaf_mass()[k];
  }
  // Children always have larger ids than their parent.
  for (CubeId id = lat.num_interior(); id-- > 0;) {
    double s = 0.0;
    for (unsigned c = 0; c < lat.fanout(); ++c) s += out[lat.child(id, c)];
    out[id] = s;
  }
  return out;
}

double average(const MeasureGrid& mu, const GridFunction& f, CubeId q) {
  require_lattice(mu, f);
  const double m = mu.mass(q);
  if (m == 0.0) return 0.0;
  const LeafRange lr = mu.lattice().leaves(q);
  const auto b = static_cast<Eigen::Index>(lr.begin);
  const auto n = static_cast<Eigen::Index>(lr.size());
  return f.values.segment(b, n).dot(mu.leaf_mass().segment(b, n)) / m;
}

Eigen::VectorXd level_average(const MeasureGrid& mu, const Eigen::VectorXd& f, int t) {
  const Lattice& lat = mu.lattice();
  Eigen::VectorXd out(f.size());
  for (CubeId id = lat.depth_begin(t); id < lat.depth_begin(t + 1); ++id) {
    const LeafRange lr = lat.leaves(id);
    const auto b = static_cast<Eigen::Index>(lr.begin);
    const auto n = static_cast<Eigen::Index>(lr.size());
    const double m = mu.mass(id);
    const double avg = m == 0.0 ? 0.0 : f.segment(b, n).dot(mu.leaf_mass().segment(b, n)) / m;
    out.segment(b, n).setConstant(avg);
  }
  return out;
}

GridFunction martingale_difference(const MeasureGrid& mu, const GridFunction& f, CubeId q) {
  require_lattice(mu, f);
  const Lattice& lat = mu.lattice();
  require_interior(lat, q);
  GridFunction out = GridFunction::zeros(f.lattice);
  const double parent_avg = average(mu, f, q);
  for (unsigned c = 0; c < lat.fanout(); ++c) {
    const CubeId ch = lat.child(q, c);
    const LeafRange lr = lat.leaves(ch);
    out.values.segment(static_cast<Eigen::Index>(lr.begin), static_cast<Eigen::Index>(lr.size()))
        .setConstant(average(mu, f, ch) - parent_avg);
  }
  return out;
}

Eigen::MatrixXd child_haar_vectors(std::span<const double> child_masses) {
  std::vector<std::size_t> positive;
  for (std::size_t c = 0; c < child_masses.size(); ++c) {
    if (child_masses[c] > 0.0) positive.push_back(c);
  }
  const auto rows = static_cast<Eigen::Index>(child_masses.size());
  if (positive.size() < 2) return Eigen::MatrixXd(rows, 0);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(positive.size() - 1));
  double earlier = child_masses[positive[0]];
  for (std::size_t k = 1; k < positive.size(); ++k) {
    const double mk = child_masses[positive[k]];
    const double scale = 1.0 / std::sqrt(mk * earlier * (earlier + mk));
    const auto col = static_cast<Eigen::Index>(k - 1);
    for (std::size_t j = 0; j < k; ++j) out(static_cast<Eigen::Index>(positive[j]), col) = -mk * scale;
    out(static_cast<Eigen::Index>(positive[k]), col) = earlier * scale;
    earlier += mk;
  }
  return out;
}

namespace {

std::vector<double> child_masses_of(const MeasureGrid& mu, CubeId q) {
  const Lattice& lat = mu.lattice();
  std::vector<double> m(lat.fanout());
  for (unsigned c = 0; c < lat.fanout(); ++c) m[c] = mu.mass(lat.child(q, c));
  return m;
}

}  // namespace

WeightedHaarBasis weighted_haar_basis(const MeasureGrid& mu, CubeId q) {
  const Lattice& lat = mu.lattice();
  require_interior(lat, q);
  const std::vector<double> masses = child_masses_of(mu, q);
  const Eigen::MatrixXd vecs = child_haar_vectors(masses);
  WeightedHaarBasis basis{q, {}};
  for (Eigen::Index k = 0; k < vecs.cols(); ++k) {
    GridFunction h = GridFunction::zeros(mu.lattice_ptr());
    for (unsigned c = 0; c < lat.fanout(); ++c) {
      const LeafRange lr = lat.leaves(lat.child(q, c));
      h.values.segment(static_cast<Eigen::Index>(lr.begin), static_cast<Eigen::Index>(lr.size()))
          .setConstant(vecs(c, k));
    }
    basis.elements.push_back(std::move(h));
  }
  return basis;
}

MartingaleDecomposition martingale_decompose(const MeasureGrid& mu, const GridFunction& f) {
  require_lattice(mu, f);
  const Lattice& lat = mu.lattice();
  MartingaleDecomposition out;
  out.differences.reserve(lat.num_interior());
  for (CubeId q = 0; q < lat.num_interior(); ++q) {
    out.differences.emplace_back(q, martingale_difference(mu, f, q));
  }
  for (std::size_t r = 0; r < lat.num_roots(); ++r) {
    const CubeId id = lat.root_cube(r);
    GridFunction e = GridFunction::indicator(f.lattice, id);
    e.values *= average(mu, f, id);
    out.root_averages.emplace_back(id, std::move(e));
  }
  return out;
}

namespace {

HaarSystem build_system(const Lattice& lat, const std::vector<double>& cube_mass, bool keep_all) {
  HaarSystem sys;
  std::vector<Eigen::Triplet<double>> trips;
  Eigen::Index col = 0;
  std::vector<double> masses(lat.fanout());
  for (CubeId q = 0; q < lat.num_interior(); ++q) {
    for (unsigned c = 0; c < lat.fanout(); ++c) masses[c] = cube_mass[lat.child(q, c)];
    const Eigen::MatrixXd vecs = child_haar_vectors(masses);
    for (Eigen::Index k = 0; k < vecs.cols(); ++k, ++col) {
      for (unsigned c = 0; c < lat.fanout(); ++c) {
        if (vecs(c, k) == 0.0) continue;
        const LeafRange lr = lat.leaves(lat.child(q, c));
        for (std::size_t i = lr.begin; i < lr.end; ++i) {
          trips.emplace_back(static_cast<Eigen::Index>(i), col, vecs(c, k));
        }
      }
      sys.labels.push_back({q, static_cast<int>(k)});
    }
    if (keep_all && vecs.cols() != static_cast<Eigen::Index>(lat.fanout()) - 1) {
      throw std::logic_error("degenerate Lebesgue Haar system");
    }
  }
  for (std::size_t r = 0; r < lat.num_roots(); ++r) {
    const CubeId id = lat.root_cube(r);
    if (cube_mass[id] <= 0.0) continue;
    const double v = 1.0 / std::sqrt(cube_mass[id]);
    const LeafRange lr = lat.leaves(id);
    for (std::size_t i = lr.begin; i < lr.end; ++i) trips.emplace_back(static_cast<Eigen::Index>(i), col, v);
    sys.labels.push_back({id, BasisLabel::kRootIndicator});
    ++col;
  }
  sys.basis.resize(static_cast<Eigen::Index>(lat.num_leaves()), col);
  sys.basis.setFromTriplets(trips.begin(), trips.end());
  return sys;
}

}  // namespace

HaarSystem weighted_haar_system(const MeasureGrid& mu) {
  std::vector<double> cube_mass(mu.lattice().num_cubes());
  for (CubeId id = 0; id < cube_mass.size(); ++id) cube_mass[id] = mu.mass(id);
  return build_system(mu.lattice(), cube_mass, false);
}

HaarSystem lebesgue_haar_system(const LatticePtr& lattice) {
  const Lattice& lat = *lattice;
  std::vector<double> cube_mass(lat.num_cubes());
  for (CubeId id = 0; id < cube_mass.size(); ++id) cube_mass[id] = lat.volume(id);
  return build_system(lat, cube_mass, true);
}

std::size_t lebesgue_slot(const Lattice& lattice, CubeId cube, int component) {
  const std::size_t per_cube = lattice.fanout() - 1;
  if (component == BasisLabel::kRootIndicator) {
    if (lattice.depth_of(cube) != 0) throw std::invalid_argument("root indicator on a non-root cube");
    return lattice.num_interior() * per_cube + lattice.root_of(cube);
  }
  if (cube >= lattice.num_interior()) throw std::invalid_argument("Haar slot on a leaf cube");
  if (component < 0 || static_cast<std::size_t>(component) >= per_cube) {
    throw std::out_of_range("Haar component out of range");
  }
  return cube * per_cube + static_cast<std::size_t>(component);
}

BasisLabel lebesgue_label(const Lattice& lattice, std::size_t slot) {
  const std::size_t per_cube = lattice.fanout() - 1;
  const std::size_t haar = lattice.num_interior() * per_cube;
  if (slot < haar) return {slot / per_cube, static_cast<int>(slot % per_cube)};
  if (slot - haar >= lattice.num_roots()) throw std::out_of_range("slot out of range");
  return {lattice.root_cube(slot - haar), BasisLabel::kRootIndicator};
}

}  // namespace dyadlab
