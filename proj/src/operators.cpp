#include "dyadlab/operators.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "dyadlab/generators.hpp"

namespace dyadlab {

namespace {

Eigen::SparseMatrix<double> from_triplets(std::size_t n, const std::vector<Eigen::Triplet<double>>& t) {
  Eigen::SparseMatrix<double> m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

void require_same_lattice(const MeasureGrid& a, const MeasureGrid& b) {
  if (!(a.lattice() == b.lattice())) throw std::invalid_argument("measures live on different lattices");
}

}  // namespace

BandOperator::BandOperator(LatticePtr lattice, Eigen::SparseMatrix<double> coefficients, int radius,
                           std::size_t truncated_terms)
    : lattice_(std::move(lattice)), coeffs_(std::move(coefficients)), radius_(radius),
      truncated_(truncated_terms) {
  if (!lattice_) throw std::invalid_argument("band operator needs a lattice");
  const auto n = static_cast<Eigen::Index>(lattice_->num_leaves());
  if (coeffs_.rows() != n || coeffs_.cols() != n) {
    throw std::invalid_argument("coefficient matrix does not match the lattice");
  }
  if (radius_ < 0) throw std::invalid_argument("band radius must be nonnegative");
  coeffs_.makeCompressed();
}

std::vector<BandEntry> BandOperator::entries() const {
  std::vector<BandEntry> out;
  out.reserve(static_cast<std::size_t>(coeffs_.nonZeros()));
  for (Eigen::Index col = 0; col < coeffs_.outerSize(); ++col) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(coeffs_, col); it; ++it) {
      out.push_back({lebesgue_label(*lattice_, static_cast<std::size_t>(it.row())),
                     lebesgue_label(*lattice_, static_cast<std::size_t>(it.col())), it.value()});
    }
  }
  return out;
}

double BandOperator::entry(CubeId out_cube, int out_component, CubeId in_cube, int in_component) const {
  return coeffs_.coeff(static_cast<Eigen::Index>(lebesgue_slot(*lattice_, out_cube, out_component)),
                       static_cast<Eigen::Index>(lebesgue_slot(*lattice_, in_cube, in_component)));
}

bool BandOperator::has_root_blocks() const {
  for (const auto& e : entries()) {
    if (e.value != 0.0 && (e.in.is_root_indicator() || e.out.is_root_indicator())) return true;
  }
  return false;
}

std::optional<int> BandOperator::support_radius() const {
  int r = 0;
  for (const auto& e : entries()) {
    if (e.value == 0.0) continue;
    auto d = lattice_->distance(e.out.cube, e.in.cube);
    if (!d) return std::nullopt;
    r = std::max(r, *d);
  }
  return r;
}

BandOperator haar_multiplier(const LatticePtr& lattice, const MultiplierSpec& spec) {
  const Lattice& lat = *lattice;
  if (spec.alpha.size() != lat.num_interior()) {
    throw std::invalid_argument("multiplier needs one alpha per non-leaf cube (" +
                                std::to_string(lat.num_interior()) + "), got " +
                                std::to_string(spec.alpha.size()));
  }
  std::vector<Eigen::Triplet<double>> trips;
  for (CubeId q = 0; q < lat.num_interior(); ++q) {
    if (!std::isfinite(spec.alpha[q])) throw std::invalid_argument("multiplier alpha must be finite");
    for (int k = 0; k + 1 < static_cast<int>(lat.fanout()); ++k) {
      const auto s = static_cast<Eigen::Index>(lebesgue_slot(lat, q, k));
      trips.emplace_back(s, s, spec.alpha[q]);
    }
  }
  return BandOperator(lattice, from_triplets(lat.num_leaves(), trips), 0);
}

BandOperator haar_multiplier(const LatticePtr& lattice, double alpha) {
  return haar_multiplier(lattice, MultiplierSpec{std::vector<double>(lattice->num_interior(), alpha)});
}

BandOperator haar_shift(const LatticePtr& lattice) {
  const Lattice& lat = *lattice;
  if (lat.dim() != 1) throw std::invalid_argument("the Haar shift is implemented for N = 1 only");
  std::vector<Eigen::Triplet<double>> trips;
  std::size_t truncated = 0;
  for (CubeId q = 0; q < lat.num_interior(); ++q) {
    const CubeId minus = lat.child(q, 0);
    const CubeId plus = lat.child(q, 1);
    if (lat.is_leaf(minus)) {
      ++truncated;
      continue;
    }
    const auto in = static_cast<Eigen::Index>(lebesgue_slot(lat, q, 0));
    trips.emplace_back(static_cast<Eigen::Index>(lebesgue_slot(lat, plus, 0)), in, 1.0);
    trips.emplace_back(static_cast<Eigen::Index>(lebesgue_slot(lat, minus, 0)), in, -1.0);
  }
  return BandOperator(lattice, from_triplets(lat.num_leaves(), trips), 1, truncated);
}

BandOperator random_band(const LatticePtr& lattice, int r, std::uint64_t seed, double amplitude,
                         bool root_blocks) {
  if (r < 0) throw std::invalid_argument("band radius must be nonnegative");
  const Lattice& lat = *lattice;
  Rng rng = make_rng(seed, 10);
  std::uniform_real_distribution<double> coef(-amplitude, amplitude);
  const int per_cube = static_cast<int>(lat.fanout()) - 1;

  // Slots grouped by cube: interior cubes carry per_cube Haar components, roots
  // optionally carry their indicator as well.
  struct Group {
    CubeId cube;
    std::vector<int> components;
  };
  std::vector<Group> groups;
  for (CubeId q = 0; q < lat.num_interior(); ++q) {
    Group g{q, {}};
    for (int k = 0; k < per_cube; ++k) g.components.push_back(k);
    if (root_blocks && lat.depth_of(q) == 0) g.components.push_back(BasisLabel::kRootIndicator);
    groups.push_back(std::move(g));
  }

  std::vector<Eigen::Triplet<double>> trips;
  for (const Group& in : groups) {
    for (const Group& out : groups) {
      if (std::abs(lat.depth_of(in.cube) - lat.depth_of(out.cube)) > r) continue;
      auto d = lat.distance(in.cube, out.cube);
      if (!d || *d > r) continue;
      for (int ki : in.components) {
        for (int ko : out.components) {
          trips.emplace_back(static_cast<Eigen::Index>(lebesgue_slot(lat, out.cube, ko)),
                             static_cast<Eigen::Index>(lebesgue_slot(lat, in.cube, ki)), coef(rng));
        }
      }
    }
  }
  return BandOperator(lattice, from_triplets(lat.num_leaves(), trips), r);
}

BandOperator identity_band(const LatticePtr& lattice) {
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t s = 0; s < lattice->num_leaves(); ++s) {
    trips.emplace_back(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s), 1.0);
  }
  return BandOperator(lattice, from_triplets(lattice->num_leaves(), trips), 0);
}

BandOperator explicit_band(const LatticePtr& lattice, const std::vector<ExplicitEntry>& entries,
                           int radius) {
  const Lattice& lat = *lattice;
  std::vector<Eigen::Triplet<double>> trips;
  int measured = 0;
  for (const auto& e : entries) {
    auto out = lat.find(e.out_cube);
    auto in = lat.find(e.in_cube);
    if (!out || !in) throw std::invalid_argument("explicit entry refers to a cube outside the lattice");
    if (!std::isfinite(e.value)) throw std::invalid_argument("explicit entry value must be finite");
    trips.emplace_back(static_cast<Eigen::Index>(lebesgue_slot(lat, *out, e.out_component)),
                       static_cast<Eigen::Index>(lebesgue_slot(lat, *in, e.in_component)), e.value);
    if (e.value != 0.0) {
      auto d = lat.distance(*out, *in);
      if (!d) {
        if (radius < 0) throw std::invalid_argument("explicit entry couples cubes with no common ancestor");
      } else {
        measured = std::max(measured, *d);
      }
    }
  }
  return BandOperator(lattice, from_triplets(lat.num_leaves(), trips), radius < 0 ? measured : radius);
}

BandCheck check_band(const BandOperator& op, int r, double zero_tol) {
  BandCheck out;
  const auto& c = op.coefficients();
  double scale = 0.0;
  for (Eigen::Index k = 0; k < c.nonZeros(); ++k) scale = std::max(scale, std::abs(c.valuePtr()[k]));
  if (scale == 0.0) return out;
  for (const BandEntry& e : op.entries()) {
    auto d = op.lattice().distance(e.out.cube, e.in.cube);
    if (d && *d <= r) continue;
    const double v = std::abs(e.value) / scale;
    if (v > out.max_violation) {
      out.max_violation = v;
      out.witness = e;
      out.witness_distance = d;
    }
  }
  out.pass = out.max_violation <= zero_tol;
  if (out.pass) {
    out.witness.reset();
    out.witness_distance.reset();
  }
  return out;
}

InducedOperator::InducedOperator(const BandOperator& op, MeasureGrid mu, MeasureGrid nu)
    : mu_(std::move(mu)), nu_(std::move(nu)), radius_(op.radius()) {
  require_same_lattice(mu_, nu_);
  if (!(mu_.lattice() == op.lattice())) throw std::invalid_argument("operator and measures live on different lattices");
  auto f = std::make_shared<Factored>();
  f->haar = lebesgue_haar_system(op.lattice_ptr()).basis;
  f->coeffs = op.coefficients();
  if (op.lattice().num_leaves() <= kDenseLeafLimit) {
    const Eigen::SparseMatrix<double> hb = f->haar * f->coeffs;
    const Eigen::MatrixXd hb_dense(hb);
    auto k = std::make_shared<Eigen::MatrixXd>(hb_dense * f->haar.transpose());
    kernel_ = std::move(k);
  }
  factored_ = std::move(f);
}

InducedOperator InducedOperator::from_kernel(Eigen::MatrixXd kernel, MeasureGrid mu, MeasureGrid nu,
                                             int radius) {
  require_same_lattice(mu, nu);
  const auto n = static_cast<Eigen::Index>(mu.size());
  if (kernel.rows() != n || kernel.cols() != n) throw std::invalid_argument("kernel does not match the lattice");
  InducedOperator op(std::move(mu), std::move(nu), radius);
  op.kernel_ = std::make_shared<Eigen::MatrixXd>(std::move(kernel));
  return op;
}

const Eigen::MatrixXd& InducedOperator::kernel() const {
  if (!kernel_) throw std::length_error("lattice too large for a dense kernel");
  return *kernel_;
}

Eigen::MatrixXd InducedOperator::leaf_matrix() const { return kernel() * mu_.leaf_mass().asDiagonal(); }

Eigen::VectorXd InducedOperator::apply(const Eigen::VectorXd& f) const {
  const Eigen::VectorXd weighted = f.cwiseProduct(mu_.leaf_mass());
  if (kernel_) return *kernel_ * weighted;
  const Eigen::VectorXd c = factored_->haar.transpose() * weighted;
  const Eigen::VectorXd b = transposed_ ? Eigen::VectorXd(factored_->coeffs.transpose() * c)
                                        : Eigen::VectorXd(factored_->coeffs * c);
  return factored_->haar * b;
}

Eigen::VectorXd InducedOperator::apply_adjoint(const Eigen::VectorXd& g) const {
  const Eigen::VectorXd weighted = g.cwiseProduct(nu_.leaf_mass());
  if (kernel_) return kernel_->transpose() * weighted;
  const Eigen::VectorXd c = factored_->haar.transpose() * weighted;
  const Eigen::VectorXd b = transposed_ ? Eigen::VectorXd(factored_->coeffs * c)
                                        : Eigen::VectorXd(factored_->coeffs.transpose() * c);
  return factored_->haar * b;
}

InducedOperator InducedOperator::adjoint() const {
  InducedOperator adj(nu_, mu_, radius_);
  if (kernel_) adj.kernel_ = std::make_shared<Eigen::MatrixXd>(kernel_->transpose());
  adj.factored_ = factored_;
  adj.transposed_ = !transposed_;
  return adj;
}

InducedOperator induce(const BandOperator& op, const MeasureGrid& mu, const MeasureGrid& nu) {
  return InducedOperator(op, mu, nu);
}

double bilinear(const InducedOperator& op, CubeId q, CubeId r) {
  const Lattice& lat = op.lattice();
  const LeafRange lq = lat.leaves(q);
  const LeafRange lr = lat.leaves(r);
  const auto& k = op.kernel();
  const Eigen::VectorXd& m = op.mu().leaf_mass();
  const Eigen::VectorXd& v = op.nu().leaf_mass();
  const auto bq = static_cast<Eigen::Index>(lq.begin);
  const auto nq = static_cast<Eigen::Index>(lq.size());
  const auto br = static_cast<Eigen::Index>(lr.begin);
  const auto nr = static_cast<Eigen::Index>(lr.size());
  return v.segment(br, nr).dot(k.block(br, bq, nr, nq) * m.segment(bq, nq));
}

Eigen::MatrixXd indicator_images(const InducedOperator& op) {
  const Lattice& lat = op.lattice();
  const auto n = static_cast<Eigen::Index>(lat.num_leaves());
  Eigen::MatrixXd y(n, static_cast<Eigen::Index>(lat.num_cubes()));
  y.rightCols(n) = op.leaf_matrix();
  for (CubeId q = lat.num_interior(); q-- > 0;) {
    auto col = y.col(static_cast<Eigen::Index>(q));
    col.setZero();
    for (unsigned c = 0; c < lat.fanout(); ++c) col += y.col(static_cast<Eigen::Index>(lat.child(q, c)));
  }
  return y;
}

Eigen::MatrixXd haar_matrix(const Eigen::MatrixXd& leaf_operator, const HaarSystem& in_system,
                            const MeasureGrid& out_measure, const HaarSystem& out_system) {
  const Eigen::MatrixXd weighted_out =
      Eigen::MatrixXd(out_system.basis.transpose() * out_measure.leaf_mass().asDiagonal());
  return (weighted_out * leaf_operator) * in_system.basis;
}

LocalizationReport check_lower_triangular(const InducedOperator& op, int r, double zero_tol,
                                          bool adjoint_side) {
  const Lattice& lat = op.lattice();
  const HaarSystem out_sys = weighted_haar_system(op.nu());
  const Eigen::MatrixXd images = indicator_images(op);
  const Eigen::MatrixXd values =
      Eigen::MatrixXd(out_sys.basis.transpose()) * (op.nu().leaf_mass().asDiagonal() * images);

  LocalizationReport rep;
  double scale = 0.0;
  double worst = 0.0;
  std::optional<LocalizationWitness> witness;
  for (Eigen::Index j = 0; j < values.rows(); ++j) {
    const BasisLabel& lab = out_sys.labels[static_cast<std::size_t>(j)];
    if (lab.is_root_indicator()) continue;
    const CubeId rc = lab.cube;
    for (CubeId q = 0; q < lat.num_cubes(); ++q) {
      if (lat.depth_of(q) > lat.depth_of(rc)) continue;  // need l(R) <= l(Q)
      const double v = values(j, static_cast<Eigen::Index>(q));
      scale = std::max(scale, std::abs(v));
      ++rep.pairs_checked;
      const bool far = !lat.inside_ancestor(rc, q, r);
      const bool deep_outside = lat.depth_of(rc) - lat.depth_of(q) >= r && !lat.contains(q, rc);
      if (!(far || deep_outside)) continue;
      ++rep.entries_flagged;
      if (std::abs(v) > worst) {
        worst = std::abs(v);
        witness = LocalizationWitness{adjoint_side, lat.cube(q), lat.cube(rc), lab.component, v};
      }
    }
  }
  rep.max_violation = scale > 0.0 ? worst / scale : 0.0;
  rep.pass = rep.max_violation <= zero_tol;
  if (!rep.pass) rep.witness = witness;
  return rep;
}

LocalizationReport check_well_localized(const InducedOperator& op, int r, double zero_tol) {
  LocalizationReport direct = check_lower_triangular(op, r, zero_tol, false);
  LocalizationReport dual = check_lower_triangular(op.adjoint(), r, zero_tol, true);
  LocalizationReport out;
  out.pairs_checked = direct.pairs_checked + dual.pairs_checked;
  out.entries_flagged = direct.entries_flagged + dual.entries_flagged;
  out.max_violation = std::max(direct.max_violation, dual.max_violation);
  out.pass = direct.pass && dual.pass;
  out.witness = !direct.pass ? direct.witness : dual.witness;
  return out;
}

}  // namespace dyadlab
