#include "dyadlab/paraproduct.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "dyadlab/generators.hpp"

namespace dyadlab {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

/// First id of the depth-(depth(q) + k) descendants of q; they are contiguous.
CubeId first_descendant(const Lattice& lat, CubeId q, int k) {
  for (int i = 0; i < k; ++i) q = lat.child(q, 0);
  return q;
}

std::size_t descendant_count(const Lattice& lat, int k) {
  return std::size_t{1} << (lat.dim() * k);
}

/// Adds Delta_R y (martingale difference in measure `out`) on the leaves of R
/// into `dest`, a vector indexed from leaf `offset`.
void add_difference(const MeasureGrid& out, const Eigen::VectorXd& y, CubeId r, std::size_t offset,
                    Eigen::VectorXd& dest) {
  const Lattice& lat = out.lattice();
  const Eigen::VectorXd& m = out.leaf_mass();
  auto avg = [&](CubeId c) {
    const double mc = out.mass(c);
    if (mc == 0.0) return 0.0;
    const LeafRange lr = lat.leaves(c);
    return y.segment(idx(lr.begin), idx(lr.size())).dot(m.segment(idx(lr.begin), idx(lr.size()))) / mc;
  };
  const double parent_avg = avg(r);
  for (unsigned c = 0; c < lat.fanout(); ++c) {
    const CubeId ch = lat.child(r, c);
    const LeafRange lr = lat.leaves(ch);
    dest.segment(idx(lr.begin - offset), idx(lr.size())).array() += avg(ch) - parent_avg;
  }
}

/// Calls fn(Q, d_Q) for every Q that carries a paraproduct term, where d_Q is
/// sum_R Delta_R (T chi_{Q'}) restricted to the leaves of Q.
template <class Fn>
void for_each_term(const InducedOperator& op, int r, int replacement_levels, Fn&& fn) {
  const Lattice& lat = op.lattice();
  if (r < 0) throw std::invalid_argument("paraproduct radius must be nonnegative");
  if (lat.depth() <= r) {
    throw std::invalid_argument("lattice depth " + std::to_string(lat.depth()) +
                                " must exceed the paraproduct radius " + std::to_string(r));
  }
  if (replacement_levels < 0) throw std::invalid_argument("replacement level must be nonnegative");
  const Eigen::MatrixXd images = indicator_images(op);
  Eigen::VectorXd outside;
  for (CubeId q = 0; q < lat.num_cubes(); ++q) {
    const int t = lat.depth_of(q) + r;
    if (t >= lat.depth()) continue;  // differences on leaves vanish
    const Eigen::VectorXd* y = nullptr;
    Eigen::VectorXd replaced;
    if (replacement_levels == 0) {
      outside = images.col(idx(q));
      y = &outside;
    } else {
      const Cube big = ancestor(lat.cube(q), replacement_levels);
      Eigen::VectorXd chi = Eigen::VectorXd::Zero(idx(lat.num_leaves()));
      for (std::size_t leaf : lat.leaves_inside(big)) chi[idx(leaf)] = 1.0;
      replaced = op.apply(chi);
      y = &replaced;
    }
    const LeafRange lq = lat.leaves(q);
    Eigen::VectorXd d = Eigen::VectorXd::Zero(idx(lq.size()));
    const CubeId first = first_descendant(lat, q, r);
    const std::size_t count = descendant_count(lat, r);
    for (CubeId rc = first; rc < first + count; ++rc) add_difference(op.nu(), *y, rc, lq.begin, d);
    fn(q, d);
  }
}

double max_abs(const Eigen::MatrixXd& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace

Paraproduct build_paraproduct(const InducedOperator& op, int r, ParaproductSide side,
                              int replacement_levels) {
  const InducedOperator a = side == ParaproductSide::Mu ? op : op.adjoint();
  const Lattice& lat = a.lattice();
  const auto n = idx(lat.num_leaves());
  Paraproduct pi{side, r, Eigen::MatrixXd::Zero(n, n)};
  const Eigen::VectorXd& in_mass = a.mu().leaf_mass();
  for_each_term(a, r, replacement_levels, [&](CubeId q, const Eigen::VectorXd& d) {
    const double mq = a.mu().mass(q);
    if (mq == 0.0) return;
    const LeafRange lq = lat.leaves(q);
    const auto b = idx(lq.begin);
    const auto s = idx(lq.size());
    pi.matrix.block(b, b, s, s).noalias() += d * (in_mass.segment(b, s) / mq).transpose();
  });
  return pi;
}

ParaproductEntryReport verify_paraproduct_entries(const Paraproduct& pi, const InducedOperator& op, int r, double tolerance) {
  const InducedOperator a = pi.side == ParaproductSide::Mu ? op : op.adjoint();
  const Lattice& lat = a.lattice();
  const HaarSystem in_sys = weighted_haar_system(a.mu());
  const HaarSystem out_sys = weighted_haar_system(a.nu());
  const Eigen::MatrixXd gt = haar_matrix(a.leaf_matrix(), in_sys, a.nu(), out_sys);
  const Eigen::MatrixXd gp = haar_matrix(pi.matrix, in_sys, a.nu(), out_sys);
  const double scale = std::max(max_abs(gt), max_abs(gp));

  ParaproductEntryReport rep;
  if (scale == 0.0) return rep;
  double worst_excess = 0.0;
  auto consider = [&](int which, double dev, Eigen::Index j, Eigen::Index i, double& slot) {
    const double rel = dev / scale;
    slot = std::max(slot, rel);
    if (rel > tolerance && rel - tolerance > worst_excess) {
      worst_excess = rel - tolerance;
      const BasisLabel& lr = out_sys.labels[static_cast<std::size_t>(j)];
      const BasisLabel& lq = in_sys.labels[static_cast<std::size_t>(i)];
      rep.witness = EntryWitness{which, lat.cube(lq.cube), lat.cube(lr.cube), lq.component,
                                   lr.component, gp(j, i), gt(j, i)};
    }
  };
  for (Eigen::Index i = 0; i < gt.cols(); ++i) {
    const BasisLabel& lq = in_sys.labels[static_cast<std::size_t>(i)];
    if (lq.is_root_indicator()) continue;
    for (Eigen::Index j = 0; j < gt.rows(); ++j) {
      const BasisLabel& lr = out_sys.labels[static_cast<std::size_t>(j)];
      if (lr.is_root_indicator()) continue;
      const int gap = lat.depth_of(lr.cube) - lat.depth_of(lq.cube);
      if (gap <= r) {
        ++rep.case1_count;
        consider(1, std::abs(gp(j, i)), j, i, rep.case1_max);
      }
      if (!lat.contains(lq.cube, lr.cube)) {
        ++rep.case2_count;
        consider(2, std::abs(gp(j, i)), j, i, rep.case2_max);
      }
      if (gap > r) {
        ++rep.case3_count;
        consider(3, std::abs(gp(j, i) - gt(j, i)), j, i, rep.case3_max);
      }
    }
  }
  rep.pass = rep.case1_max <= tolerance && rep.case2_max <= tolerance && rep.case3_max <= tolerance;
  return rep;
}

RemainderReport remainder_diagonals(const InducedOperator& op, const Paraproduct& pi_mu,
                                    const Paraproduct& pi_nu, double zero_tol,
                                    std::optional<double> c_diag) {
  if (pi_mu.side != ParaproductSide::Mu || pi_nu.side != ParaproductSide::Nu) {
    throw std::invalid_argument("remainder needs Pi^mu and Pi^nu in that order");
  }
  if (pi_mu.radius != pi_nu.radius) throw std::invalid_argument("paraproducts built at different radii");
  const int r = pi_mu.radius;
  const Lattice& lat = op.lattice();
  const HaarSystem mu_sys = weighted_haar_system(op.mu());
  const HaarSystem nu_sys = weighted_haar_system(op.nu());
  const Eigen::MatrixXd gt = haar_matrix(op.leaf_matrix(), mu_sys, op.nu(), nu_sys);
  const Eigen::MatrixXd gp = haar_matrix(pi_mu.matrix, mu_sys, op.nu(), nu_sys);
  const Eigen::MatrixXd gd = haar_matrix(pi_nu.matrix, nu_sys, op.mu(), mu_sys);
  const Eigen::MatrixXd diff = gt - gp - gd.transpose();
  const double scale = max_abs(gt);

  RemainderReport rep;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < diff.cols(); ++i) {
    const BasisLabel& lq = mu_sys.labels[static_cast<std::size_t>(i)];
    if (lq.is_root_indicator()) continue;
    for (Eigen::Index j = 0; j < diff.rows(); ++j) {
      const BasisLabel& lr = nu_sys.labels[static_cast<std::size_t>(j)];
      if (lr.is_root_indicator()) continue;
      const int gap = std::abs(lat.depth_of(lr.cube) - lat.depth_of(lq.cube));
      const double v = std::abs(diff(j, i));
      if (gap <= r) {
        ++rep.in_band_entries;
        rep.in_band_max = std::max(rep.in_band_max, v);
        continue;
      }
      ++rep.off_band_entries;
      if (v > worst) {
        worst = v;
        rep.witness = EntryWitness{0, lat.cube(lq.cube), lat.cube(lr.cube), lq.component,
                                     lr.component, gp(j, i) + gd(i, j), gt(j, i)};
      }
    }
  }
  rep.off_band_max = scale > 0.0 ? worst / scale : 0.0;
  rep.pass = rep.off_band_max <= zero_tol;
  if (rep.pass) rep.witness.reset();
  if (c_diag) {
    rep.in_band_bound = std::ldexp(1.0, lat.dim()) * *c_diag;
  }
  return rep;
}

CarlesonSequence carleson_sequence(const InducedOperator& op, int r) {
  const Lattice& lat = op.lattice();
  CarlesonSequence a{op.lattice_ptr(), std::vector<double>(lat.num_cubes(), 0.0)};
  const Eigen::VectorXd& out_mass = op.nu().leaf_mass();
  for_each_term(op, r, 0, [&](CubeId q, const Eigen::VectorXd& d) {
    const LeafRange lq = lat.leaves(q);
    a.values[q] = d.cwiseAbs2().dot(out_mass.segment(idx(lq.begin), idx(lq.size())));
  });
  return a;
}

namespace {

std::vector<double> subtree_sums(const Lattice& lat, const std::vector<double>& a) {
  std::vector<double> s = a;
  for (CubeId q = lat.num_interior(); q-- > 0;) {
    for (unsigned c = 0; c < lat.fanout(); ++c) s[q] += s[lat.child(q, c)];
  }
  return s;
}

void require_sequence(const CarlesonSequence& a, const MeasureGrid& mu) {
  if (!a.lattice || !(*a.lattice == mu.lattice()) || a.values.size() != mu.lattice().num_cubes()) {
    throw std::invalid_argument("Carleson sequence does not match the measure's lattice");
  }
  for (double v : a.values) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("Carleson sequence must be nonnegative");
  }
}

/// sum_R a_R / mu(R)^2 s_R s_R^T with s = sqrt(leaf mass), as a dense matrix.
Eigen::MatrixXd embedding_form(const CarlesonSequence& a, const MeasureGrid& mu) {
  const Lattice& lat = mu.lattice();
  const auto n = idx(lat.num_leaves());
  const Eigen::VectorXd s = mu.leaf_mass().cwiseSqrt();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (CubeId q = 0; q < lat.num_cubes(); ++q) {
    const double m = mu.mass(q);
    if (a.values[q] == 0.0 || m == 0.0) continue;
    const LeafRange lr = lat.leaves(q);
    const auto b = idx(lr.begin);
    const auto len = idx(lr.size());
    g.block(b, b, len, len).noalias() += (a.values[q] / (m * m)) * s.segment(b, len) * s.segment(b, len).transpose();
  }
  return g;
}

Eigen::VectorXd apply_embedding_form(const CarlesonSequence& a, const MeasureGrid& mu,
                                     const Eigen::VectorXd& x) {
  const Lattice& lat = mu.lattice();
  const Eigen::VectorXd s = mu.leaf_mass().cwiseSqrt();
  // c_R = <s, x> over R, then y_i = s_i * sum over R containing i of a_R c_R / mu(R)^2.
  std::vector<double> c(lat.num_cubes(), 0.0);
  for (std::size_t i = 0; i < lat.num_leaves(); ++i) c[lat.leaf_cube(i)] = s[idx(i)] * x[idx(i)];
  for (CubeId q = lat.num_interior(); q-- > 0;) {
    for (unsigned k = 0; k < lat.fanout(); ++k) c[q] += c[lat.child(q, k)];
  }
  std::vector<double> acc(lat.num_cubes(), 0.0);
  for (CubeId q = 0; q < lat.num_cubes(); ++q) {
    const double m = mu.mass(q);
    const double own = (m > 0.0) ? a.values[q] * c[q] / (m * m) : 0.0;
    const auto p = lat.parent(q);
    acc[q] = own + (p ? acc[*p] : 0.0);
  }
  Eigen::VectorXd y(x.size());
  for (std::size_t i = 0; i < lat.num_leaves(); ++i) y[idx(i)] = s[idx(i)] * acc[lat.leaf_cube(i)];
  return y;
}

}  // namespace

double carleson_constant(const CarlesonSequence& a, const MeasureGrid& mu) {
  require_sequence(a, mu);
  const Lattice& lat = mu.lattice();
  const std::vector<double> sums = subtree_sums(lat, a.values);
  double c = 0.0;
  for (CubeId q = 0; q < lat.num_cubes(); ++q) {
    const double m = mu.mass(q);
    if (m > 0.0) {
      c = std::max(c, sums[q] / m);
    } else if (sums[q] > 0.0) {
      return std::numeric_limits<double>::infinity();
    }
  }
  return c;
}

double embedding_constant(const CarlesonSequence& a, const MeasureGrid& mu, const SpectralOptions& opts) {
  require_sequence(a, mu);
  const std::size_t n = mu.lattice().num_leaves();
  if (n <= opts.dense_limit) return largest_eigenvalue(embedding_form(a, mu));
  const auto res = power_iteration(
      [&](const Eigen::VectorXd& x) { return apply_embedding_form(a, mu, x); }, idx(n), opts);
  return res.value;
}

CarlesonSequence random_carleson_sequence(const MeasureGrid& mu, std::uint64_t seed,
                                          double zero_probability) {
  const Lattice& lat = mu.lattice();
  Rng rng = make_rng(seed, 30);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CarlesonSequence a{mu.lattice_ptr(), std::vector<double>(lat.num_cubes(), 0.0)};
  for (CubeId q = 0; q < lat.num_cubes(); ++q) {
    const double keep = u(rng);
    const double size = u(rng);
    if (keep >= zero_probability) a.values[q] = size * mu.mass(q);
  }
  const double c = carleson_constant(a, mu);
  if (c > 0.0) {
    for (double& v : a.values) v /= c;
  }
  return a;
}

namespace {

/// Top eigenvector of the embedding form (unit length, leaf coordinates).
Eigen::VectorXd top_vector(const CarlesonSequence& a, const MeasureGrid& mu, const SpectralOptions& opts) {
  const std::size_t n = mu.lattice().num_leaves();
  if (n <= opts.dense_limit) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(embedding_form(a, mu));
    return es.eigenvectors().col(es.eigenvalues().size() - 1);
  }
  return power_iteration([&](const Eigen::VectorXd& x) { return apply_embedding_form(a, mu, x); }, idx(n), opts)
      .vector;
}

/// Maximizes sum_Q a_Q w_Q over Carleson sequences with constant 1. The
/// constraints are nested, so filling cubes in decreasing order of w up to
/// the remaining slack is optimal.
std::vector<double> fill_by_weight(const MeasureGrid& mu, const std::vector<double>& w) {
  const Lattice& lat = mu.lattice();
  std::vector<CubeId> order;
  for (CubeId q = 0; q < lat.num_cubes(); ++q) {
    if (w[q] > 0.0 && mu.mass(q) > 0.0) order.push_back(q);
  }
  std::stable_sort(order.begin(), order.end(), [&](CubeId x, CubeId y) {
    if (w[x] != w[y]) return w[x] > w[y];
    return lat.depth_of(x) > lat.depth_of(y);
  });
  std::vector<double> a(lat.num_cubes(), 0.0);
  std::vector<double> used(lat.num_cubes(), 0.0);  // sum of a over each subtree
  for (CubeId q : order) {
    double slack = mu.mass(q) - used[q];
    for (auto p = lat.parent(q); p; p = lat.parent(*p)) slack = std::min(slack, mu.mass(*p) - used[*p]);
    if (slack <= 0.0) continue;
    a[q] = slack;
    used[q] += slack;
    for (auto p = lat.parent(q); p; p = lat.parent(*p)) used[*p] += slack;
  }
  return a;
}

}  // namespace

GreedyCarlesonResult greedy_carleson_sequence(const MeasureGrid& mu, const SpectralOptions& opts) {
  const Lattice& lat = mu.lattice();
  const Eigen::VectorXd& m = mu.leaf_mass();
  const Eigen::VectorXd s = m.cwiseSqrt();
  GreedyCarlesonResult res{{mu.lattice_ptr(), std::vector<double>(lat.num_cubes(), 0.0)}, 0.0, 0};

  // Start from a point mass on the lightest charged leaf.
  Eigen::Index start = -1;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (m[i] > 0.0 && (start < 0 || m[i] < m[start])) start = i;
  }
  if (start < 0) return res;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m.size());
  x[start] = 1.0;

  constexpr std::size_t kMaxRounds = 50;
  for (std::size_t round = 0; round < kMaxRounds; ++round) {
    const std::vector<double> c = cube_integrals(mu, x.cwiseQuotient(s.unaryExpr([](double v) { return v > 0.0 ? v : 1.0; })));
    std::vector<double> w(lat.num_cubes(), 0.0);
    for (CubeId q = 0; q < lat.num_cubes(); ++q) {
      const double mq = mu.mass(q);
      if (mq > 0.0) w[q] = (c[q] / mq) * (c[q] / mq);
    }
    CarlesonSequence cand{mu.lattice_ptr(), fill_by_weight(mu, w)};
    const double value = embedding_constant(cand, mu, opts);
    ++res.steps;
    if (round > 0 && value <= res.embedding * (1.0 + 1e-12)) break;
    res.sequence = std::move(cand);
    res.embedding = value;
    x = top_vector(res.sequence, mu, opts);
  }
  return res;
}

}  // namespace dyadlab
