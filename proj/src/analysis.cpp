#include "dyadlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace dyadlab {

namespace {

Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Row r of the result is the sum of the rows of `leafwise` over the leaves of cube r.
Eigen::MatrixXd cube_row_sums(const Lattice& lat, const Eigen::MatrixXd& leafwise) {
  Eigen::MatrixXd out(idx(lat.num_cubes()), leafwise.cols());
  const auto n = idx(lat.num_leaves());
  out.bottomRows(n) = leafwise;
  for (CubeId q = lat.num_interior(); q-- > 0;) {
    auto row = out.row(idx(q));
    row.setZero();
    for (unsigned c = 0; c < lat.fanout(); ++c) row += out.row(idx(lat.child(q, c)));
  }
  return out;
}

struct Sup {
  double value = 0.0;
  void offer(double v) { value = std::max(value, v); }
};

}  // namespace

double operator_norm(const InducedOperator& op, const SpectralOptions& opts) {
  if (op.has_dense_kernel()) return weighted_operator_norm(op.leaf_matrix(), op.mu(), op.nu(), opts);
  const Eigen::VectorXd sm = op.mu().leaf_mass().cwiseSqrt();
  const Eigen::VectorXd inv = sm.unaryExpr([](double s) { return s > 0.0 ? 1.0 / s : 0.0; });
  const auto res = power_iteration(
      [&](const Eigen::VectorXd& x) {
        const Eigen::VectorXd y = op.apply(x.cwiseProduct(inv));
        return Eigen::VectorXd(op.apply_adjoint(y).cwiseProduct(sm));
      },
      sm.size(), opts);
  return std::sqrt(std::max(0.0, res.value));
}

bool TestingReport::necessity_holds(double tol) const {
  if (unbounded) return false;
  const double cap = norm + tol;
  return std::sqrt(c_direct_global) <= cap && std::sqrt(c_adjoint_global) <= cap &&
         std::sqrt(c_direct_local) <= cap && std::sqrt(c_adjoint_local) <= cap && c_diag <= cap;
}

TestingReport testing_constants(const InducedOperator& op, int r, const SpectralOptions& opts) {
  if (r < 0) throw std::invalid_argument("band radius must be nonnegative");
  const Lattice& lat = op.lattice();
  const MeasureGrid& mu = op.mu();
  const MeasureGrid& nu = op.nu();
  const Eigen::VectorXd& m = mu.leaf_mass();
  const Eigen::VectorXd& v = nu.leaf_mass();
  const Eigen::MatrixXd y = indicator_images(op);
  const Eigen::MatrixXd z = indicator_images(op.adjoint());

  TestingReport rep;
  Sup dg, ag, dl, al, aln, diag, diag_u;
  auto flag = [&](const char* name, CubeId q, std::optional<CubeId> rc, double value) {
    if (!rep.unbounded) {
      rep.unbounded = UnboundedWitness{name, lat.cube(q), rc ? std::optional<Cube>(lat.cube(*rc)) : std::nullopt, value};
    }
  };

  for (CubeId q = 0; q < lat.num_cubes(); ++q) {
    const LeafRange lq = lat.leaves(q);
    const auto b = idx(lq.begin);
    const auto s = idx(lq.size());
    const auto yq = y.col(idx(q));
    const auto zq = z.col(idx(q));
    const double d_global = yq.cwiseAbs2().dot(v);
    const double d_local = yq.segment(b, s).cwiseAbs2().dot(v.segment(b, s));
    const double a_global = zq.cwiseAbs2().dot(m);
    const double a_local = zq.segment(b, s).cwiseAbs2().dot(m.segment(b, s));
    const double a_local_nu = zq.segment(b, s).cwiseAbs2().dot(v.segment(b, s));
    const double mq = mu.mass(q);
    const double nq = nu.mass(q);
    if (mq > 0.0) {
      dg.offer(d_global / mq);
      dl.offer(d_local / mq);
    } else if (d_global > 0.0) {
      flag("direct", q, std::nullopt, d_global);
    }
    if (nq > 0.0) {
      ag.offer(a_global / nq);
      al.offer(a_local / nq);
      aln.offer(a_local_nu / nq);
    } else if (a_global > 0.0) {
      flag("adjoint", q, std::nullopt, a_global);
    }
  }

  // pairing(R, Q) = <T_mu chi_Q, chi_R>_nu
  const Eigen::MatrixXd pairing = cube_row_sums(lat, v.asDiagonal() * y);
  std::optional<Eigen::MatrixXd> plain;
  if (op.has_dense_kernel()) {
    const Eigen::MatrixXd cols = cube_row_sums(lat, op.kernel().transpose());  // (Q, leaf)
    const double vol = lat.leaf_volume();
    plain = cube_row_sums(lat, cols.transpose()) * (vol * vol);               // (R, Q)
  }
  for (CubeId q = 0; q < lat.num_cubes(); ++q) {
    const double mq = mu.mass(q);
    for (CubeId rc = 0; rc < lat.num_cubes(); ++rc) {
      if (std::abs(lat.depth_of(q) - lat.depth_of(rc)) > r) continue;
      const double p = pairing(idx(rc), idx(q));
      const double den = std::sqrt(mq * nu.mass(rc));
      if (den > 0.0) {
        diag.offer(std::abs(p) / den);
      } else if (p != 0.0) {
        flag("diag", q, rc, p);
      }
      if (plain) {
        const double pu = (*plain)(idx(rc), idx(q));
        const double du = std::sqrt(mq * nu.mass(q));
        if (du > 0.0) {
          diag_u.offer(std::abs(pu) / du);
        } else if (pu != 0.0) {
          diag_u.offer(kInf);
        }
      }
    }
  }

  rep.c_direct_global = dg.value;
  rep.c_adjoint_global = ag.value;
  rep.c_direct_local = dl.value;
  rep.c_adjoint_local = al.value;
  rep.c_adjoint_local_nu = aln.value;
  rep.c_diag = diag.value;
  rep.c_diag_unweighted = plain ? diag_u.value : std::numeric_limits<double>::quiet_NaN();
  if (rep.unbounded) {
    const std::string& which = rep.unbounded->constant;
    if (which == "direct") rep.c_direct_global = rep.c_direct_local = kInf;
    if (which == "adjoint") rep.c_adjoint_global = rep.c_adjoint_local = kInf;
    if (which == "diag") rep.c_diag = kInf;
  }
  rep.norm = operator_norm(op, opts);
  rep.rho = sufficiency_ratio(rep);
  return rep;
}

double sufficiency_ratio(const TestingReport& rep) {
  const double den = std::sqrt(rep.c_direct_local) + std::sqrt(rep.c_adjoint_local) + rep.c_diag;
  if (std::isinf(den)) return 0.0;
  if (den == 0.0) return rep.norm == 0.0 ? 0.0 : kInf;
  return rep.norm / den;
}

double sufficiency_ratio(const InducedOperator& op, int r, const SpectralOptions& opts) {
  return testing_constants(op, r, opts).rho;
}

DecompositionTerms decomposition_identity(const InducedOperator& op, int r, const Eigen::VectorXd& f,
                                          const Eigen::VectorXd& g) {
  return decomposition_identity(op, build_paraproduct(op, r, ParaproductSide::Mu),
                                build_paraproduct(op, r, ParaproductSide::Nu), f, g);
}

DecompositionTerms decomposition_identity(const InducedOperator& op, const Paraproduct& pi_mu,
                                          const Paraproduct& pi_nu, const Eigen::VectorXd& f,
                                          const Eigen::VectorXd& g) {
  const Lattice& lat = op.lattice();
  const auto n = idx(lat.num_leaves());
  if (f.size() != n || g.size() != n) throw std::invalid_argument("leaf functions do not match the lattice");
  if (pi_mu.side != ParaproductSide::Mu || pi_nu.side != ParaproductSide::Nu || pi_mu.radius != pi_nu.radius) {
    throw std::invalid_argument("need Pi^mu and Pi^nu built at the same radius");
  }
  const int r = pi_mu.radius;
  const int depth = lat.depth();
  const Eigen::VectorXd& m = op.mu().leaf_mass();
  const Eigen::VectorXd& v = op.nu().leaf_mass();

  // E_t f for t = 0..depth; consecutive differences are the depth-t martingale differences.
  std::vector<Eigen::VectorXd> ef, eg;
  for (int t = 0; t <= depth; ++t) {
    ef.push_back(level_average(op.mu(), f, t));
    eg.push_back(level_average(op.nu(), g, t));
  }
  const Eigen::VectorXd f_e = ef.front();
  const Eigen::VectorXd g_e = eg.front();
  const Eigen::VectorXd f_d = ef.back() - f_e;
  const Eigen::VectorXd g_d = eg.back() - g_e;
  auto pair_nu = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.cwiseProduct(v).dot(b); };

  DecompositionTerms t;
  t.total = pair_nu(op.apply(f), g);
  t.paraproduct_mu = pair_nu(pi_mu.matrix * f_d, g_d);
  t.paraproduct_nu = f_d.cwiseProduct(m).dot(pi_nu.matrix * g_d);
  std::vector<Eigen::VectorXd> images;
  for (int s = 0; s < depth; ++s) images.push_back(op.apply(ef[s + 1] - ef[s]));
  for (int s = 0; s < depth; ++s) {
    for (int u = std::max(0, s - r); u <= std::min(depth - 1, s + r); ++u) {
      t.comparable += pair_nu(images[s], eg[u + 1] - eg[u]);
    }
  }
  const Eigen::VectorXd tfe = op.apply(f_e);
  t.average_average = pair_nu(tfe, g_e);
  t.average_difference = pair_nu(tfe, g_d);
  t.difference_average = pair_nu(op.apply(f_d), g_e);
  const double sum = t.paraproduct_mu + t.paraproduct_nu + t.comparable + t.average_average +
                     t.average_difference + t.difference_average;
  t.residual = std::abs(t.total - sum);
  const double scale = std::sqrt(f.cwiseAbs2().dot(m) * g.cwiseAbs2().dot(v));
  t.relative_residual = scale > 0.0 ? t.residual / scale : t.residual;
  return t;
}

std::size_t comparable_block_bound(int dim, int r) {
  std::size_t total = 0;
  for (int t = r; t <= 2 * r; ++t) total += std::size_t{1} << (dim * t);
  return total + static_cast<std::size_t>(r) * (std::size_t{1} << (dim * r));
}

ComparableBlocks comparable_block_count(const InducedOperator& op, int r, double zero_tol) {
  const Lattice& lat = op.lattice();
  const HaarSystem in_sys = weighted_haar_system(op.mu());
  const HaarSystem out_sys = weighted_haar_system(op.nu());
  const Eigen::MatrixXd gt = haar_matrix(op.leaf_matrix(), in_sys, op.nu(), out_sys);
  ComparableBlocks out;
  out.bound = comparable_block_bound(lat.dim(), r);
  const double scale = gt.size() ? gt.cwiseAbs().maxCoeff() : 0.0;
  if (scale == 0.0) return out;
  std::vector<std::set<CubeId>> partners(lat.num_cubes());
  for (Eigen::Index i = 0; i < gt.cols(); ++i) {
    const BasisLabel& lq = in_sys.labels[static_cast<std::size_t>(i)];
    if (lq.is_root_indicator()) continue;
    for (Eigen::Index j = 0; j < gt.rows(); ++j) {
      const BasisLabel& lr = out_sys.labels[static_cast<std::size_t>(j)];
      if (lr.is_root_indicator()) continue;
      if (std::abs(lat.depth_of(lq.cube) - lat.depth_of(lr.cube)) > r) continue;
      if (std::abs(gt(j, i)) > zero_tol * scale) partners[lq.cube].insert(lr.cube);
    }
  }
  for (CubeId q = 0; q < lat.num_cubes(); ++q) {
    if (partners[q].size() > out.max_count) {
      out.max_count = partners[q].size();
      out.worst_q = lat.cube(q);
    }
  }
  return out;
}

}  // namespace dyadlab
