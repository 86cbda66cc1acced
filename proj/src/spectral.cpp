#include "dyadlab/spectral.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <random>
#include <vector>

#include "dyadlab/generators.hpp"

namespace dyadlab {

double largest_eigenvalue(const Eigen::MatrixXd& sym) {
  if (sym.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return std::max(0.0, es.eigenvalues().maxCoeff());
}

PowerIterationResult power_iteration(const LinearMap& psd_map, Eigen::Index dim,
                                     const SpectralOptions& opts) {
  PowerIterationResult res;
  if (dim == 0) {
    res.converged = true;
    return res;
  }
  Rng rng = make_rng(opts.seed, 20);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd x(dim);
  for (Eigen::Index i = 0; i < dim; ++i) x[i] = z(rng);
  x.normalize();
  double prev = -1.0;
  for (std::size_t it = 1; it <= opts.max_iterations; ++it) {
    Eigen::VectorXd y = psd_map(x);
    const double lambda = x.dot(y);
    const double ny = y.norm();
    res.iterations = it;
    if (ny == 0.0) {
      res.value = 0.0;
      res.converged = true;
      res.vector = x;
      return res;
    }
    x = y / ny;
    if (prev >= 0.0 && std::abs(lambda - prev) <= opts.tolerance * std::abs(lambda)) {
      res.value = lambda;
      res.converged = true;
      res.vector = x;
      return res;
    }
    prev = lambda;
  }
  res.value = prev;
  res.vector = x;
  return res;
}

double weighted_operator_norm(const Eigen::MatrixXd& leaf_operator, const MeasureGrid& in,
                              const MeasureGrid& out, const SpectralOptions& opts) {
  std::vector<Eigen::Index> cols;
  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < in.leaf_mass().size(); ++i) {
    if (in.leaf_mass()[i] > 0.0) cols.push_back(i);
  }
  for (Eigen::Index i = 0; i < out.leaf_mass().size(); ++i) {
    if (out.leaf_mass()[i] > 0.0) rows.push_back(i);
  }
  if (cols.empty() || rows.empty()) return 0.0;
  Eigen::MatrixXd s(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) {
    const double wc = 1.0 / std::sqrt(in.leaf_mass()[cols[c]]);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      s(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          std::sqrt(out.leaf_mass()[rows[r]]) * leaf_operator(rows[r], cols[c]) * wc;
    }
  }
  const std::size_t small = std::min(rows.size(), cols.size());
  if (small <= opts.dense_limit) {
    const Eigen::MatrixXd gram = rows.size() <= cols.size() ? Eigen::MatrixXd(s * s.transpose())
                                                            : Eigen::MatrixXd(s.transpose() * s);
    return std::sqrt(largest_eigenvalue(gram));
  }
  const auto res = power_iteration(
      [&s](const Eigen::VectorXd& x) { return Eigen::VectorXd(s.transpose() * (s * x)); }, s.cols(), opts);
  return std::sqrt(std::max(0.0, res.value));
}

}  // namespace dyadlab
