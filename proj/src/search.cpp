#include "dyadlab/search.hpp"

#include <cmath>
#include <random>

#include "dyadlab/generators.hpp"

namespace dyadlab {

BandOperator Instance::band() const { return BandOperator(lattice, coefficients, radius); }

InducedOperator Instance::induced() const {
  return InducedOperator(band(), MeasureGrid(lattice, mu_mass), MeasureGrid(lattice, nu_mass));
}

TestingReport Instance::evaluate(const SpectralOptions& opts) const {
  return testing_constants(induced(), radius, opts);
}

namespace {

std::vector<Eigen::Index> positive_entries(const Eigen::VectorXd& m) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    if (m[i] > 0.0) out.push_back(i);
  }
  return out;
}

}  // namespace

SearchResult extremal_search(const Instance& start, const SearchOptions& opts) {
  SearchResult res;
  res.best = start;
  res.best.coefficients.makeCompressed();
  res.best_report = res.best.evaluate(opts.spectral);
  res.seed_rho = res.best_report.rho;
  res.best_rho = res.seed_rho;

  Rng rng = make_rng(opts.seed, 40);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_int_distribution<int> move(0, 2);

  for (std::size_t it = 0; it < opts.iterations; ++it) {
    Instance cand = res.best;
    const int kind = move(rng);
    bool changed = false;
    if (kind < 2) {
      Eigen::VectorXd& mass = kind == 0 ? cand.mu_mass : cand.nu_mass;
      const auto pos = positive_entries(mass);
      if (!pos.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, pos.size() - 1);
        mass[pos[pick(rng)]] *= std::exp(opts.mass_step * z(rng));
        changed = true;
      }
    } else {
      auto& c = cand.coefficients;
      std::vector<Eigen::Index> nz;
      double scale = 0.0;
      for (Eigen::Index k = 0; k < c.nonZeros(); ++k) {
        if (c.valuePtr()[k] != 0.0) nz.push_back(k);
        scale = std::max(scale, std::abs(c.valuePtr()[k]));
      }
      if (!nz.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, nz.size() - 1);
        double& entry = c.valuePtr()[nz[pick(rng)]];
        entry += opts.entry_step * scale * z(rng);
        if (entry == 0.0) entry = opts.entry_step * scale;  // keep the sparsity pattern
        changed = true;
      }
    }
    if (changed) {
      TestingReport rep = cand.evaluate(opts.spectral);
      if (rep.rho > res.best_rho && std::isfinite(rep.rho)) {
        res.best = std::move(cand);
        res.best_report = rep;
        res.best_rho = rep.rho;
        ++res.accepted;
      }
    }
    res.trajectory.push_back(res.best_rho);
  }
  return res;
}

}  // namespace dyadlab
