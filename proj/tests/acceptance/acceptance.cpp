// Acceptance run: one PASS/FAIL line per criterion, tables into --out.
#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "dyadlab/analysis.hpp"
#include "dyadlab/cli.hpp"
#include "dyadlab/generators.hpp"
#include "dyadlab/paraproduct.hpp"

using namespace dyadlab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Line {
  int id;
  bool pass;
  std::string detail;
};

std::vector<Line> lines;

void report(int id, bool pass, const std::string& detail) {
  lines.push_back({id, pass, detail});
  std::printf("%s %d %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
}

std::string g(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

std::string g17(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

LatticePtr two_roots(int dim, int depth) {
  std::vector<Cube> roots(2, Cube{0, std::vector<std::int64_t>(static_cast<std::size_t>(dim), 0)});
  roots[1].coords[0] = 1;
  return build_lattice(dim, 0, -depth, roots);
}

Eigen::VectorXd randn(Eigen::Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Eigen::VectorXd v(n);
  for (auto& x : v) x = z(rng);
  return v;
}

// Every instance built anywhere in this run goes through here.
struct Necessity {
  std::size_t instances = 0;
  std::size_t violations = 0;
  double worst_excess = -INFINITY;

  void record(const TestingReport& t) {
    ++instances;
    const double excess = std::max({std::sqrt(t.c_direct_global), std::sqrt(t.c_adjoint_global),
                                    std::sqrt(t.c_direct_local), std::sqrt(t.c_adjoint_local), t.c_diag}) -
                          t.norm;
    worst_excess = std::max(worst_excess, excess);
    if (!t.necessity_holds(1e-9)) ++violations;
  }
} necessity;

MeasureGrid weight(const LatticePtr& lat, int kind, std::uint64_t seed) {
  switch (kind % 4) {
    case 0: return lognormal_measure(lat, 1.0, seed);
    case 1: return zero_blocks_measure(lat, 0.3, seed);
    case 2: return sparse_atoms_measure(lat, std::max<std::size_t>(2, lat->num_leaves() / 3), seed);
    default: return zero_blocks_measure(lat, 0.5, seed, 0.5);
  }
}

struct Case {
  int r;
  InducedOperator op;
};

// The shared suite: 200 band operators, r in {0,1,2}, zero blocks in most weights.
std::vector<Case> band_suite() {
  std::vector<Case> out;
  for (int i = 0; i < 200; ++i) {
    const int dim = 1 + i % 2;
    const int r = (i / 2) % 3;
    const int depth = dim == 1 ? 3 + (i / 6) % 3 : 3;
    const LatticePtr lat = two_roots(dim, depth);
    const MeasureGrid mu = weight(lat, i, 10000 + i);
    const MeasureGrid nu = weight(lat, i + 1 + (i / 4) % 2, 20000 + i);
    out.push_back({r, induce(random_band(lat, r, 30000 + i, 1.0, i % 3 != 0), mu, nu)});
  }
  return out;
}

void criterion1() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const int dim = 1 + i % 2;
    const int depth = 1 + (i / 2) % 5;
    const LatticePtr lat = two_roots(dim, depth);
    const MeasureGrid mu = weight(lat, i, 100 + i);
    const GridFunction f = random_function(lat, 200 + i);
    const MartingaleDecomposition dec = martingale_decompose(mu, f);
    const double total = norm_squared(mu, f);
    double energy = 0.0;
    for (const auto& [q, d] : dec.differences) energy += norm_squared(mu, d);
    for (const auto& [q, e] : dec.root_averages) energy += norm_squared(mu, e);
    const Eigen::VectorXd gap = dec.reconstruct().values - f.values;
    const double recon = std::sqrt(gap.cwiseAbs2().dot(mu.leaf_mass()) / total);
    worst = std::max({worst, std::abs(energy - total) / total, recon});
  }
  const double secs = seconds_since(t0);
  report(1, worst <= 1e-10 && secs <= 10.0,
         "martingale decomposition: max relative residual " + g(worst) + " over 200 (mu, f), " + g(secs) + " s");
}

void criterion2(const std::vector<Case>& suite) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t flagged = 0;
  bool pass = true;
  for (const Case& c : suite) {
    const LocalizationReport rep = check_well_localized(c.op, c.r);
    worst = std::max(worst, rep.max_violation);
    flagged += rep.entries_flagged;
    pass = pass && rep.pass && rep.max_violation <= 1e-12;
  }
  const double secs = seconds_since(t0);
  report(2, pass && secs <= 60.0,
         "well-localized pattern: max flagged entry " + g(worst) + " over " + std::to_string(flagged) +
             " entries in 200 operators, " + g(secs) + " s");
}

void criterion3_4(const std::vector<Case>& suite) {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t entries = 0;
  bool pass = true;
  std::vector<std::pair<Paraproduct, Paraproduct>> built;
  for (const Case& c : suite) {
    Paraproduct pm = build_paraproduct(c.op, c.r, ParaproductSide::Mu);
    Paraproduct pn = build_paraproduct(c.op, c.r, ParaproductSide::Nu);
    for (const Paraproduct* p : {&pm, &pn}) {
      const ParaproductEntryReport rep = verify_paraproduct_entries(*p, c.op, c.r, 1e-9);
      worst = std::max({worst, rep.case1_max, rep.case2_max, rep.case3_max});
      entries += rep.case1_count + rep.case2_count + rep.case3_count;
      pass = pass && rep.pass;
    }
    built.emplace_back(std::move(pm), std::move(pn));
  }
  const double secs = seconds_since(t0);
  report(3, pass && worst <= 1e-9 && secs <= 60.0,
         "paraproduct Haar entries, all three cases, both sides: max deviation " + g(worst) + " over " +
             std::to_string(entries) + " entries, " + g(secs) + " s");

  double off = 0.0;
  std::size_t off_entries = 0;
  bool rem_pass = true;
  for (std::size_t i = 0; i < suite.size(); ++i) {
    const RemainderReport rep = remainder_diagonals(suite[i].op, built[i].first, built[i].second, 1e-12);
    off = std::max(off, rep.off_band_max);
    off_entries += rep.off_band_entries;
    rem_pass = rem_pass && rep.pass && rep.off_band_max <= 1e-12;
  }
  report(4, rem_pass,
         "remainder off-band entries: max " + g(off) + " over " + std::to_string(off_entries) + " entries");
}

void criterion5(const fs::path& out) {
  double worst_random = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int dim = 1 + i % 2;
    const LatticePtr lat = two_roots(dim, dim == 1 ? 3 + (i / 2) % 4 : 2 + (i / 2) % 2);
    const MeasureGrid mu = weight(lat, i, 500 + i);
    const CarlesonSequence a = random_carleson_sequence(mu, 600 + i, 0.1 * (i % 7));
    const double c = carleson_constant(a, mu);
    worst_random = std::max(worst_random, embedding_constant(a, mu) / c);
  }
  std::ofstream csv(out / "greedy_carleson.csv");
  csv << "depth,embedding,carleson,rounds\n";
  bool monotone = true, bounded = true;
  double prev = 0.0, last = 0.0;
  for (int d = 3; d <= 10; ++d) {
    const MeasureGrid mu = uniform_measure(unit_lattice(1, 0, -d));
    const GreedyCarlesonResult gr = greedy_carleson_sequence(mu);
    const double c = carleson_constant(gr.sequence, mu);
    csv << d << ',' << g17(gr.embedding) << ',' << g17(c) << ',' << gr.steps << '\n';
    monotone = monotone && gr.embedding >= prev;
    bounded = bounded && gr.embedding <= 4.0 && c <= 1.0 + 1e-12;
    prev = last = gr.embedding;
  }
  report(5, worst_random <= 4.0 + 1e-9 && monotone && bounded,
         "Carleson embedding: random max " + g(worst_random) + "; greedy depths 3-10 " +
             (monotone ? "nondecreasing" : "NOT monotone") + ", depth 10 = " + g(last) +
             " (greedy_carleson.csv)");
}

void criterion7() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  double root_terms = 0.0;
  for (int i = 0; i < 200; ++i) {
    const int dim = 1 + i % 2;
    const int depth = dim == 1 ? 3 + (i / 2) % 3 : 3;
    const int r = (i / 2) % 3;
    const LatticePtr lat = two_roots(dim, depth);
    const MeasureGrid mu = weight(lat, i, 700 + i);
    const MeasureGrid nu = weight(lat, i + 1, 800 + i);
    const InducedOperator op = induce(random_band(lat, r, 900 + i, 1.0, true), mu, nu);
    necessity.record(testing_constants(op, r));
    const auto n = static_cast<Eigen::Index>(lat->num_leaves());
    const DecompositionTerms t = decomposition_identity(op, r, randn(n, 1000 + 2 * i), randn(n, 1001 + 2 * i));
    worst = std::max(worst, t.relative_residual);
    root_terms += std::abs(t.average_average) + std::abs(t.average_difference) + std::abs(t.difference_average);
  }
  report(7, worst <= 1e-10 && root_terms > 0.0,
         "bilinear decomposition: max relative residual " + g(worst) + " over 200 instances with root blocks, " +
             g(seconds_since(t0)) + " s");
}

void criterion8(const fs::path& out) {
  const auto t0 = Clock::now();
  struct Cell {
    int dim, depth;
  };
  const std::vector<Cell> cells{{1, 4}, {1, 5}, {2, 3}};
  std::ofstream csv(out / "rho_stability.csv");
  csv << "N,r,depth,seeds_500_sup,seeds_1000_sup,relative_change,mean_rho\n";
  bool pass = true;
  double worst_change = 0.0;
  std::uint64_t cell_id = 0;
  for (const Cell& cell : cells) {
    const LatticePtr lat = two_roots(cell.dim, cell.depth);
    for (int r = 0; r <= 2; ++r, ++cell_id) {
      double sup500 = 0.0, sup1000 = 0.0, sum = 0.0;
      for (std::uint64_t s = 0; s < 1000; ++s) {
        const std::uint64_t seed = 3 * (cell_id * 1000003 + s);
        const MeasureGrid mu = lognormal_measure(lat, 1.0, seed + 1);
        const MeasureGrid nu = lognormal_measure(lat, 1.0, seed + 2);
        const InducedOperator op = induce(random_band(lat, r, seed + 3, 1.0, true), mu, nu);
        const TestingReport t = testing_constants(op, r);
        necessity.record(t);
        sum += t.rho;
        sup1000 = std::max(sup1000, t.rho);
        if (s < 500) sup500 = sup1000;
      }
      const double change = (sup1000 - sup500) / sup500;
      worst_change = std::max(worst_change, change);
      pass = pass && std::isfinite(change) && change < 0.05;
      csv << cell.dim << ',' << r << ',' << cell.depth << ',' << g17(sup500) << ',' << g17(sup1000) << ','
          << g17(change) << ',' << g17(sum / 1000) << '\n';
    }
  }
  const double secs = seconds_since(t0);
  report(8, pass && secs <= 600.0,
         "sufficiency ratio: largest change of the sup from 500 to 1000 seeds " + g(100 * worst_change) +
             "% over 9 cells, " + g(secs) + " s (rho_stability.csv)");
}

// Numbers compared to 1e-12 relative; strings and structure must match exactly.
bool same_numbers(const json& a, const json& b, double& worst) {
  if (a.is_number() && b.is_number()) {
    const double x = a.get<double>(), y = b.get<double>();
    const double gap = std::abs(x - y) / std::max(1.0, std::abs(y));
    worst = std::max(worst, gap);
    return gap <= 1e-12;
  }
  if (a.type() != b.type() || a.size() != b.size()) return false;
  if (a.is_object()) {
    for (auto it = a.begin(); it != a.end(); ++it) {
      if (it.key() == "generated_at") continue;
      if (!b.contains(it.key()) || !same_numbers(it.value(), b.at(it.key()), worst)) return false;
    }
    return true;
  }
  if (a.is_array()) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (!same_numbers(a[i], b[i], worst)) return false;
    }
    return true;
  }
  return a == b;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

void criterion9(const fs::path& out, const fs::path& source) {
  RunConfig cfg = load_config(source / "configs" / "default.json");
  std::ostringstream log;
  bool pass = true;
  double worst = 0.0;
  std::string why;
  for (const std::string suite : {"verify", "testing", "carleson", "decompose", "search"}) {
    cfg.suite = suite;
    cfg.seed = 7;
    const fs::path a = out / "determinism" / (suite + "_a");
    const fs::path b = out / "determinism" / (suite + "_b");
    const int ca = run_suite(cfg, RunOptions{a, 1}, log);
    const int cb = run_suite(cfg, RunOptions{b, 2}, log);
    if (ca != kExitPass || cb != kExitPass) {
      pass = false;
      why += " " + suite + " exit";
    }
    if (!same_numbers(read_json(a / "report.json"), read_json(b / "report.json"), worst)) {
      pass = false;
      why += " " + suite + " differs";
    }
  }
  const fs::path artifact = out / "determinism" / "search_a" / "best_instance.json";
  if (replay_artifact(artifact, RunOptions{out / "determinism" / "replay", 1}, log) != kExitPass) {
    pass = false;
    why += " replay";
  }
  cfg.suite = "testing";
  const Instance inst = make_instance(cfg, 0);
  const TestingReport t1 = inst.evaluate();
  const TestingReport t2 = inst.evaluate();
  necessity.record(t1);
  for (auto [x, y] : {std::pair{t1.norm, t2.norm}, {t1.rho, t2.rho}, {t1.c_diag, t2.c_diag}}) {
    if (x != y) {
      pass = false;
      why += " in-process";
    }
  }
  report(9, pass,
         "determinism: five suites run twice (1 and 2 threads), max gap " + g(worst) +
             ", search artifact replays, in-process repeat identical" + why);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dyadlab acceptance criteria"};
  std::string out = "acceptance_tables";
  std::string source = DYADLAB_SOURCE_DIR;
  app.add_option("--out", out, "directory for the emitted tables");
  app.add_option("--source", source, "source tree (for configs/default.json)");
  CLI11_PARSE(app, argc, argv);
  const fs::path out_dir = out;
  fs::create_directories(out_dir);

  try {
    criterion1();
    const auto t0 = Clock::now();
    const std::vector<Case> suite = band_suite();
    for (const Case& c : suite) necessity.record(testing_constants(c.op, c.r));
    const double build_secs = seconds_since(t0);
    criterion2(suite);
    std::printf("  (suite build and testing constants: %s s)\n", g(build_secs).c_str());
    criterion3_4(suite);
    criterion5(out_dir);
    criterion7();
    criterion8(out_dir);
    criterion9(out_dir, source);
    report(6, necessity.violations == 0,
           "necessity: " + std::to_string(necessity.instances) + " instances, " +
               std::to_string(necessity.violations) + " violations, max sqrt(C) - norm = " +
               g(necessity.worst_excess));
  } catch (const std::exception& e) {
    std::printf("FAIL acceptance aborted: %s\n", e.what());
    return 1;
  }

  std::sort(lines.begin(), lines.end(), [](const Line& a, const Line& b) { return a.id < b.id; });
  json summary = json::array();
  bool all = true;
  for (const Line& l : lines) {
    summary.push_back({{"criterion", l.id}, {"pass", l.pass}, {"detail", l.detail}});
    all = all && l.pass;
  }
  std::ofstream(out_dir / "summary.json") << summary.dump(2) << "\n";
  std::printf("%s: %zu/%zu criteria\n", all ? "ALL PASS" : "SOME FAILED",
              static_cast<std::size_t>(std::count_if(lines.begin(), lines.end(), [](const Line& l) { return l.pass; })),
              lines.size());
  return all ? 0 : 1;
}
