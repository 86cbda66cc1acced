#include "dyadlab/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "config_json.hpp"
#include "dyadlab/generators.hpp"

namespace dyadlab {

using nlohmann::json;

namespace {

json num(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

double from_num(const json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  return NAN;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json cube_json(const Cube& q) { return json{{"level", q.level}, {"coords", q.coords}}; }

json check(const std::string& name, std::size_t trial, bool pass, double value, double tolerance,
           json witness = nullptr) {
  json c{{"name", name}, {"trial", trial}, {"pass", pass}, {"value", num(value)}, {"tolerance", num(tolerance)}};
  if (!witness.is_null()) c["witness"] = std::move(witness);
  return c;
}

json entry_witness(const std::optional<EntryWitness>& w) {
  if (!w) return nullptr;
  return json{{"case", w->which},
              {"q", cube_json(w->q)},
              {"r", cube_json(w->r)},
              {"q_component", w->q_component},
              {"r_component", w->r_component},
              {"paraproduct_entry", num(w->paraproduct_entry)},
              {"operator_entry", num(w->operator_entry)}};
}

json testing_json(const TestingReport& t) {
  json j{{"norm", num(t.norm)},
         {"c_direct_global", num(t.c_direct_global)},
         {"c_adjoint_global", num(t.c_adjoint_global)},
         {"c_direct_local", num(t.c_direct_local)},
         {"c_adjoint_local", num(t.c_adjoint_local)},
         {"c_adjoint_local_nu", num(t.c_adjoint_local_nu)},
         {"c_diag", num(t.c_diag)},
         {"c_diag_unweighted", num(t.c_diag_unweighted)},
         {"rho", num(t.rho)}};
  if (t.unbounded) {
    json w{{"constant", t.unbounded->constant}, {"q", cube_json(t.unbounded->q)}, {"value", num(t.unbounded->value)}};
    if (t.unbounded->r) w["r"] = cube_json(*t.unbounded->r);
    j["unbounded_witness"] = w;
  }
  return j;
}

/// Per-trial output, merged in trial order.
struct TrialOutput {
  json checks = json::array();
  json results = json::object();
  std::vector<std::string> rows;
};

template <class Fn>
std::vector<TrialOutput> for_trials(std::size_t trials, unsigned threads, Fn&& fn) {
  std::vector<TrialOutput> out(trials);
  std::vector<std::string> errors(trials);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t; (t = next.fetch_add(1)) < trials;) {
      try {
        out[t] = fn(t);
      } catch (const std::exception& e) {
        errors[t] = e.what();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(trials)));
  std::vector<std::thread> pool;
  for (unsigned i = 1; i < n; ++i) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  for (std::size_t t = 0; t < trials; ++t) {
    if (!errors[t].empty()) throw std::runtime_error("trial " + std::to_string(t) + ": " + errors[t]);
  }
  return out;
}

std::uint64_t function_seed(const RunConfig& cfg, std::size_t trial, std::uint64_t which) {
  return cfg.seed * 0x9E3779B97F4A7C15ULL + trial * 0x100000001B3ULL + which;
}

SpectralOptions spectral(const RunConfig& cfg) {
  SpectralOptions o;
  o.tolerance = cfg.tolerances.eigensolve;
  o.seed = cfg.seed;
  return o;
}

double relative_gap(double a, double b, double scale) {
  const double d = std::abs(a - b);
  return scale > 0.0 ? d / scale : d;
}

TrialOutput verify_trial(const RunConfig& cfg, std::size_t trial) {
  const Tolerances& tol = cfg.tolerances;
  TrialOutput out;
  const Instance inst = make_instance(cfg, trial);
  const InducedOperator op = inst.induced();
  const MeasureGrid& mu = op.mu();
  const MeasureGrid& nu = op.nu();
  const int r = inst.radius;
  const GridFunction f = random_function(inst.lattice, function_seed(cfg, trial, 1));
  const GridFunction g = random_function(inst.lattice, function_seed(cfg, trial, 2));

  {
    const MartingaleDecomposition dec = martingale_decompose(mu, f);
    double energy = 0.0;
    for (const auto& [q, d] : dec.differences) energy += norm_squared(mu, d);
    for (const auto& [q, e] : dec.root_averages) energy += norm_squared(mu, e);
    const double total = norm_squared(mu, f);
    const Eigen::VectorXd diff = dec.reconstruct().values - f.values;
    const double recon = std::sqrt(diff.cwiseAbs2().dot(mu.leaf_mass()));
    const double value = std::max(relative_gap(energy, total, total), total > 0 ? recon / std::sqrt(total) : recon);
    out.checks.push_back(check("parseval", trial, value <= tol.identity, value, tol.identity));
  }
  {
    const double lhs = op.apply(f.values).cwiseProduct(nu.leaf_mass()).dot(g.values);
    const double rhs = f.values.cwiseProduct(mu.leaf_mass()).dot(op.apply_adjoint(g.values));
    const double scale = std::sqrt(norm_squared(mu, f) * norm_squared(nu, g)) * operator_norm(op, spectral(cfg));
    const double value = relative_gap(lhs, rhs, scale);
    out.checks.push_back(check("adjoint_duality", trial, value <= tol.identity, value, tol.identity));
  }
  {
    const BandCheck b = check_band(inst.band(), r, tol.zero);
    json w = nullptr;
    if (b.witness) {
      const Lattice& lat = *inst.lattice;
      w = json{{"out", cube_json(lat.cube(b.witness->out.cube))},
               {"in", cube_json(lat.cube(b.witness->in.cube))},
               {"value", num(b.witness->value)}};
    }
    out.checks.push_back(check("band", trial, b.pass, b.max_violation, tol.zero, w));
  }
  {
    const LocalizationReport loc = check_well_localized(op, r, tol.zero);
    json w = nullptr;
    if (loc.witness) {
      w = json{{"adjoint_side", loc.witness->adjoint_side},
               {"test_cube", cube_json(loc.witness->test_cube)},
               {"haar_cube", cube_json(loc.witness->haar_cube)},
               {"component", loc.witness->component},
               {"value", num(loc.witness->value)}};
    }
    out.checks.push_back(check("well_localized", trial, loc.pass, loc.max_violation, tol.zero, w));
  }
  const Paraproduct pi_mu = build_paraproduct(op, r, ParaproductSide::Mu);
  const Paraproduct pi_nu = build_paraproduct(op, r, ParaproductSide::Nu);
  for (const Paraproduct* pi : {&pi_mu, &pi_nu}) {
    const ParaproductEntryReport l = verify_paraproduct_entries(*pi, op, r, tol.paraproduct);
    const double worst = std::max({l.case1_max, l.case2_max, l.case3_max});
    const char* name = pi == &pi_mu ? "paraproduct_entries_mu" : "paraproduct_entries_nu";
    out.checks.push_back(check(name, trial, l.pass, worst, tol.paraproduct, entry_witness(l.witness)));
  }
  const TestingReport testing = testing_constants(op, r, spectral(cfg));
  {
    const RemainderReport rem = remainder_diagonals(op, pi_mu, pi_nu, tol.zero, testing.c_diag);
    out.checks.push_back(check("remainder_diagonals", trial, rem.pass, rem.off_band_max, tol.zero,
                               entry_witness(rem.witness)));
  }
  {
    const CarlesonSequence a = carleson_sequence(op, r);
    const double c = carleson_constant(a, mu);
    const double e = embedding_constant(a, mu, spectral(cfg));
    const double bound = 4.0 * c;
    const bool pass = std::isfinite(c) && e <= bound * (1.0 + 1e-9) + 1e-300;
    out.checks.push_back(check("carleson_embedding", trial, pass, c > 0 ? e / c : 0.0, 4.0));
  }
  {
    const DecompositionTerms d = decomposition_identity(op, pi_mu, pi_nu, f.values, g.values);
    out.checks.push_back(
        check("decomposition_identity", trial, d.relative_residual <= tol.identity, d.relative_residual, tol.identity));
  }
  out.checks.push_back(check("necessity", trial, testing.necessity_holds(1e-9), testing.rho, 1e-9));
  out.results = testing_json(testing);
  return out;
}

std::string testing_row(const Instance& inst, const RunConfig& cfg, std::size_t trial, const TestingReport& t) {
  std::ostringstream os;
  os << inst.lattice->dim() << ',' << inst.radius << ',' << inst.lattice->depth() << ',' << (cfg.seed + trial) << ','
     << fmt(t.norm) << ',' << fmt(t.c_direct_local) << ',' << fmt(t.c_adjoint_local) << ',' << fmt(t.c_diag) << ','
     << fmt(t.rho);
  return os.str();
}

TrialOutput testing_trial(const RunConfig& cfg, std::size_t trial) {
  TrialOutput out;
  const Instance inst = make_instance(cfg, trial);
  const InducedOperator op = inst.induced();
  const TestingReport t = testing_constants(op, inst.radius, spectral(cfg));
  out.checks.push_back(check("necessity", trial, t.necessity_holds(1e-9), t.rho, 1e-9));
  out.checks.push_back(check("domain_monotonicity", trial,
                             t.c_direct_local <= t.c_direct_global && t.c_adjoint_local <= t.c_adjoint_global,
                             t.c_direct_global - t.c_direct_local, 0.0));
  const ComparableBlocks blocks = comparable_block_count(op, inst.radius, cfg.tolerances.zero);
  out.checks.push_back(check("comparable_blocks", trial, blocks.max_count <= blocks.bound,
                             static_cast<double>(blocks.max_count), static_cast<double>(blocks.bound)));
  out.results = testing_json(t);
  out.results["comparable_blocks_max"] = blocks.max_count;
  out.results["comparable_blocks_bound"] = blocks.bound;
  out.rows.push_back(testing_row(inst, cfg, trial, t));
  return out;
}

TrialOutput carleson_trial(const RunConfig& cfg, std::size_t trial) {
  TrialOutput out;
  const Instance inst = make_instance(cfg, trial);
  const InducedOperator op = inst.induced();
  const MeasureGrid& mu = op.mu();
  const SpectralOptions so = spectral(cfg);

  const CarlesonSequence a = carleson_sequence(op, inst.radius);
  const double c = carleson_constant(a, mu);
  const double e = embedding_constant(a, mu, so);
  out.checks.push_back(check("operator_sequence_embedding", trial, std::isfinite(c) && e <= 4.0 * c * (1 + 1e-9),
                             c > 0 ? e / c : 0.0, 4.0));
  const CarlesonSequence rnd = random_carleson_sequence(mu, function_seed(cfg, trial, 3));
  const double er = embedding_constant(rnd, mu, so);
  const double cr = carleson_constant(rnd, mu);
  out.checks.push_back(check("random_sequence_embedding", trial, er <= 4.0 * cr + 1e-9, er, 4.0));
  out.results = json{{"carleson_constant", num(c)}, {"embedding_constant", num(e)},
                     {"random_carleson_constant", num(cr)}, {"random_embedding_constant", num(er)}};
  if (trial == 0) {
    const GreedyCarlesonResult gr = greedy_carleson_sequence(mu, so);
    out.checks.push_back(check("greedy_sequence_embedding", trial, gr.embedding <= 4.0 + 1e-9, gr.embedding, 4.0));
    out.results["greedy_embedding_constant"] = num(gr.embedding);
    out.results["greedy_steps"] = gr.steps;
    const Lattice& lat = *inst.lattice;
    for (CubeId q = 0; q < lat.num_cubes(); ++q) {
      std::ostringstream os;
      os << lat.cube(q).level;
      for (auto x : lat.cube(q).coords) os << ',' << x;
      os << ',' << fmt(a.values[q]);
      out.rows.push_back(os.str());
    }
  }
  return out;
}

TrialOutput decompose_trial(const RunConfig& cfg, std::size_t trial) {
  TrialOutput out;
  const Instance inst = make_instance(cfg, trial);
  const InducedOperator op = inst.induced();
  const GridFunction f = random_function(inst.lattice, function_seed(cfg, trial, 1));
  const GridFunction g = random_function(inst.lattice, function_seed(cfg, trial, 2));
  const DecompositionTerms d = decomposition_identity(op, inst.radius, f.values, g.values);
  out.checks.push_back(check("decomposition_identity", trial, d.relative_residual <= cfg.tolerances.identity,
                             d.relative_residual, cfg.tolerances.identity));
  out.results = json{{"total", num(d.total)},
                     {"paraproduct_mu", num(d.paraproduct_mu)},
                     {"paraproduct_nu", num(d.paraproduct_nu)},
                     {"comparable", num(d.comparable)},
                     {"average_average", num(d.average_average)},
                     {"average_difference", num(d.average_difference)},
                     {"difference_average", num(d.difference_average)},
                     {"residual", num(d.residual)},
                     {"relative_residual", num(d.relative_residual)}};
  return out;
}

/// Weighted sums of the raw instance data. Testing constants are suprema and
/// may ignore a perturbed leaf; these do not.
json fingerprint(const Instance& inst) {
  auto moment = [](const Eigen::VectorXd& m) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < m.size(); ++i) s += m[i] * (1.0 + static_cast<double>(i) / static_cast<double>(m.size()));
    return s;
  };
  const auto& c = inst.coefficients;
  const double slots = static_cast<double>(c.rows()) * static_cast<double>(c.cols());
  double op = 0.0;
  for (Eigen::Index k = 0; k < c.outerSize(); ++k) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(c, k); it; ++it) {
      op += it.value() * (1.0 + (static_cast<double>(it.row()) * static_cast<double>(c.cols()) + static_cast<double>(it.col())) / slots);
    }
  }
  return json{{"mu_total", num(inst.mu_mass.sum())}, {"nu_total", num(inst.nu_mass.sum())},
              {"mu_moment", num(moment(inst.mu_mass))}, {"nu_moment", num(moment(inst.nu_mass))},
              {"operator_moment", num(op)}};
}

json artifact_json(const Instance& inst, const TestingReport& rep, const RunConfig& base) {
  RunConfig c = instance_config(inst, base);
  c.suite = "testing";
  json expected = testing_json(rep);
  expected.update(fingerprint(inst));
  return json{{"schema_version", kSchemaVersion}, {"kind", "dyadlab-instance"}, {"config", config_as_json(c)},
              {"expected", expected}};
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  os << text;
}

void write_csv(const std::filesystem::path& path, const std::string& header, const std::vector<std::string>& rows) {
  std::string text = header + "\n";
  for (const auto& r : rows) text += r + "\n";
  write_text(path, text);
}

json base_report(const RunConfig& cfg) {
  return json{{"schema_version", kSchemaVersion}, {"suite", cfg.suite}, {"seed", cfg.seed},
              {"config", config_as_json(cfg)}, {"checks", json::array()}, {"results", json::array()},
              {"tables", json::object()}, {"pass", true}, {"generated_at", timestamp()}};
}

int finish(json& report, const std::filesystem::path& dir, std::ostream& log) {
  bool pass = true;
  std::size_t failed = 0;
  for (const json& c : report["checks"]) {
    if (!c["pass"].get<bool>()) {
      pass = false;
      ++failed;
      log << "FAIL " << c["name"].get<std::string>() << " (trial " << c["trial"] << "): value " << c["value"]
          << ", tolerance " << c["tolerance"] << "\n";
    }
  }
  report["pass"] = pass;
  write_text(dir / "report.json", report.dump(2) + "\n");
  log << report["suite"].get<std::string>() << ": " << report["checks"].size() - failed << "/"
      << report["checks"].size() << " checks passed\n";
  return pass ? kExitPass : kExitFailure;
}

}  // namespace

int run_suite(const RunConfig& cfg, const RunOptions& opts, std::ostream& log) {
  std::filesystem::create_directories(opts.out_dir);
  json report = base_report(cfg);

  if (cfg.suite == "search") {
    const Instance start = make_instance(cfg, 0);
    SearchOptions so;
    so.iterations = cfg.search.iterations;
    so.mass_step = cfg.search.mass_step;
    so.entry_step = cfg.search.entry_step;
    so.seed = cfg.seed;
    so.spectral = spectral(cfg);
    const SearchResult res = extremal_search(start, so);
    const bool monotone = std::is_sorted(res.trajectory.begin(), res.trajectory.end()) &&
                          (res.trajectory.empty() || res.trajectory.front() >= res.seed_rho);
    report["checks"].push_back(check("monotone_incumbent", 0, monotone, res.best_rho - res.seed_rho, 0.0));
    json traj = json::array();
    for (double v : res.trajectory) traj.push_back(num(v));
    json best = testing_json(res.best_report);
    report["results"].push_back(json{{"seed_rho", num(res.seed_rho)},
                                     {"best_rho", num(res.best_rho)},
                                     {"iterations", res.trajectory.size()},
                                     {"accepted", res.accepted},
                                     {"trajectory", traj},
                                     {"best", best}});
    const json artifact = artifact_json(res.best, res.best_report, cfg);
    write_text(opts.out_dir / "best_instance.json", artifact.dump(2) + "\n");
    report["tables"]["artifact"] = "best_instance.json";
    return finish(report, opts.out_dir, log);
  }

  TrialOutput (*fn)(const RunConfig&, std::size_t) = nullptr;
  if (cfg.suite == "verify") fn = verify_trial;
  if (cfg.suite == "testing") fn = testing_trial;
  if (cfg.suite == "carleson") fn = carleson_trial;
  if (cfg.suite == "decompose") fn = decompose_trial;
  if (!fn) throw ConfigError("unknown suite '" + cfg.suite + "'");

  const auto outputs = for_trials(cfg.trials, opts.threads, [&](std::size_t t) { return fn(cfg, t); });
  std::vector<std::string> rows;
  for (const TrialOutput& o : outputs) {
    for (const json& c : o.checks) report["checks"].push_back(c);
    report["results"].push_back(o.results);
    rows.insert(rows.end(), o.rows.begin(), o.rows.end());
  }
  if (cfg.suite == "testing") {
    write_csv(opts.out_dir / "testing.csv", "N,r,depth,seed,norm,C_direct_local,C_adjoint_local,C_diag,rho", rows);
    report["tables"]["testing"] = "testing.csv";
  }
  if (cfg.suite == "carleson") {
    std::string header = "level";
    for (int d = 0; d < cfg.lattice.dim; ++d) header += ",coord" + std::to_string(d);
    write_csv(opts.out_dir / "carleson_sequence.csv", header + ",a_Q", rows);
    report["tables"]["carleson_sequence"] = "carleson_sequence.csv";
  }
  return finish(report, opts.out_dir, log);
}

int replay_artifact(const std::filesystem::path& artifact, const RunOptions& opts, std::ostream& log) {
  if (artifact.empty()) throw ConfigError("replay needs an artifact path");
  std::ifstream in(artifact);
  if (!in) throw ConfigError("cannot read artifact '" + artifact.string() + "'");
  json a;
  try {
    a = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("artifact is not valid JSON: ") + e.what());
  }
  if (!a.is_object() || a.value("kind", "") != "dyadlab-instance" || !a.contains("config") || !a.contains("expected")) {
    throw ConfigError("not a dyadlab instance artifact");
  }
  const RunConfig cfg = config_from_json(a.at("config"));
  std::filesystem::create_directories(opts.out_dir);
  const Instance inst = make_instance(cfg, 0);
  const TestingReport rep = inst.evaluate(spectral(cfg));
  json now = testing_json(rep);
  now.update(fingerprint(inst));

  json report = base_report(cfg);
  report["suite"] = "replay";
  for (const auto& [key, stored] : a.at("expected").items()) {
    if (key == "unbounded_witness") continue;
    if (!now.contains(key)) throw ConfigError("artifact has unknown expected value '" + key + "'");
    const double want = from_num(stored);
    const double got = from_num(now.at(key));
    double gap = 0.0;
    bool ok = true;
    if (std::isfinite(want) && std::isfinite(got)) {
      gap = std::abs(got - want) / std::max(1.0, std::abs(want));
      ok = gap <= 1e-12;
    } else {
      ok = (std::isnan(want) && std::isnan(got)) || want == got;
      gap = ok ? 0.0 : INFINITY;
    }
    report["checks"].push_back(check("replay_" + key, 0, ok, gap, 1e-12));
  }
  report["results"].push_back(now);
  return finish(report, opts.out_dir, log);
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"dyadlab: finite dyadic models of two-weight estimates for well-localized operators", "dyadlab"};
  app.set_version_flag("--version", "dyadlab 0.1.0");
  std::string config_path;
  std::string suite;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  unsigned threads = 1;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--suite", suite, "verify | testing | carleson | search | decompose (overrides the config)")
      ->check(CLI::IsMember({"verify", "testing", "carleson", "search", "decompose"}));
  app.add_option("--seed", seed, "base seed (overrides the config)");
  app.add_option("--out", out_dir, "output directory for report.json and tables");
  app.add_option("--threads", threads, "worker threads for independent trials")->check(CLI::PositiveNumber);
  app.add_option("--tolerance-override", overrides, "name=value, name in zero|identity|eigensolve|paraproduct");

  app.fallthrough();
  auto* replay = app.add_subcommand("replay", "recompute the constants stored in a search artifact");
  std::string artifact;
  replay->add_option("artifact", artifact, "artifact written by the search suite")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitUsage;
  }

  RunOptions opts;
  opts.out_dir = out_dir;
  opts.threads = threads;
  try {
    if (*replay) {
      if (artifact.empty()) throw ConfigError("replay needs a non-empty artifact path");
      return replay_artifact(artifact, opts, std::cout);
    }
    if (config_path.empty()) throw ConfigError("--config is required");
    RunConfig cfg = load_config(config_path);
    if (!suite.empty()) cfg.suite = suite;
    if (seed) cfg.seed = *seed;
    for (const std::string& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw ConfigError("--tolerance-override expects name=value, got '" + o + "'");
      double value = 0.0;
      try {
        std::size_t used = 0;
        value = std::stod(o.substr(eq + 1), &used);
        if (used != o.size() - eq - 1) throw std::invalid_argument(o);
      } catch (const std::exception&) {
        throw ConfigError("--tolerance-override: bad number in '" + o + "'");
      }
      set_tolerance(cfg.tolerances, o.substr(0, eq), value);
    }
    return run_suite(cfg, opts, std::cout);
  } catch (const ConfigError& e) {
    std::cerr << "dyadlab: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "dyadlab: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace dyadlab
