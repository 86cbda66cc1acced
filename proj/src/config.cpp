#include "dyadlab/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "config_json.hpp"
#include "dyadlab/generators.hpp"

namespace dyadlab {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(where, "expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items()) {
    if (!ok.count(key)) fail(where, "unknown key '" + key + "'");
  }
}

template <class T>
T get(const json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(where + "." + key, "wrong type");
  }
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) fail(where, std::string("missing key '") + key + "'");
  return get<T>(j, key, where, T{});
}

double finite(double v, const std::string& where) {
  if (!std::isfinite(v)) fail(where, "must be finite");
  return v;
}

std::uint64_t seed_of(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) return 0;
  const json& s = j.at(key);
  if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() && s.get<std::int64_t>() < 0)) {
    fail(where + "." + key, "must be a nonnegative integer");
  }
  return s.get<std::uint64_t>();
}

Cube cube_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected {\"level\": ..., \"coords\": [...]}");
  Cube q;
  q.level = require<int>(j, "level", where);
  q.coords = require<std::vector<std::int64_t>>(j, "coords", where);
  return q;
}

json cube_to_json(const Cube& q) { return json{{"level", q.level}, {"coords", q.coords}}; }

MeasureSpec measure_from_json(const json& j, const std::string& where) {
  only_keys(j, where, {"generator", "mass", "sigma", "count", "fraction", "seed", "leaf_mass"});
  MeasureSpec m;
  if (j.contains("leaf_mass")) {
    if (j.contains("generator") && j.at("generator") != "explicit") fail(where, "leaf_mass given with a generator");
    m.generator = "explicit";
    m.leaf_mass = get<std::vector<double>>(j, "leaf_mass", where, {});
    for (double v : m.leaf_mass) {
      if (!std::isfinite(v) || v < 0.0) fail(where + ".leaf_mass", "masses must be finite and nonnegative");
    }
    return m;
  }
  m.generator = require<std::string>(j, "generator", where);
  static const std::set<std::string> known{"uniform", "lebesgue", "lognormal", "sparse_atoms", "zero_blocks"};
  if (!known.count(m.generator)) fail(where + ".generator", "unknown generator '" + m.generator + "'");
  m.mass = finite(get<double>(j, "mass", where, 1.0), where + ".mass");
  if (m.mass < 0.0) fail(where + ".mass", "must be nonnegative");
  m.sigma = finite(get<double>(j, "sigma", where, 1.0), where + ".sigma");
  if (m.sigma < 0.0) fail(where + ".sigma", "must be nonnegative");
  m.count = get<std::size_t>(j, "count", where, 1);
  m.fraction = finite(get<double>(j, "fraction", where, 0.25), where + ".fraction");
  if (m.fraction < 0.0 || m.fraction >= 1.0) fail(where + ".fraction", "must lie in [0, 1)");
  m.seed = seed_of(j, "seed", where);
  return m;
}

json measure_to_json(const MeasureSpec& m) {
  if (m.generator == "explicit") return json{{"leaf_mass", m.leaf_mass}};
  json j{{"generator", m.generator}, {"seed", m.seed}};
  if (m.generator == "uniform") j["mass"] = m.mass;
  if (m.generator == "lognormal" || m.generator == "zero_blocks") j["sigma"] = m.sigma;
  if (m.generator == "sparse_atoms") j["count"] = m.count;
  if (m.generator == "zero_blocks") j["fraction"] = m.fraction;
  return j;
}

std::pair<Cube, int> slot_from_json(const json& j, const std::string& where) {
  only_keys(j, where, {"level", "coords", "k"});
  return {cube_from_json(j, where), get<int>(j, "k", where, 0)};
}

OperatorSpec operator_from_json(const json& j, const std::string& where) {
  only_keys(j, where, {"type", "alpha", "r", "seed", "amplitude", "root_blocks", "entries", "radius"});
  OperatorSpec o;
  o.type = require<std::string>(j, "type", where);
  if (o.type == "multiplier") {
    if (!j.contains("alpha")) fail(where, "multiplier needs 'alpha'");
    const json& a = j.at("alpha");
    if (a.is_number()) {
      o.alpha = finite(a.get<double>(), where + ".alpha");
    } else if (a.is_array()) {
      o.alpha_values = get<std::vector<double>>(j, "alpha", where, {});
      for (double v : o.alpha_values) finite(v, where + ".alpha");
    } else {
      fail(where + ".alpha", "must be a number or an array");
    }
  } else if (o.type == "random_band") {
    o.r = get<int>(j, "r", where, 0);
    if (o.r < 0) fail(where + ".r", "must be nonnegative");
    o.seed = seed_of(j, "seed", where);
    o.amplitude = finite(get<double>(j, "amplitude", where, 1.0), where + ".amplitude");
    if (o.amplitude < 0.0) fail(where + ".amplitude", "must be nonnegative");
    o.root_blocks = get<bool>(j, "root_blocks", where, false);
  } else if (o.type == "explicit") {
    if (!j.contains("entries") || !j.at("entries").is_array()) fail(where, "explicit operator needs an 'entries' array");
    std::size_t i = 0;
    for (const json& e : j.at("entries")) {
      const std::string w = where + ".entries[" + std::to_string(i++) + "]";
      only_keys(e, w, {"out", "in", "value"});
      if (!e.contains("out") || !e.contains("in")) fail(w, "needs 'out' and 'in'");
      auto [oc, ok] = slot_from_json(e.at("out"), w + ".out");
      auto [ic, ik] = slot_from_json(e.at("in"), w + ".in");
      o.entries.push_back(ExplicitEntry{oc, ok, ic, ik, finite(require<double>(e, "value", w), w + ".value")});
    }
    if (j.contains("radius")) {
      o.radius = get<int>(j, "radius", where, 0);
      if (*o.radius < 0) fail(where + ".radius", "must be nonnegative");
    }
  } else if (o.type != "shift" && o.type != "identity") {
    fail(where + ".type", "unknown operator type '" + o.type + "'");
  }
  return o;
}

json operator_to_json(const OperatorSpec& o) {
  json j{{"type", o.type}};
  if (o.type == "multiplier") {
    if (o.alpha) {
      j["alpha"] = *o.alpha;
    } else {
      j["alpha"] = o.alpha_values;
    }
  } else if (o.type == "random_band") {
    j["r"] = o.r;
    j["seed"] = o.seed;
    j["amplitude"] = o.amplitude;
    j["root_blocks"] = o.root_blocks;
  } else if (o.type == "explicit") {
    json entries = json::array();
    for (const auto& e : o.entries) {
      json out = cube_to_json(e.out_cube);
      out["k"] = e.out_component;
      json in = cube_to_json(e.in_cube);
      in["k"] = e.in_component;
      entries.push_back(json{{"out", out}, {"in", in}, {"value", e.value}});
    }
    j["entries"] = entries;
    if (o.radius) j["radius"] = *o.radius;
  }
  return j;
}

/// Leaf index -> position in the row-major-per-root order used by config files.
std::vector<std::size_t> row_major_positions(const Lattice& lat) {
  const std::size_t per_root = lat.num_leaves() / lat.num_roots();
  std::vector<std::size_t> pos(lat.num_leaves());
  for (std::size_t root = 0; root < lat.num_roots(); ++root) {
    for (std::size_t flat = 0; flat < per_root; ++flat) pos[lat.leaf_from_row_major(root, flat)] = root * per_root + flat;
  }
  return pos;
}

/// Non-leaf cube ids in config order: depth by depth, root by root, row-major.
std::vector<CubeId> interior_in_row_major(const Lattice& lat) {
  std::vector<CubeId> ids;
  const int n = lat.dim();
  for (int t = 0; t < lat.depth(); ++t) {
    const std::int64_t side = std::int64_t{1} << t;
    std::size_t per_root = std::size_t{1} << (n * t);
    for (const Cube& root : lat.roots()) {
      for (std::size_t flat = 0; flat < per_root; ++flat) {
        Cube q{root.level - t, std::vector<std::int64_t>(static_cast<std::size_t>(n))};
        std::size_t rest = flat;
        for (int d = n - 1; d >= 0; --d) {
          q.coords[static_cast<std::size_t>(d)] = root.coords[static_cast<std::size_t>(d)] * side +
                                                  static_cast<std::int64_t>(rest % static_cast<std::size_t>(side));
          rest /= static_cast<std::size_t>(side);
        }
        ids.push_back(*lat.find(q));
      }
    }
  }
  return ids;
}

}  // namespace

RunConfig config_from_json(const json& j) {
  only_keys(j, "config", {"schema_version", "lattice", "mu", "nu", "operator", "r", "suite", "seed", "trials",
                          "search", "tolerances", "description"});
  RunConfig c;
  c.schema_version = get<int>(j, "schema_version", "config", kSchemaVersion);
  if (c.schema_version != kSchemaVersion) {
    fail("config.schema_version", "unsupported version " + std::to_string(c.schema_version));
  }

  if (!j.contains("lattice")) fail("config", "missing key 'lattice'");
  const json& lj = j.at("lattice");
  only_keys(lj, "lattice", {"dim", "top_level", "leaf_level", "roots"});
  c.lattice.dim = require<int>(lj, "dim", "lattice");
  c.lattice.top_level = require<int>(lj, "top_level", "lattice");
  c.lattice.leaf_level = require<int>(lj, "leaf_level", "lattice");
  if (c.lattice.leaf_level >= c.lattice.top_level) {
    fail("lattice", "leaf_level (" + std::to_string(c.lattice.leaf_level) + ") must be below top_level (" +
                        std::to_string(c.lattice.top_level) + ")");
  }
  if (lj.contains("roots")) {
    if (!lj.at("roots").is_array()) fail("lattice.roots", "expected an array");
    for (const json& rj : lj.at("roots")) c.lattice.roots.push_back(cube_from_json(rj, "lattice.roots"));
  } else {
    c.lattice.roots.push_back(Cube{c.lattice.top_level, std::vector<std::int64_t>(
                                                            static_cast<std::size_t>(std::max(c.lattice.dim, 0)), 0)});
  }
  LatticePtr lat;
  try {
    lat = make_lattice(c.lattice);
  } catch (const std::exception& e) {
    fail("lattice", e.what());
  }

  if (!j.contains("mu")) fail("config", "missing key 'mu'");
  c.mu = measure_from_json(j.at("mu"), "mu");
  c.nu = j.contains("nu") ? measure_from_json(j.at("nu"), "nu") : c.mu;
  for (const MeasureSpec* m : {&c.mu, &c.nu}) {
    if (m->generator == "explicit" && m->leaf_mass.size() != lat->num_leaves()) {
      fail(m == &c.mu ? "mu.leaf_mass" : "nu.leaf_mass",
           "expected " + std::to_string(lat->num_leaves()) + " values, got " + std::to_string(m->leaf_mass.size()));
    }
  }

  if (!j.contains("operator")) fail("config", "missing key 'operator'");
  c.op = operator_from_json(j.at("operator"), "operator");
  if (c.op.type == "multiplier" && !c.op.alpha && c.op.alpha_values.size() != lat->num_interior()) {
    fail("operator.alpha", "expected " + std::to_string(lat->num_interior()) + " values");
  }
  if (c.op.type == "shift" && c.lattice.dim != 1) fail("operator", "the Haar shift is one-dimensional only");
  if (c.op.type == "explicit") {
    try {
      (void)make_operator(lat, c.op, 0, 0);
    } catch (const std::exception& e) {
      fail("operator", e.what());
    }
  }

  if (j.contains("r")) {
    c.r = get<int>(j, "r", "config", 0);
    if (*c.r < 0) fail("config.r", "must be nonnegative");
    if (*c.r >= lat->depth()) fail("config.r", "must be smaller than the lattice depth");
  }
  c.suite = get<std::string>(j, "suite", "config", "verify");
  static const std::set<std::string> suites{"verify", "testing", "carleson", "search", "decompose"};
  if (!suites.count(c.suite)) fail("config.suite", "unknown suite '" + c.suite + "'");
  c.seed = seed_of(j, "seed", "config");
  c.trials = get<std::size_t>(j, "trials", "config", 1);
  if (c.trials == 0) fail("config.trials", "must be positive");

  if (j.contains("search")) {
    const json& s = j.at("search");
    only_keys(s, "search", {"iterations", "mass_step", "entry_step"});
    c.search.iterations = get<std::size_t>(s, "iterations", "search", c.search.iterations);
    c.search.mass_step = finite(get<double>(s, "mass_step", "search", c.search.mass_step), "search.mass_step");
    c.search.entry_step = finite(get<double>(s, "entry_step", "search", c.search.entry_step), "search.entry_step");
  }
  if (j.contains("tolerances")) {
    const json& t = j.at("tolerances");
    only_keys(t, "tolerances", {"zero", "identity", "eigensolve", "paraproduct"});
    for (const auto& [key, value] : t.items()) {
      if (!value.is_number()) fail("tolerances." + key, "must be a number");
      set_tolerance(c.tolerances, key, value.get<double>());
    }
  }
  return c;
}

json config_as_json(const RunConfig& c) {
  json roots = json::array();
  for (const Cube& q : c.lattice.roots) roots.push_back(cube_to_json(q));
  json j{{"schema_version", c.schema_version},
         {"lattice",
          {{"dim", c.lattice.dim}, {"top_level", c.lattice.top_level}, {"leaf_level", c.lattice.leaf_level},
           {"roots", roots}}},
         {"mu", measure_to_json(c.mu)},
         {"nu", measure_to_json(c.nu)},
         {"operator", operator_to_json(c.op)},
         {"suite", c.suite},
         {"seed", c.seed},
         {"trials", c.trials},
         {"search",
          {{"iterations", c.search.iterations}, {"mass_step", c.search.mass_step}, {"entry_step", c.search.entry_step}}},
         {"tolerances",
          {{"zero", c.tolerances.zero},
           {"identity", c.tolerances.identity},
           {"eigensolve", c.tolerances.eigensolve},
           {"paraproduct", c.tolerances.paraproduct}}}};
  if (c.r) j["r"] = *c.r;
  return j;
}

RunConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_to_json(const RunConfig& cfg, int indent) { return config_as_json(cfg).dump(indent); }

void set_tolerance(Tolerances& tol, const std::string& name, double value) {
  if (!std::isfinite(value) || value < 0.0) throw ConfigError("tolerance '" + name + "' must be finite and nonnegative");
  if (name == "zero") {
    tol.zero = value;
  } else if (name == "identity") {
    tol.identity = value;
  } else if (name == "eigensolve") {
    tol.eigensolve = value;
  } else if (name == "paraproduct") {
    tol.paraproduct = value;
  } else {
    throw ConfigError("unknown tolerance '" + name + "' (expected zero, identity, eigensolve or paraproduct)");
  }
}

LatticePtr make_lattice(const LatticeSpec& spec) {
  return build_lattice(spec.dim, spec.top_level, spec.leaf_level, spec.roots);
}

MeasureGrid make_measure(const LatticePtr& lattice, const MeasureSpec& spec, std::uint64_t base_seed,
                         std::size_t trial) {
  const std::uint64_t seed = spec.seed + base_seed + trial;
  if (spec.generator == "explicit") {
    const auto pos = row_major_positions(*lattice);
    Eigen::VectorXd m(static_cast<Eigen::Index>(lattice->num_leaves()));
    for (std::size_t i = 0; i < pos.size(); ++i) m[static_cast<Eigen::Index>(i)] = spec.leaf_mass.at(pos[i]);
    return MeasureGrid(lattice, std::move(m));
  }
  if (spec.generator == "uniform") return uniform_measure(lattice, spec.mass);
  if (spec.generator == "lebesgue") return lebesgue_measure(lattice);
  if (spec.generator == "lognormal") return lognormal_measure(lattice, spec.sigma, seed);
  if (spec.generator == "sparse_atoms") return sparse_atoms_measure(lattice, spec.count, seed);
  if (spec.generator == "zero_blocks") return zero_blocks_measure(lattice, spec.fraction, seed, spec.sigma);
  throw ConfigError("unknown generator '" + spec.generator + "'");
}

BandOperator make_operator(const LatticePtr& lattice, const OperatorSpec& spec, std::uint64_t base_seed,
                           std::size_t trial) {
  if (spec.type == "multiplier") {
    if (spec.alpha) return haar_multiplier(lattice, *spec.alpha);
    const auto order = interior_in_row_major(*lattice);
    MultiplierSpec m{std::vector<double>(lattice->num_interior(), 0.0)};
    for (std::size_t i = 0; i < order.size(); ++i) m.alpha[order[i]] = spec.alpha_values.at(i);
    return haar_multiplier(lattice, m);
  }
  if (spec.type == "shift") return haar_shift(lattice);
  if (spec.type == "identity") return identity_band(lattice);
  if (spec.type == "random_band") {
    return random_band(lattice, spec.r, spec.seed + base_seed + trial, spec.amplitude, spec.root_blocks);
  }
  if (spec.type == "explicit") return explicit_band(lattice, spec.entries, spec.radius.value_or(-1));
  throw ConfigError("unknown operator type '" + spec.type + "'");
}

Instance make_instance(const RunConfig& cfg, std::size_t trial) {
  const LatticePtr lat = make_lattice(cfg.lattice);
  const BandOperator op = make_operator(lat, cfg.op, cfg.seed, trial);
  const int r = cfg.r.value_or(op.radius());
  if (r >= lat->depth()) throw ConfigError("band radius " + std::to_string(r) + " must be smaller than the lattice depth");
  return Instance{lat, make_measure(lat, cfg.mu, cfg.seed, trial).leaf_mass(),
                  make_measure(lat, cfg.nu, cfg.seed, trial).leaf_mass(), op.coefficients(), r};
}

RunConfig instance_config(const Instance& inst, const RunConfig& base) {
  RunConfig c = base;
  const Lattice& lat = *inst.lattice;
  const auto pos = row_major_positions(lat);
  for (auto [spec, mass] : {std::pair{&c.mu, &inst.mu_mass}, std::pair{&c.nu, &inst.nu_mass}}) {
    *spec = MeasureSpec{};
    spec->generator = "explicit";
    spec->leaf_mass.assign(lat.num_leaves(), 0.0);
    for (std::size_t i = 0; i < pos.size(); ++i) spec->leaf_mass[pos[i]] = (*mass)[static_cast<Eigen::Index>(i)];
  }
  c.op = OperatorSpec{};
  c.op.type = "explicit";
  c.op.radius = inst.radius;
  for (const BandEntry& e : inst.band().entries()) {
    c.op.entries.push_back(ExplicitEntry{lat.cube(e.out.cube), e.out.component, lat.cube(e.in.cube), e.in.component, e.value});
  }
  c.r = inst.radius;
  c.seed = 0;
  c.trials = 1;
  return c;
}

}  // namespace dyadlab
