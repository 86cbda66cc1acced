#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dyadlab/search.hpp"

namespace dyadlab {

/// Malformed or inconsistent configuration; the CLI maps it to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LatticeSpec {
  int dim = 1;
  int top_level = 0;
  int leaf_level = -4;
  std::vector<Cube> roots;
};

struct MeasureSpec {
  std::string generator = "uniform";  // uniform | lebesgue | lognormal | sparse_atoms | zero_blocks | explicit
  double mass = 1.0;
  double sigma = 1.0;
  std::size_t count = 1;
  double fraction = 0.25;
  std::uint64_t seed = 0;
  std::vector<double> leaf_mass;  // explicit: row-major per root, roots in order
};

struct OperatorSpec {
  std::string type = "random_band";  // multiplier | shift | random_band | explicit | identity
  std::optional<double> alpha;
  std::vector<double> alpha_values;  // per non-leaf cube, row-major per depth and root
  int r = 0;
  std::uint64_t seed = 0;
  double amplitude = 1.0;
  bool root_blocks = false;
  std::vector<ExplicitEntry> entries;
  std::optional<int> radius;  // explicit only; measured when absent
};

struct Tolerances {
  double zero = 1e-12;
  double identity = 1e-10;
  double eigensolve = 1e-10;
  double paraproduct = 1e-9;
};

struct SearchSpec {
  std::size_t iterations = 50;
  double mass_step = 0.5;
  double entry_step = 0.25;
};

inline constexpr int kSchemaVersion = 1;

struct RunConfig {
  int schema_version = kSchemaVersion;
  LatticeSpec lattice;
  MeasureSpec mu;
  MeasureSpec nu;
  OperatorSpec op;
  std::optional<int> r;  // band radius used by the checks; defaults to the operator's
  std::string suite = "verify";
  std::uint64_t seed = 0;
  std::size_t trials = 1;
  SearchSpec search;
  Tolerances tolerances;
};

/// Parses and validates a configuration given as JSON text.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const RunConfig& cfg, int indent = 2);

void set_tolerance(Tolerances& tol, const std::string& name, double value);

LatticePtr make_lattice(const LatticeSpec& spec);

/// Generators draw from spec.seed + base_seed + trial.
MeasureGrid make_measure(const LatticePtr& lattice, const MeasureSpec& spec, std::uint64_t base_seed,
                         std::size_t trial);
BandOperator make_operator(const LatticePtr& lattice, const OperatorSpec& spec, std::uint64_t base_seed,
                           std::size_t trial);

Instance make_instance(const RunConfig& cfg, std::size_t trial);

/// Config describing `inst` with explicit masses and entries; replaying it
/// rebuilds the same instance bit for bit.
RunConfig instance_config(const Instance& inst, const RunConfig& base);

}  // namespace dyadlab
