#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dyadlab/analysis.hpp"
#include "dyadlab/cli.hpp"
#include "dyadlab/generators.hpp"
#include "dyadlab/paraproduct.hpp"

namespace py = pybind11;
using namespace dyadlab;

namespace {

// Lattices are immutable and shared; Python sees a thin handle.
struct PyLattice {
  LatticePtr ptr;
};

Cube cube_from(py::handle h) {
  if (py::isinstance<Cube>(h)) return h.cast<Cube>();
  auto t = h.cast<py::tuple>();
  return Cube{t[0].cast<int>(), t[1].cast<std::vector<std::int64_t>>()};
}

py::dict testing_dict(const TestingReport& t) {
  py::dict d;
  d["norm"] = t.norm;
  d["c_direct_global"] = t.c_direct_global;
  d["c_adjoint_global"] = t.c_adjoint_global;
  d["c_direct_local"] = t.c_direct_local;
  d["c_adjoint_local"] = t.c_adjoint_local;
  d["c_adjoint_local_nu"] = t.c_adjoint_local_nu;
  d["c_diag"] = t.c_diag;
  d["c_diag_unweighted"] = t.c_diag_unweighted;
  d["rho"] = t.rho;
  d["unbounded"] = static_cast<bool>(t.unbounded);
  return d;
}

}  // namespace

PYBIND11_MODULE(_dyadlab, m) {
  m.doc() = "Finite dyadic models of two-weight estimates for well-localized operators";

  py::class_<Cube>(m, "Cube")
      .def(py::init([](int level, std::vector<std::int64_t> coords) { return Cube{level, std::move(coords)}; }),
           py::arg("level"), py::arg("coords"))
      .def_readonly("level", &Cube::level)
      .def_readonly("coords", &Cube::coords)
      .def("__eq__", [](const Cube& a, const Cube& b) { return a == b; })
      .def("__hash__", [](const Cube& q) { return py::hash(py::make_tuple(q.level, py::tuple(py::cast(q.coords)))); })
      .def("__repr__", [](const Cube& q) { return "Cube(" + to_string(q) + ")"; });
  m.def("children", &children);
  m.def("parent", &parent);
  m.def("ancestor", &ancestor, py::arg("q"), py::arg("k"));
  m.def("tree_distance", &tree_distance, "None when the cubes have no common ancestor");

  py::class_<PyLattice>(m, "Lattice")
      .def(py::init([](int dim, int top, int leaf, py::list roots) {
             std::vector<Cube> rs;
             for (auto r : roots) rs.push_back(cube_from(r));
             return PyLattice{build_lattice(dim, top, leaf, std::move(rs))};
           }),
           py::arg("dim"), py::arg("top_level"), py::arg("leaf_level"), py::arg("roots"))
      .def_static("unit", [](int dim, int top, int leaf) { return PyLattice{unit_lattice(dim, top, leaf)}; },
                  py::arg("dim"), py::arg("top_level"), py::arg("leaf_level"))
      .def_property_readonly("dim", [](const PyLattice& l) { return l.ptr->dim(); })
      .def_property_readonly("depth", [](const PyLattice& l) { return l.ptr->depth(); })
      .def_property_readonly("num_cubes", [](const PyLattice& l) { return l.ptr->num_cubes(); })
      .def_property_readonly("num_leaves", [](const PyLattice& l) { return l.ptr->num_leaves(); })
      .def_property_readonly("num_interior", [](const PyLattice& l) { return l.ptr->num_interior(); })
      .def("cube", [](const PyLattice& l, CubeId id) { return l.ptr->cube(id); })
      .def("find", [](const PyLattice& l, const Cube& q) { return l.ptr->find(q); })
      .def("depth_of", [](const PyLattice& l, CubeId id) { return l.ptr->depth_of(id); })
      .def("leaves", [](const PyLattice& l, CubeId id) {
        const LeafRange r = l.ptr->leaves(id);
        return py::make_tuple(r.begin, r.end);
      });

  py::class_<MeasureGrid>(m, "MeasureGrid")
      .def(py::init([](const PyLattice& l, Eigen::VectorXd mass) { return MeasureGrid(l.ptr, std::move(mass)); }),
           py::arg("lattice"), py::arg("leaf_mass"))
      .def_property_readonly("leaf_mass", &MeasureGrid::leaf_mass)
      .def_property_readonly("lattice", [](const MeasureGrid& g) { return PyLattice{g.lattice_ptr()}; })
      .def("mass", [](const MeasureGrid& g, CubeId id) { return g.mass(id); })
      .def("mass_of", [](const MeasureGrid& g, const Cube& q) { return g.mass(q); })
      .def("total", &MeasureGrid::total);

  m.def("uniform_measure", [](const PyLattice& l, double mass) { return uniform_measure(l.ptr, mass); },
        py::arg("lattice"), py::arg("mass_per_leaf") = 1.0);
  m.def("lebesgue_measure", [](const PyLattice& l) { return lebesgue_measure(l.ptr); });
  m.def("lognormal_measure",
        [](const PyLattice& l, double sigma, std::uint64_t seed) { return lognormal_measure(l.ptr, sigma, seed); },
        py::arg("lattice"), py::arg("sigma"), py::arg("seed"));
  m.def("sparse_atoms_measure",
        [](const PyLattice& l, std::size_t count, std::uint64_t seed) { return sparse_atoms_measure(l.ptr, count, seed); },
        py::arg("lattice"), py::arg("count"), py::arg("seed"));
  m.def("zero_blocks_measure",
        [](const PyLattice& l, double fraction, std::uint64_t seed, double sigma) {
          return zero_blocks_measure(l.ptr, fraction, seed, sigma);
        },
        py::arg("lattice"), py::arg("fraction"), py::arg("seed"), py::arg("sigma") = 1.0);
  m.def("average", [](const MeasureGrid& mu, Eigen::VectorXd f, CubeId q) {
    return average(mu, GridFunction(mu.lattice_ptr(), std::move(f)), q);
  });
  m.def("martingale_difference", [](const MeasureGrid& mu, Eigen::VectorXd f, CubeId q) {
    return martingale_difference(mu, GridFunction(mu.lattice_ptr(), std::move(f)), q).values;
  });

  py::class_<BandOperator>(m, "BandOperator")
      .def_property_readonly("radius", &BandOperator::radius)
      .def_property_readonly("coefficients", &BandOperator::coefficients)
      .def_property_readonly("truncated_terms", &BandOperator::truncated_terms);
  m.def("haar_multiplier", [](const PyLattice& l, double alpha) { return haar_multiplier(l.ptr, alpha); });
  m.def("haar_multiplier",
        [](const PyLattice& l, std::vector<double> alpha) { return haar_multiplier(l.ptr, MultiplierSpec{std::move(alpha)}); });
  m.def("haar_shift", [](const PyLattice& l) { return haar_shift(l.ptr); });
  m.def("identity_band", [](const PyLattice& l) { return identity_band(l.ptr); });
  m.def("random_band",
        [](const PyLattice& l, int r, std::uint64_t seed, double amplitude, bool root_blocks) {
          return random_band(l.ptr, r, seed, amplitude, root_blocks);
        },
        py::arg("lattice"), py::arg("r"), py::arg("seed"), py::arg("amplitude") = 1.0, py::arg("root_blocks") = false);
  m.def("check_band", [](const BandOperator& op, int r) {
    const BandCheck c = check_band(op, r);
    return py::make_tuple(c.pass, c.max_violation);
  });

  py::class_<InducedOperator>(m, "InducedOperator")
      .def_property_readonly("mu", &InducedOperator::mu)
      .def_property_readonly("nu", &InducedOperator::nu)
      .def_property_readonly("radius", &InducedOperator::radius)
      .def("kernel", &InducedOperator::kernel)
      .def("leaf_matrix", &InducedOperator::leaf_matrix)
      .def("apply", &InducedOperator::apply)
      .def("apply_adjoint", &InducedOperator::apply_adjoint)
      .def("adjoint", &InducedOperator::adjoint);
  m.def("induce", &induce, py::arg("op"), py::arg("mu"), py::arg("nu"));
  m.def("bilinear", &bilinear, "<T_mu chi_Q, chi_R>_nu for cube ids Q, R");
  m.def("check_well_localized", [](const InducedOperator& op, int r) {
    const LocalizationReport rep = check_well_localized(op, r);
    return py::make_tuple(rep.pass, rep.max_violation);
  });

  m.def("build_paraproduct",
        [](const InducedOperator& op, int r, const std::string& side) {
          if (side != "mu" && side != "nu") throw py::value_error("side must be 'mu' or 'nu'");
          return build_paraproduct(op, r, side == "mu" ? ParaproductSide::Mu : ParaproductSide::Nu).matrix;
        },
        py::arg("op"), py::arg("r"), py::arg("side") = "mu");
  m.def("verify_paraproduct_entries", [](const InducedOperator& op, int r, const std::string& side) {
    const Paraproduct pi = build_paraproduct(op, r, side == "nu" ? ParaproductSide::Nu : ParaproductSide::Mu);
    const ParaproductEntryReport rep = verify_paraproduct_entries(pi, op, r);
    return py::make_tuple(rep.pass, rep.case1_max, rep.case2_max, rep.case3_max);
  }, py::arg("op"), py::arg("r"), py::arg("side") = "mu");
  m.def("remainder_off_band", [](const InducedOperator& op, int r) {
    const RemainderReport rep = remainder_diagonals(op, build_paraproduct(op, r, ParaproductSide::Mu),
                                                    build_paraproduct(op, r, ParaproductSide::Nu));
    return py::make_tuple(rep.pass, rep.off_band_max);
  });
  m.def("carleson_sequence", [](const InducedOperator& op, int r) { return carleson_sequence(op, r).values; });
  m.def("carleson_constant", [](std::vector<double> a, const MeasureGrid& mu) {
    return carleson_constant(CarlesonSequence{mu.lattice_ptr(), std::move(a)}, mu);
  });
  m.def("embedding_constant", [](std::vector<double> a, const MeasureGrid& mu) {
    return embedding_constant(CarlesonSequence{mu.lattice_ptr(), std::move(a)}, mu);
  });
  m.def("greedy_carleson_sequence", [](const MeasureGrid& mu) {
    const GreedyCarlesonResult g = greedy_carleson_sequence(mu);
    return py::make_tuple(g.sequence.values, g.embedding);
  });

  m.def("operator_norm", [](const InducedOperator& op) { return operator_norm(op); });
  m.def("testing_constants", [](const InducedOperator& op, int r) { return testing_dict(testing_constants(op, r)); });
  m.def("decomposition_identity",
        [](const InducedOperator& op, int r, const Eigen::VectorXd& f, const Eigen::VectorXd& g) {
          const DecompositionTerms t = decomposition_identity(op, r, f, g);
          py::dict d;
          d["total"] = t.total;
          d["paraproduct_mu"] = t.paraproduct_mu;
          d["paraproduct_nu"] = t.paraproduct_nu;
          d["comparable"] = t.comparable;
          d["average_average"] = t.average_average;
          d["average_difference"] = t.average_difference;
          d["difference_average"] = t.difference_average;
          d["residual"] = t.residual;
          d["relative_residual"] = t.relative_residual;
          return d;
        });

  m.def("run_cli", [](std::vector<std::string> args) {
    args.insert(args.begin(), "dyadlab");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    py::gil_scoped_release release;
    return run_cli(static_cast<int>(argv.size()), argv.data());
  }, "Runs the command line interface with the given arguments and returns the exit code");
}
