import json
import os
import pathlib

import numpy as np
import pytest

import dyadlab as dl

SOURCE = pathlib.Path(os.environ.get("DYADLAB_SOURCE_DIR", pathlib.Path(__file__).resolve().parents[2]))


@pytest.fixture
def lattice():
    return dl.Lattice(1, 0, -4, [(0, [0]), (0, [1])])


def test_cubes():
    q = dl.Cube(-1, [3])
    assert [c.coords for c in dl.children(q)] == [[6], [7]]
    assert dl.parent(dl.children(q)[1]) == q
    assert dl.tree_distance(dl.Cube(-3, [0]), dl.Cube(-3, [7])) == 6
    assert dl.tree_distance(dl.Cube(0, [-1]), dl.Cube(0, [0])) is None


def test_lattice_and_measure(lattice):
    assert lattice.num_leaves == 32
    assert lattice.num_cubes == 62
    mu = dl.lognormal_measure(lattice, 1.0, 3)
    assert mu.leaf_mass.shape == (32,)
    assert mu.mass(0) == pytest.approx(mu.leaf_mass[:16].sum())
    f = np.random.default_rng(0).normal(size=32)
    d = dl.martingale_difference(mu, f, 0)
    assert abs(np.dot(d[:16], mu.leaf_mass[:16])) < 1e-12


def test_operator_against_numpy(lattice):
    mu = dl.zero_blocks_measure(lattice, 0.25, 4)
    nu = dl.lognormal_measure(lattice, 0.5, 5)
    op = dl.induce(dl.random_band(lattice, 1, 6, root_blocks=True), mu, nu)
    a = op.leaf_matrix()
    keep = mu.leaf_mass > 0
    m = np.sqrt(nu.leaf_mass)[:, None] * a[:, keep] / np.sqrt(mu.leaf_mass[keep])[None, :]
    assert dl.operator_norm(op) == pytest.approx(np.linalg.svd(m, compute_uv=False)[0], rel=1e-10)
    assert dl.check_well_localized(op, 1)[0]
    assert dl.check_band(dl.random_band(lattice, 1, 6), 1)[0]


def test_paraproducts_and_carleson(lattice):
    mu = dl.lognormal_measure(lattice, 1.0, 7)
    op = dl.induce(dl.random_band(lattice, 1, 8), mu, mu)
    assert dl.verify_paraproduct_entries(op, 1, "mu")[0]
    assert dl.verify_paraproduct_entries(op, 1, "nu")[0]
    assert dl.remainder_off_band(op, 1)[0]
    a = dl.carleson_sequence(op, 1)
    c = dl.carleson_constant(a, mu)
    assert dl.embedding_constant(a, mu) <= 4 * c * (1 + 1e-9)
    seq, e = dl.greedy_carleson_sequence(dl.uniform_measure(dl.Lattice.unit(1, 0, -5)))
    assert 1.0 < e <= 4.0
    with pytest.raises(ValueError):
        dl.build_paraproduct(op, 1, "sideways")


def test_testing_and_decomposition(lattice):
    mu = dl.lognormal_measure(lattice, 1.0, 9)
    nu = dl.sparse_atoms_measure(lattice, 12, 10)
    op = dl.induce(dl.random_band(lattice, 2, 11, root_blocks=True), mu, nu)
    t = dl.testing_constants(op, 2)
    assert not t["unbounded"]
    assert np.sqrt(t["c_direct_global"]) <= t["norm"] + 1e-9
    assert t["c_diag"] <= t["norm"] + 1e-9
    rng = np.random.default_rng(1)
    d = dl.decomposition_identity(op, 2, rng.normal(size=32), rng.normal(size=32))
    assert d["relative_residual"] < 1e-11


def test_cli_round_trip(tmp_path):
    cfg = str(SOURCE / "configs" / "default.json")
    assert dl.run_cli(["--config", cfg, "--suite", "testing", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["pass"] is True
    assert (tmp_path / "testing.csv").exists()
    assert dl.run_cli(["replay", ""]) == 2
