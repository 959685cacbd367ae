import numpy as np
import pytest

from cggm import io
from cggm.likelihood import Hyperparameters, ModelData
from cggm.sampler import Schedule, run_chain
from cggm.spline import build_basis, even_knots


def test_table_round_trip(tmp_path):
    A = np.random.default_rng(0).normal(size=(5, 3))
    io.write_table(tmp_path / "a.csv", ["a", "b", "c"], A)
    names, B = io.read_table(tmp_path / "a.csv")
    assert names == ["a", "b", "c"]
    assert np.array_equal(A, B)


def test_table_errors(tmp_path):
    (tmp_path / "bad.csv").write_text("a,b\n1,x\n")
    with pytest.raises(ValueError):
        io.read_table(tmp_path / "bad.csv")
    (tmp_path / "ragged.csv").write_text("a,b\n1,2,3\n")
    with pytest.raises(ValueError):
        io.read_table(tmp_path / "ragged.csv")
    (tmp_path / "empty.csv").write_text("a,b\n")
    with pytest.raises(ValueError):
        io.read_table(tmp_path / "empty.csv")


def test_edge_list_is_one_based(tmp_path):
    io.write_edge_list(tmp_path / "e.csv", [(0, 2), (1, 3)])
    assert (tmp_path / "e.csv").read_text().splitlines() == ["i,j", "1,3", "2,4"]
    a = io.read_graph_file(tmp_path / "e.csv", 4)
    assert a[0, 2] and a[2, 0] and a[1, 3] and a.sum() == 4
    io.write_matrix(tmp_path / "m.csv", a.astype(int), fmt="%d")
    assert np.array_equal(io.read_graph_file(tmp_path / "m.csv", 4), a)
    with pytest.raises(ValueError):
        io.read_edge_list(tmp_path / "e.csv", 3)


def test_trace_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    X = rng.uniform(-1, 1, size=(30, 2))
    Y = rng.normal(size=(30, 3)) + np.sin(2 * X[:, [0]])
    data = ModelData(Y, build_basis(X, even_knots(1)))
    tr = run_chain(data, Hyperparameters(g=30.0), Schedule(iterations=200, burn_in=20, thin=2, seed=3, save_sigma=True))
    io.write_trace(tmp_path / "c", tr, data.design)
    back = io.read_trace(tmp_path / "c")
    for name in ("iterations", "gamma", "edges", "log_posterior", "gamma_accepts", "graph_accepted",
                 "sigma_draws", "B_draws"):
        assert np.array_equal(getattr(tr, name), getattr(back, name)), name
    assert back.counts == tr.counts and back.seed == 3
    meta = io.read_meta(tmp_path / "c" / "meta")
    assert int(meta["k"]) == 1 and int(meta["records"]) == len(tr)


def test_chain_dirs(tmp_path):
    assert io.chain_dirs(tmp_path) == []
    for c in (2, 10, 1):
        d = tmp_path / f"chain_{c}"
        d.mkdir()
        (d / "gamma.csv").write_text("iteration\n")
    assert [d.name for d in io.chain_dirs(tmp_path)] == ["chain_1", "chain_2", "chain_10"]
