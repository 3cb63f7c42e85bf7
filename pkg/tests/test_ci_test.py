import io
import math
from itertools import combinations

import numpy as np
import pytest

from causalquery.ci_test import (
    DataError,
    Dataset,
    FisherZTest,
    InsufficientSamples,
    OracleTest,
    SingularCorrelation,
    fisher_z,
    fisher_z_test,
    oracle_test,
    partial_correlation,
)
from causalquery.mixed_graph import build_graph
from causalquery.synth import bench10

import oracles


def normal_data(n, p, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset([f"C{i}" for i in range(p)], rng.standard_normal((n, p)))


def test_identical_columns_correlate_perfectly():
    x = np.random.default_rng(1).standard_normal(50)
    d = Dataset(["a", "b"], np.column_stack([x, x]))
    assert partial_correlation(d, "a", "b") == 1.0
    r = fisher_z_test(d, "a", "b")
    assert r.p_value == 0.0 and not r.independent


def test_independent_columns_small_correlation():
    hits = sum(abs(partial_correlation(normal_data(10000, 2, s), 0, 1)) < 0.05 for s in range(100))
    assert hits >= 95


def test_chain_partial_correlation():
    rng = np.random.default_rng(3)
    n = 20000
    x = rng.standard_normal(n)
    m = 0.9 * x + rng.standard_normal(n)
    y = -0.7 * m + rng.standard_normal(n)
    d = Dataset(["X", "M", "Y"], np.column_stack([x, m, y]))
    assert abs(partial_correlation(d, "X", "Y", ["M"])) < 0.03
    assert abs(partial_correlation(d, "X", "Y")) > 0.2
    ref = oracles.recursive_partial(d.correlation, 0, 2, [1])
    assert partial_correlation(d, "X", "Y", ["M"]) == pytest.approx(ref, abs=1e-12)


def test_partial_correlation_matches_recursion():
    rng = np.random.default_rng(11)
    mix = rng.standard_normal((6, 6))
    d = Dataset([f"C{i}" for i in range(6)], rng.standard_normal((400, 6)) @ mix)
    for i, j in combinations(range(6), 2):
        rest = [k for k in range(6) if k not in (i, j)]
        for size in range(4):
            for s in combinations(rest, size):
                ref = oracles.recursive_partial(d.correlation, i, j, list(s))
                assert partial_correlation(d, i, j, s) == pytest.approx(ref, abs=1e-10)


def test_fisher_z_reference():
    z, p = fisher_z(0.1, 1000, 2)
    rz, rp = oracles.fisher_reference(0.1, 1000, 2)
    assert abs(z - rz) < 1e-10
    assert abs(p - rp) < 1e-10


def test_fisher_z_extremes():
    z, p = fisher_z(0.0, 100, 0)
    assert z == 0.0 and p == 1.0
    assert fisher_z(0.999999, 100, 0)[1] < 1e-10
    assert fisher_z(1.0, 100, 0)[1] == 0.0


def test_fisher_z_zero_correlation_independent():
    # orthogonal centred columns give rho = 0 exactly
    a = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
    b = np.array([1.0, 1.0, -1.0, -1.0, 1.0, 1.0, -1.0, -1.0])
    r = fisher_z_test(Dataset(["a", "b"], np.column_stack([a, b])), "a", "b")
    assert r.p_value == 1.0 and r.independent


def test_symmetry_is_exact():
    d = normal_data(300, 5, 4)
    for i, j in combinations(range(5), 2):
        for s in ([], [k for k in range(5) if k not in (i, j)][:2]):
            assert fisher_z_test(d, i, j, s) == fisher_z_test(d, j, i, s)
            assert fisher_z_test(d, i, j, s) == fisher_z_test(d, i, j, s[::-1])


def test_rejection_rate_under_independence():
    alpha, trials = 0.05, 1000
    rejected = 0
    for t in range(trials):
        d = normal_data(200, 4, 10_000 + t)
        rejected += not fisher_z_test(d, 0, 1, [2, 3], alpha).independent
    se = math.sqrt(alpha * (1 - alpha) / trials)
    assert abs(rejected / trials - alpha) <= 2 * se


def test_decision_matches_p_value():
    d = normal_data(100, 3, 8)
    for alpha in (0.01, 0.2, 0.9):
        r = fisher_z_test(d, 0, 1, [2], alpha)
        assert r.independent is (r.p_value > alpha)
        assert r.conditioning_size == 1


def test_errors():
    d = normal_data(5, 4)
    with pytest.raises(InsufficientSamples):
        partial_correlation(d, 0, 1, [2, 3])
    with pytest.raises(DataError):
        partial_correlation(d, 0, 0)
    with pytest.raises(DataError):
        partial_correlation(d, 0, 1, [1])
    with pytest.raises(ValueError):
        fisher_z_test(d, 0, 1, alpha=1.5)
    x = np.random.default_rng(0).standard_normal(40)
    collinear = Dataset(["a", "b", "c"], np.column_stack([x, 2 * x, np.random.default_rng(1).standard_normal(40)]))
    with pytest.raises(SingularCorrelation):
        partial_correlation(collinear, "c", "a", ["b"])
    const = Dataset(["a", "b"], np.column_stack([np.ones(10), np.arange(10.0)]))
    with pytest.raises(SingularCorrelation):
        partial_correlation(const, "a", "b")


def test_cached_test_counts_distinct_queries():
    d = normal_data(100, 4)
    test = FisherZTest(d)
    test("C0", "C1", ["C2"])
    test("C1", "C0", ["C2"])
    test(1, 0, [2])
    assert test.calls == 1


# -- oracle -------------------------------------------------------------------------


def test_oracle_examples():
    g = build_graph(["A", "B", "C"], [("A", "C"), ("B", "C")])
    r = oracle_test(g, "A", "B")
    assert r.independent and r.p_value == 1.0
    assert not oracle_test(g, "A", "B", ["C"]).independent
    h = build_graph(["A", "B", "C"], [("A", "B", "<->"), ("C", "B")])
    for s in ([], ["C"]):
        r = oracle_test(h, "A", "B", s)
        assert not r.independent and r.p_value == 0.0


def test_oracle_bench10_matches_brute_force():
    g = bench10().truth_graph()
    marks, desc = oracles.edge_marks(g), oracles.descendants_map(g)
    test = OracleTest(g)
    for x, y in combinations(g.nodes, 2):
        paths = oracles.simple_paths(g, x, y)
        rest = [v for v in g.nodes if v not in (x, y)]
        for k in range(4):
            for s in combinations(rest, k):
                assert test(x, y, s).independent is oracles.m_separated(g, x, y, s, paths, marks, desc)


# -- dataset and CSV --------------------------------------------------------------------


def test_csv_round_trip(tmp_path):
    d = Dataset(["x", "w", "y"], [[0.5, 1, 2.25], [-1.0, 0, 3.0]], "w", "y")
    path = tmp_path / "d.csv"
    d.to_csv(path)
    back = Dataset.from_csv(path, "w", "y")
    assert back.columns == d.columns
    assert np.array_equal(back.values, d.values)
    assert back.pretreatment == ("x",)
    assert back.kind("w") == "binary" and back.kind("x") == "continuous"


@pytest.mark.parametrize("cell", ["", "NA", "nan"])
def test_csv_missing_value_diagnostics(cell):
    text = f"a,b\n1,2\n3,{cell}\n"
    with pytest.raises(DataError, match=r"row 3, column 'b'"):
        Dataset.read_csv(io.StringIO(text))


def test_csv_other_errors():
    with pytest.raises(DataError, match="non-numeric"):
        Dataset.read_csv(io.StringIO("a,b\n1,x\n"))
    with pytest.raises(DataError, match="cells"):
        Dataset.read_csv(io.StringIO("a,b\n1,2,3\n"))
    with pytest.raises(DataError, match="empty"):
        Dataset.read_csv(io.StringIO(""))


def test_dataset_invariants():
    with pytest.raises(DataError):
        Dataset(["a"], [[1.0]])
    with pytest.raises(DataError):
        Dataset(["a", "b"], [[0.5, 1.0]], treatment="a")
    with pytest.raises(DataError):
        Dataset(["a", "a"], [[1.0, 1.0]])
    with pytest.raises(DataError):
        Dataset(["a", "b"], [[1.0, 1.0]], treatment="a", outcome="a")
    with pytest.raises(DataError):
        Dataset(["a", "b"], [[1.0, 1.0]], treatment="a", pretreatment=["a"])
    d = Dataset(["a", "b"], [[1.0, 1.0]])
    with pytest.raises(ValueError):
        d.values[0, 0] = 5.0
