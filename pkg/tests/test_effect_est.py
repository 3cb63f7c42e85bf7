import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causalquery import effect_est
from causalquery.ci_test import Dataset
from causalquery.criteria import satisfies_gbc
from causalquery.effect_est import (
    EmptyArm,
    EmptyStratumArm,
    Estimand,
    RankDeficient,
    SeparationDetected,
    difference_of_means,
    fit_logistic,
    logistic_propensity,
    nearest_rows,
    psm_effect,
    stratified_adjustment,
)
from causalquery.synth import SemSpec, bench10, generate

import oracles


def table(rows, cols=("Z", "W", "Y")):
    return Dataset(cols, np.array(rows, dtype=float), "W", "Y")


# -- difference of means --------------------------------------------------------------


def test_difference_of_means_examples():
    d = table([[0, 1, 3], [1, 0, 3], [0, 0, 3], [1, 1, 3]])
    assert difference_of_means(d, "W", "Y").value == 0.0
    w = np.array([0, 1, 1, 0, 1], dtype=float)
    d = Dataset(["W", "Y"], np.column_stack([w, w]), "W", "Y")
    assert difference_of_means(d, "W", "Y").value == 1.0


def test_difference_of_means_randomized():
    spec = SemSpec(["X", "W", "Y"], {("X", "Y"): 1.0, ("W", "Y"): 2.0}, "W", "Y")
    data, _, effect = generate(spec, 20000, 5)
    assert difference_of_means(data, "W", "Y").value == pytest.approx(effect, rel=0.05)


def test_empty_arm():
    with pytest.raises(EmptyArm):
        difference_of_means(table([[0, 1, 1], [1, 1, 2]]), "W", "Y")


# -- stratified adjustment ----------------------------------------------------------------


def test_stratified_hand_table():
    # Z=0: treated mean 3, control mean 1, weight 4/8
    # Z=1: treated mean (6+8)/2=7, control mean 4, weight 4/8
    rows = [
        [0, 1, 3], [0, 0, 1], [0, 0, 1], [0, 0, 1],
        [1, 1, 6], [1, 1, 8], [1, 0, 4], [1, 0, 4],
    ]
    d = table(rows)
    assert stratified_adjustment(d, "W", "Y", ["Z"]).value == pytest.approx(0.5 * 2 + 0.5 * 3, abs=1e-15)


def test_stratified_empty_z():
    d = table([[0, 1, 3], [1, 0, 1], [0, 0, 2], [1, 1, 5]])
    assert stratified_adjustment(d, "W", "Y", []).value == difference_of_means(d, "W", "Y").value


def test_stratified_independent_z():
    # Z balanced across arms and Y depending on W only: weights collapse
    rows = [[z, w, 2.0 * w + 1] for z in (0, 1, 2) for w in (0, 1) for _ in range(3)]
    d = table(rows)
    diff = stratified_adjustment(d, "W", "Y", ["Z"]).value - difference_of_means(d, "W", "Y").value
    assert abs(diff) <= 1e-12


def test_stratified_empty_stratum_arm():
    with pytest.raises(EmptyStratumArm, match="Z=1"):
        stratified_adjustment(table([[0, 1, 1], [0, 0, 2], [1, 1, 3]]), "W", "Y", ["Z"])


@st.composite
def discrete_tables(draw):
    n = draw(st.integers(8, 1000))
    seed = draw(st.integers(0, 2**32 - 1))
    levels = draw(st.integers(1, 3))
    rng = np.random.default_rng(seed)
    z1 = rng.integers(0, levels, n)
    z2 = rng.integers(0, 2, n)
    w = rng.integers(0, 2, n)
    # guarantee both arms in every stratum
    for a in range(levels):
        for b in range(2):
            idx = np.flatnonzero((z1 == a) & (z2 == b))
            if len(idx) < 2:
                extra = np.array([[a, b, 0], [a, b, 1]])
                z1 = np.append(z1, extra[:, 0])
                z2 = np.append(z2, extra[:, 1])
                w = np.append(w, extra[:, 2])
            else:
                w[idx[0]], w[idx[1]] = 0, 1
    y = rng.integers(-5, 6, len(w)) + 1.5 * w + z1
    return np.column_stack([z1, z2, w, y]).astype(float)


@settings(max_examples=60, deadline=None)
@given(discrete_tables())
def test_stratified_matches_bruteforce(values):
    cols = ("Z1", "Z2", "W", "Y")
    d = Dataset(cols, values, "W", "Y")
    rows = [dict(zip(cols, r)) for r in values.tolist()]
    for z in (["Z1"], ["Z2"], ["Z1", "Z2"]):
        assert stratified_adjustment(d, "W", "Y", z).value == pytest.approx(
            oracles.eq2_bruteforce(rows, "W", "Y", z), abs=1e-12
        )


# -- logistic propensity ------------------------------------------------------------------


def fifty_rows():
    rng = np.random.default_rng(20240601)
    x = rng.standard_normal((50, 2))
    t = (rng.random(50) < 1 / (1 + np.exp(-(0.3 + 1.2 * x[:, 0] - 0.8 * x[:, 1])))).astype(float)
    return x, t


def test_logistic_matches_newton_reference():
    x, t = fifty_rows()
    design = np.column_stack([np.ones(50), x])
    assert np.max(np.abs(fit_logistic(design, t) - oracles.newton_logistic(design, t))) < 1e-6
    d = Dataset(["A", "B", "W"], np.column_stack([x, t]), "W")
    ref = oracles.newton_logistic(design, t)
    assert np.allclose(logistic_propensity(d, "W", ["A", "B"]), 1 / (1 + np.exp(-design @ ref)), atol=1e-6)


def test_uninformative_covariate():
    # each arm sees the same multiset of z values
    z = np.concatenate([np.arange(10.0), np.arange(10.0), np.arange(10.0)])
    w = np.concatenate([np.zeros(10), np.ones(10), np.zeros(10)])
    d = Dataset(["Z", "W"], np.column_stack([z, w]), "W")
    assert np.allclose(logistic_propensity(d, "W", ["Z"]), w.mean(), atol=1e-9)


def test_scores_monotone_in_strong_confounder():
    rng = np.random.default_rng(2)
    z = rng.standard_normal(500)
    w = (rng.random(500) < 1 / (1 + np.exp(-2 * z))).astype(float)
    s = logistic_propensity(Dataset(["Z", "W"], np.column_stack([z, w]), "W"), "W", ["Z"])
    order = np.argsort(z)
    assert np.all(np.diff(s[order]) > 0)


def test_separation_detected():
    z = np.arange(10.0)
    w = (z >= 5).astype(float)
    with pytest.raises(SeparationDetected):
        logistic_propensity(Dataset(["Z", "W"], np.column_stack([z, w]), "W"), "W", ["Z"])


def test_rank_deficient():
    z = np.arange(10.0)
    w = np.array([0, 1] * 5, dtype=float)
    d = Dataset(["A", "B", "W"], np.column_stack([z, 2 * z, w]), "W")
    with pytest.raises(RankDeficient):
        logistic_propensity(d, "W", ["A", "B"])
    with pytest.raises(ValueError):
        logistic_propensity(d, "W", [])


# -- matching -----------------------------------------------------------------------------


def test_nearest_rows_ties_go_to_lowest_row():
    pool = np.array([0.5, 0.2, 0.8, 0.2, 0.5])
    assert nearest_rows(pool, np.array([0.2, 0.35, 0.5, 0.9, 0.0])).tolist() == [1, 1, 0, 2, 1]


def test_psm_no_confounding():
    spec = SemSpec(["X", "W", "Y"], {("X", "Y"): 1.0, ("W", "Y"): 2.0}, "W", "Y")
    data, _, _ = generate(spec, 20000, 1)
    base = difference_of_means(data, "W", "Y").value
    assert psm_effect(data, "W", "Y", ["X"]).value == pytest.approx(base, rel=0.05)


def test_psm_bench10_valid_versus_invalid_set():
    spec = bench10()
    data, truth, effect = generate(spec, 20000, 0)
    good, bad = ("X2", "X5"), ("X5",)
    assert satisfies_gbc(truth, "W", "Y", good)
    assert not satisfies_gbc(truth, "W", "Y", bad)
    est_good = psm_effect(data, "W", "Y", good).value
    est_bad = psm_effect(data, "W", "Y", bad).value
    assert est_good == pytest.approx(effect, rel=0.10)
    assert abs(est_bad - effect) > abs(est_good - effect)


def test_psm_row_permutation_invariance():
    data, _, _ = generate(bench10(), 3000, 4)
    perm = np.random.default_rng(0).permutation(data.n)
    shuffled = Dataset(data.columns, data.values[perm], data.treatment, data.outcome)
    for est in ("ate", "att"):
        a = psm_effect(data, "W", "Y", ["X2", "X5"], est).value
        b = psm_effect(shuffled, "W", "Y", ["X2", "X5"], est).value
        assert a == pytest.approx(b, abs=1e-9)


def test_att_duplicate_shift():
    rng = np.random.default_rng(3)
    x = rng.standard_normal(40)
    y = rng.integers(-10, 10, 40).astype(float)
    delta = 0.75
    # extra controls far out make X informative, so the scores are not flat
    far = 4.0 + rng.random(60)
    values = np.vstack([
        np.column_stack([x, np.ones(40), y + delta]),
        np.column_stack([x, np.zeros(40), y]),
        np.column_stack([far, np.zeros(60), rng.standard_normal(60)]),
    ])
    d = Dataset(["X", "W", "Y"], values, "W", "Y")
    est = psm_effect(d, "W", "Y", ["X"], Estimand.ATT)
    assert not est.degenerate_scores
    assert est.value == delta
    assert est.n_matched == 40


def test_att_duplicate_shift_symmetric_design():
    # with every row duplicated across arms the scores are flat
    x = np.linspace(-1, 1, 20)
    y = np.arange(20.0)
    values = np.vstack([np.column_stack([x, np.ones(20), y + 0.5]), np.column_stack([x, np.zeros(20), y])])
    est = psm_effect(Dataset(["X", "W", "Y"], values, "W", "Y"), "W", "Y", ["X"], "att")
    assert est.value == 0.5


def test_psm_empty_set_is_difference_of_means():
    d = table([[0, 1, 3], [1, 0, 1], [0, 0, 2], [1, 1, 5]])
    assert psm_effect(d, "W", "Y").value == difference_of_means(d, "W", "Y").value
    assert psm_effect(d, "W", "Y", estimand="ATT").estimand is Estimand.ATT


def test_psm_degenerate_scores(monkeypatch):
    d = table([[0, 1, 3], [1, 0, 1], [0, 0, 2], [1, 1, 5]])
    monkeypatch.setattr(effect_est, "logistic_propensity", lambda *a: np.full(4, 0.5))
    est = psm_effect(d, "W", "Y", ["Z"])
    assert est.degenerate_scores
    assert est.value == difference_of_means(d, "W", "Y").value
