"""Causal effect estimators for a fixed adjustment set."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .ci_test import Dataset

log = logging.getLogger(__name__)

IRLS_TOL = 1e-8
IRLS_MAX_ITER = 100
SEPARATION_EPS = 1e-12
# score ranges this small are rounding noise, not information
DEGENERATE_TOL = 1e-12


class EstimationError(ValueError):
    pass


class EmptyArm(EstimationError):
    pass


class EmptyStratumArm(EstimationError):
    pass


class SeparationDetected(EstimationError):
    pass


class RankDeficient(EstimationError):
    pass


class Estimand(str, Enum):
    ATE = "ate"
    ATT = "att"


@dataclass(frozen=True)
class EffectEstimate:
    value: float
    estimand: Estimand
    adjustment_set: tuple[str, ...] = ()
    n_matched: int = 0
    # set when matching fell back to a difference of means
    degenerate_scores: bool = False
    notes: tuple[str, ...] = field(default=())


def _arms(data: Dataset, w: str) -> tuple[np.ndarray, np.ndarray]:
    t = data.column(w)
    if not np.all((t == 0) | (t == 1)):
        raise EstimationError(f"treatment {w!r} must be binary 0/1")
    treated = t == 1
    if treated.all() or not treated.any():
        raise EmptyArm(f"treatment {w!r} has an empty arm")
    return treated, ~treated


def difference_of_means(data: Dataset, w: str, y: str) -> EffectEstimate:
    treated, control = _arms(data, w)
    yy = data.column(y)
    value = float(yy[treated].mean() - yy[control].mean())
    return EffectEstimate(value, Estimand.ATE, (), data.n)


def stratified_adjustment(data: Dataset, w: str, y: str, z: Sequence[str] = ()) -> EffectEstimate:
    """Plug-in back-door adjustment over the observed strata of discrete ``z``.

    Sums ``(E[Y | W=1, z] - E[Y | W=0, z]) * P(z)`` over every observed
    stratum ``z``. Every stratum must contain treated and control rows.
    """
    z = tuple(z)
    treated, _ = _arms(data, w)
    yy = data.column(y)
    if not z:
        return difference_of_means(data, w, y)
    zz = np.column_stack([data.column(c) for c in z])
    strata, inverse = np.unique(zz, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    n = data.n
    total = 0.0
    for s in range(len(strata)):
        rows = inverse == s
        t = rows & treated
        c = rows & ~treated
        if not t.any() or not c.any():
            label = ", ".join(f"{name}={v:g}" for name, v in zip(z, strata[s]))
            raise EmptyStratumArm(f"stratum ({label}) lacks {'treated' if not t.any() else 'control'} rows")
        total += (yy[t].mean() - yy[c].mean()) * rows.sum() / n
    return EffectEstimate(float(total), Estimand.ATE, z, n)


def _sigmoid(u):
    return 0.5 * (1.0 + np.tanh(0.5 * u))


def fit_logistic(x: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Logistic regression coefficients by iteratively reweighted least squares.

    ``x`` is the design matrix (include an intercept column yourself).
    Stops when the largest coefficient change drops below ``IRLS_TOL`` or
    after ``IRLS_MAX_ITER`` iterations.
    """
    n, k = x.shape
    if np.linalg.matrix_rank(x) < k:
        raise RankDeficient(f"design matrix of rank < {k}")
    beta = np.zeros(k)
    converged = False
    for _ in range(IRLS_MAX_ITER):
        eta = x @ beta
        mu = _sigmoid(eta)
        wt = mu * (1.0 - mu)
        # working response: z = eta + (t - mu) / w
        zw = eta * wt + (t - mu)
        xtw = x.T * wt
        try:
            new = np.linalg.solve(xtw @ x, x.T @ zw)
        except np.linalg.LinAlgError:
            break
        step = np.max(np.abs(new - beta))
        beta = new
        if not np.all(np.isfinite(beta)):
            break
        if step < IRLS_TOL:
            converged = True
            break
    mu = _sigmoid(x @ beta) if np.all(np.isfinite(beta)) else np.full(n, np.nan)
    extreme = ~np.isfinite(mu) | (mu < SEPARATION_EPS) | (mu > 1 - SEPARATION_EPS)
    if not converged and extreme.any():
        raise SeparationDetected("fitted propensities reach 0 or 1 and coefficients diverge")
    if not converged:
        log.warning("IRLS stopped after %d iterations without converging", IRLS_MAX_ITER)
    return beta


def logistic_propensity(data: Dataset, w: str, z: Sequence[str]) -> np.ndarray:
    """Fitted P(W=1 | Z) per row from a logistic model with intercept."""
    z = tuple(z)
    if not z:
        raise ValueError("propensity model needs at least one covariate")
    _arms(data, w)
    x = np.column_stack([np.ones(data.n)] + [data.column(c) for c in z])
    beta = fit_logistic(x, data.column(w))
    return _sigmoid(x @ beta)


def nearest_rows(pool_scores: np.ndarray, query_scores: np.ndarray) -> np.ndarray:
    """For every query score, the position in ``pool_scores`` of its nearest neighbour.

    Ties on distance go to the lowest position.
    """
    order = np.lexsort((np.arange(len(pool_scores)), pool_scores))
    s = pool_scores[order]
    right = np.searchsorted(s, query_scores, side="left")
    left = right - 1
    right_c = np.minimum(right, len(s) - 1)
    left_c = np.maximum(left, 0)
    # first occurrence of each neighbouring value carries its lowest row
    lval = s[left_c]
    rval = s[right_c]
    lfirst = np.searchsorted(s, lval, side="left")
    rfirst = np.searchsorted(s, rval, side="left")
    dl = np.where(left >= 0, np.abs(query_scores - lval), np.inf)
    dr = np.where(right < len(s), np.abs(rval - query_scores), np.inf)
    lrow = order[lfirst]
    rrow = order[rfirst]
    pick_left = (dl < dr) | ((dl == dr) & (lrow < rrow))
    return np.where(pick_left, lrow, rrow)


def psm_effect(
    data: Dataset, w: str, y: str, z: Sequence[str] = (), estimand: Estimand | str = Estimand.ATE
) -> EffectEstimate:
    """Propensity-score matching: one nearest neighbour, with replacement, no caliper.

    ATT compares every treated row with its nearest control. ATE also
    matches every control to its nearest treated row and averages the
    unit-level differences over all rows. With no covariates, or when all
    scores coincide up to ``DEGENERATE_TOL``, the difference of means is
    returned.
    """
    estimand = Estimand(estimand.lower() if isinstance(estimand, str) else estimand)
    z = tuple(z)
    treated, control = _arms(data, w)
    yy = data.column(y)
    if not z:
        base = difference_of_means(data, w, y)
        if estimand is Estimand.ATT:
            return EffectEstimate(base.value, estimand, (), data.n)
        return base
    scores = logistic_propensity(data, w, z)
    if np.ptp(scores) <= DEGENERATE_TOL:
        base = difference_of_means(data, w, y)
        return EffectEstimate(base.value, estimand, z, data.n, True, ("all propensity scores equal",))
    t_idx = np.flatnonzero(treated)
    c_idx = np.flatnonzero(control)
    match_t = c_idx[nearest_rows(scores[c_idx], scores[t_idx])]
    diff_t = yy[t_idx] - yy[match_t]
    if estimand is Estimand.ATT:
        return EffectEstimate(float(diff_t.mean()), estimand, z, len(t_idx))
    match_c = t_idx[nearest_rows(scores[t_idx], scores[c_idx])]
    diff_c = yy[match_c] - yy[c_idx]
    value = (diff_t.sum() + diff_c.sum()) / data.n
    return EffectEstimate(float(value), estimand, z, data.n)
