"""Maximum-weight bipartite matching with optional non-assignment.

Every row and column may stay unmatched at zero cost, so the problem is

    max sum_ik w[i, k] x[i, k]   s.t.  row sums <= 1, column sums <= 1.

Reduction used here: any pair with non-positive weight can be dropped from a
matching without lowering its score, so the optimum equals the optimum of a
rectangular assignment on ``max(w, 0)`` with zero-weight pairs discarded. The
rectangular assignment itself is delegated to
:func:`scipy.optimize.linear_sum_assignment` (shortest augmenting paths).
"""

from __future__ import annotations

import itertools

import numpy as np
from scipy.optimize import linear_sum_assignment

from .graph import ContractError, vec

#: relative tolerance used to decide that two matching scores tie
TIE_TOL = 1e-9

BRUTEFORCE_MAX_SIDE = 6


def _check_weights(weights) -> np.ndarray:
    W = np.asarray(weights, dtype=float)
    if W.ndim != 2:
        raise ContractError("weights must be a 2-D matrix")
    if not np.all(np.isfinite(W)):
        raise ContractError("weights must be finite")
    return W


def _solve(W, allowed=None, forced=None):
    """Optimal matching matrix and score under a pair mask and forced pairs."""
    n, m = W.shape
    X = np.zeros((n, m), dtype=bool)
    score = 0.0
    rows = np.ones(n, dtype=bool)
    cols = np.ones(m, dtype=bool)
    if forced is not None and forced.any():
        fi, fk = np.nonzero(forced)
        X[fi, fk] = True
        score += float(W[fi, fk].sum())
        rows[fi] = False
        cols[fk] = False
    if not rows.any() or not cols.any():
        return X, score
    P = np.maximum(W, 0.0)
    if allowed is not None:
        P = np.where(allowed, P, 0.0)
    ri, ci = np.nonzero(rows)[0], np.nonzero(cols)[0]
    sub = P[np.ix_(ri, ci)]
    r, c = linear_sum_assignment(sub, maximize=True)
    keep = sub[r, c] > 0.0
    X[ri[r[keep]], ci[c[keep]]] = True
    score += float(W[ri[r[keep]], ci[c[keep]]].sum())
    return X, score


def lap_value(weights, allowed=None) -> float:
    """Optimal score only (no tie-breaking)."""
    return _solve(_check_weights(weights), allowed)[1]


def lap_max(weights, allowed=None, forced=None):
    """Maximum-weight partial matching.

    Parameters
    ----------
    weights : array-like, shape (n, m)
        Finite pair weights.
    allowed : array-like of bool, shape (n, m), optional
        Pairs outside the mask can never be matched.
    forced : array-like of bool, shape (n, m), optional
        Pairs that must be matched whatever their weight. Must form a
        matching.

    Returns
    -------
    v : ndarray of int8, shape (n * m,)
        Column-wise vectorized matching. Among all optimal matchings the
        lexicographically smallest vector is returned, so every matched pair
        that is not forced has strictly positive weight.
    score : float
    """
    W = _check_weights(weights)
    n, m = W.shape
    allowed = np.ones((n, m), bool) if allowed is None else np.array(allowed, dtype=bool)
    forced = np.zeros((n, m), bool) if forced is None else np.array(forced, dtype=bool)
    if np.any(forced.sum(axis=0) > 1) or np.any(forced.sum(axis=1) > 1):
        raise ContractError("forced pairs must form a matching")
    X, best = _solve(W, allowed, forced)
    tol = TIE_TOL * max(1.0, abs(best))
    # greedy lexicographic refinement: prefer v[idx] = 0 in column-wise order
    for k in range(m):
        for i in range(n):
            if not allowed[i, k] or forced[i, k]:
                continue
            if not X[i, k]:
                allowed[i, k] = False
                continue
            allowed[i, k] = False
            X2, s2 = _solve(W, allowed, forced)
            if s2 >= best - tol:
                X = X2
            else:
                allowed[i, k] = True
                forced[i, k] = True
    return vec(X.astype(np.int8)), float(W[X].sum())


def lap_bruteforce(weights):
    """Exhaustive maximum over all partial injective matchings (test oracle).

    Limited to ``n, m <= 6``. Ties keep the first maximizer in enumeration
    order.
    """
    W = _check_weights(weights)
    n, m = W.shape
    if n > BRUTEFORCE_MAX_SIDE or m > BRUTEFORCE_MAX_SIDE:
        raise ContractError(f"brute force limited to {BRUTEFORCE_MAX_SIDE}x{BRUTEFORCE_MAX_SIDE}")
    best_score, best_cols = 0.0, (None,) * n
    # each row picks a distinct column or None
    choices = list(range(m)) + [None]
    for cols in itertools.product(choices, repeat=n):
        used = [c for c in cols if c is not None]
        if len(used) != len(set(used)):
            continue
        s = sum(W[i, c] for i, c in enumerate(cols) if c is not None)
        if s > best_score:
            best_score, best_cols = s, cols
    X = np.zeros((n, m), dtype=np.int8)
    for i, c in enumerate(best_cols):
        if c is not None:
            X[i, c] = 1
    return vec(X), float(best_score)
