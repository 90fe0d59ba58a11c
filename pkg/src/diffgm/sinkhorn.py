"""Sinkhorn normalization for the relaxed (continuous) node assignment problem."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .graph import ContractError
from .lap import lap_max


class NumericRangeError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SinkhornConfig:
    temperature: float = 0.1
    max_iters: int = 100
    convergence_tol: float = 1e-6

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError("temperature must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.convergence_tol > 0:
            raise ValueError("convergence_tol must be > 0")


def _pad(scores: np.ndarray) -> np.ndarray:
    # every real row gets a private dummy column and every real column a private
    # dummy row (score 0), so the real block ranges over all doubly
    # sub-stochastic matrices
    n, m = scores.shape
    L = np.zeros((n + m, n + m))
    L[:n, :m] = scores
    return L


def sinkhorn_padded(sv_matrix, config: SinkhornConfig = SinkhornConfig(), return_trace=False):
    """Doubly stochastic ``(n + m, n + m)`` matrix from ``exp(sv / T)`` padded with ones.

    Row and column normalizations alternate in the log domain until every row
    sum is within ``convergence_tol`` of one (columns are exact after each
    sweep) or ``max_iters`` sweeps ran.
    """
    S = np.asarray(sv_matrix, dtype=float)
    if S.ndim != 2 or not np.all(np.isfinite(S)):
        raise ContractError("sv_matrix must be a finite 2-D matrix")
    with np.errstate(over="ignore"):
        logK = _pad(S / config.temperature)
    if not np.all(np.isfinite(logK)):
        raise NumericRangeError("similarities overflow at this temperature")
    trace = [] if return_trace else None
    logP = logK
    for _ in range(config.max_iters):
        logP = logP - logsumexp(logP, axis=1, keepdims=True)
        if trace is not None:
            trace.append((1, logP))
        logP = logP - logsumexp(logP, axis=0, keepdims=True)
        if trace is not None:
            trace.append((0, logP))
        if np.max(np.abs(np.exp(logP).sum(axis=1) - 1.0)) < config.convergence_tol:
            break
    P = np.exp(logP)
    return (P, trace) if return_trace else P


def sinkhorn_solve(sv_matrix, config: SinkhornConfig = SinkhornConfig()) -> np.ndarray:
    """Soft ``(n, m)`` assignment with entries in ``[0, 1]``."""
    S = np.asarray(sv_matrix, dtype=float)
    n, m = S.shape
    return sinkhorn_padded(S, config)[:n, :m]


def sinkhorn_grad(sv_matrix, grad_soft, config: SinkhornConfig = SinkhornConfig()):
    """Soft assignment and the vector-Jacobian product ``d loss / d sv``.

    Backpropagates through every unrolled normalization: for
    ``y = x - logsumexp(x)`` along an axis, ``dx = dy - softmax(x) * sum(dy)``.
    """
    S = np.asarray(sv_matrix, dtype=float)
    n, m = S.shape
    P, trace = sinkhorn_padded(S, config, return_trace=True)
    G = np.zeros_like(P)
    G[:n, :m] = np.asarray(grad_soft, dtype=float) * P[:n, :m]  # through exp
    for axis, out in reversed(trace):
        G = G - np.exp(out) * G.sum(axis=axis, keepdims=True)
    return P[:n, :m], G[:n, :m] / config.temperature


def permutation_loss(soft, v_gt_matrix, eps: float = 1e-12):
    """Binary cross-entropy between a soft assignment and the ground truth.

    Summed over all pairs and divided by the number of ground-truth matches.
    Returns the loss and its gradient with respect to ``soft``.
    """
    S = np.clip(np.asarray(soft, dtype=float), eps, 1.0 - eps)
    Y = np.asarray(v_gt_matrix, dtype=float)
    norm = max(Y.sum(), 1.0)
    loss = -np.sum(Y * np.log(S) + (1 - Y) * np.log(1 - S)) / norm
    grad = (-Y / S + (1 - Y) / (1 - S)) / norm
    return float(loss), grad


def discretize(soft) -> np.ndarray:
    """Binary matching from a soft assignment.

    Entries are shifted by ``0.5 / max(n, m)`` so only pairs above that
    threshold can be matched, then the maximum-weight matching is taken.
    """
    S = np.asarray(soft, dtype=float)
    n, m = S.shape
    v, _ = lap_max(S - 0.5 / max(n, m))
    return v


def sinkhorn_matching(sv_matrix, config: SinkhornConfig = SinkhornConfig()) -> np.ndarray:
    return discretize(sinkhorn_solve(sv_matrix, config))


__all__ = ["SinkhornConfig", "NumericRangeError", "sinkhorn_solve", "sinkhorn_padded",
           "sinkhorn_grad", "permutation_loss", "discretize", "sinkhorn_matching"]
