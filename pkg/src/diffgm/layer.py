"""Blackbox differentiation of a combinatorial graph matching solver.

The forward pass solves once and stores the solution and the similarities.
The backward pass perturbs the node similarities along the incoming loss
gradient, ``sv_lam = sv + lam * dL/dv``, solves once more and returns

    d_sv = -(v - v_lam) / lam,      d_se = -(e - e_lam) / lam,

the exact gradient of a piecewise-linear interpolation ``L_lam`` of the loss.
Any callable mapping a :class:`MatchingInstance` to a :class:`SolverResult`
or an :class:`Assignment` can serve as the solver.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Assignment, ContractError, MatchingInstance, hamming_loss, hamming_loss_grad, score_linear
from .sinkhorn import SinkhornConfig, sinkhorn_matching

DEFAULT_LAMBDA = 80.0


@dataclass(frozen=True)
class Lambda:
    value: float = DEFAULT_LAMBDA

    def __post_init__(self):
        if not self.value > 0:
            raise ContractError("lambda must be > 0")


@dataclass(frozen=True, eq=False)
class LayerContext:
    """State saved by :func:`forward` for :func:`backward`."""

    instance: MatchingInstance
    saved_v: np.ndarray
    saved_e: np.ndarray
    result: object = None

    @property
    def saved_sv(self) -> np.ndarray:
        return self.instance.sv

    @property
    def saved_se(self) -> np.ndarray:
        return self.instance.se


def _solve(solver, instance: MatchingInstance):
    out = solver(instance)
    return (out, out) if isinstance(out, Assignment) else (out.assignment, out)


def run_solver(solver, instance: MatchingInstance) -> Assignment:
    return _solve(solver, instance)[0]


def _lam(lam) -> float:
    return lam.value if isinstance(lam, Lambda) else Lambda(float(lam)).value


def forward(instance: MatchingInstance, solver) -> tuple[Assignment, LayerContext]:
    a, raw = _solve(solver, instance)
    return a, LayerContext(instance, a.v.copy(), a.e.copy(), raw)


def backward(ctx: LayerContext, grad_v, lam, solver) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of ``L_lam`` with respect to ``sv`` and ``se`` (one solver call)."""
    lam = _lam(lam)
    grad_v = np.asarray(grad_v, dtype=float).ravel()
    if grad_v.shape != ctx.saved_sv.shape:
        raise ContractError("grad_v must have the node-vector length")
    perturbed = ctx.instance.with_similarities(sv=ctx.saved_sv + lam * grad_v)
    a_lam = run_solver(solver, perturbed)
    d_sv = -(ctx.saved_v.astype(float) - a_lam.v) / lam
    d_se = -(ctx.saved_e.astype(float) - a_lam.e) / lam
    return d_sv, d_se


def interpolated_loss(instance: MatchingInstance, v_gt, lam, solver, loss=hamming_loss,
                      loss_grad=hamming_loss_grad) -> float:
    """``L(v_lam) - (SL(v, e) - SL(v_lam, e_lam)) / lam`` on the unperturbed similarities."""
    lam = _lam(lam)
    a = run_solver(solver, instance)
    g = loss_grad(v_gt, a.v)
    a_lam = run_solver(solver, instance.with_similarities(sv=instance.sv + lam * g))
    bracket = score_linear(instance, a) - score_linear(instance, a_lam)
    return loss(v_gt, a_lam.v) - bracket / lam


class SinkhornPipeline:
    """Sinkhorn on node similarities followed by discretization; edges unused."""

    def __init__(self, config: SinkhornConfig = SinkhornConfig()):
        self.config = config

    def __call__(self, instance: MatchingInstance) -> Assignment:
        v = sinkhorn_matching(instance.sv_matrix(), self.config)
        return Assignment(v, np.zeros(instance.m1 * instance.m2, np.int8))


class CountingSolver:
    """Wraps a solver and counts its invocations."""

    def __init__(self, solver):
        self.solver = solver
        self.calls = 0

    def __call__(self, instance):
        self.calls += 1
        return self.solver(instance)
