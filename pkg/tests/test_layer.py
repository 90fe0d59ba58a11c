import numpy as np
import pytest

from diffgm.graph import AttributedGraph, ContractError, MatchingInstance, hamming_loss, hamming_loss_grad
from diffgm.layer import (
    DEFAULT_LAMBDA, CountingSolver, Lambda, LayerContext, SinkhornPipeline, backward, forward,
    interpolated_loss, run_solver,
)
from diffgm.solver import solve_gms, solve_gms_star, solver_for
from oracles import random_instance

EXACT = solver_for("gms", 0.0)


def ground_truth(rng, n1, n2):
    perm = rng.permutation(max(n1, n2))[:n1]
    V = np.zeros((n1, n2), np.int8)
    for i, k in enumerate(perm):
        if k < n2:
            V[i, k] = 1
    return V.reshape(-1, order="F")


def test_lambda_must_be_positive():
    assert Lambda().value == DEFAULT_LAMBDA == 80.0
    with pytest.raises(ContractError):
        Lambda(0.0)
    with pytest.raises(ContractError):
        backward(None, [0.0], -1.0, EXACT)


def test_forward_single_vertex():
    g = AttributedGraph(1, [])
    a, ctx = forward(MatchingInstance(g, g, [5.0], []), EXACT)
    assert np.array_equal(a.v, [1]) and np.array_equal(ctx.saved_sv, [5.0])
    assert isinstance(ctx, LayerContext)


def test_forward_deterministic():
    inst = random_instance(np.random.default_rng(0), 4, 0.6)
    assert forward(inst, EXACT)[0] == forward(inst, EXACT)[0]


def test_forward_gms_star_differs_on_topology_conflict():
    g = AttributedGraph(2, [[0, 1]])
    inst = MatchingInstance(g, g, [0.0, 1.0, 1.0, 0.0], [3.0])
    assert not np.array_equal(forward(inst, solve_gms_star)[0].v, forward(inst, EXACT)[0].v)


def test_zero_gradient_is_exactly_zero():
    rng = np.random.default_rng(1)
    for _ in range(10):
        inst = random_instance(rng, 4, 0.6)
        _, ctx = forward(inst, EXACT)
        d_sv, d_se = backward(ctx, np.zeros(inst.n1 * inst.n2), 80.0, EXACT)
        assert not d_sv.any() and not d_se.any()


def test_backward_uses_one_solver_call():
    inst = random_instance(np.random.default_rng(2), 4, 0.6)
    a, ctx = forward(inst, EXACT)
    counter = CountingSolver(EXACT)
    backward(ctx, hamming_loss_grad(np.zeros_like(a.v), a.v), 80.0, counter)
    assert counter.calls == 1


def test_backward_formula_from_two_raw_calls():
    rng = np.random.default_rng(3)
    for _ in range(20):
        inst = random_instance(rng, 4, 0.6)
        v_gt = ground_truth(rng, inst.n1, inst.n2)
        a, ctx = forward(inst, EXACT)
        g = hamming_loss_grad(v_gt, a.v)
        lam = 5.0
        d_sv, d_se = backward(ctx, g, lam, EXACT)
        r0 = solve_gms(inst, 0.0).assignment
        r1 = solve_gms(inst.with_similarities(sv=inst.sv + lam * g), 0.0).assignment
        assert np.array_equal(d_sv, -(r0.v.astype(float) - r1.v) / lam)
        assert np.array_equal(d_se, -(r0.e.astype(float) - r1.e) / lam)


def test_large_lambda_flip_gives_minus_one_over_lambda():
    g = AttributedGraph(1, [])
    inst = MatchingInstance(g, g, [1.0], [])
    _, ctx = forward(inst, EXACT)
    lam = 10.0
    # pushing sv below zero unmatches the pair
    d_sv, _ = backward(ctx, [-1.0], lam, EXACT)
    assert d_sv[0] == -1.0 / lam


def test_interpolated_loss_reduces_to_loss_without_perturbation_effect():
    g = AttributedGraph(1, [])
    inst = MatchingInstance(g, g, [100.0], [])
    # v_gt = v_hat: gradient -1, but lambda * 1 cannot unmatch an sv of 100
    assert interpolated_loss(inst, [1], 1.0, EXACT) == hamming_loss([1], [1])


def test_interpolated_loss_bound():
    rng = np.random.default_rng(4)
    for _ in range(20):
        inst = random_instance(rng, 3, 0.6)
        v_gt = ground_truth(rng, inst.n1, inst.n2)
        lam = float(rng.choice([1.0, 10.0, 80.0]))
        a = run_solver(EXACT, inst)
        g = hamming_loss_grad(v_gt, a.v)
        a_lam = run_solver(EXACT, inst.with_similarities(sv=inst.sv + lam * g))
        bracket = (inst.sv @ a.v + inst.se @ a.e) - (inst.sv @ a_lam.v + inst.se @ a_lam.e)
        L = interpolated_loss(inst, v_gt, lam, EXACT)
        assert L <= hamming_loss(v_gt, a_lam.v) + abs(bracket) / lam + 1e-12
        assert bracket >= -1e-9  # the unperturbed solution is optimal


def test_interpolated_loss_large_lambda_limit():
    rng = np.random.default_rng(5)
    inst = random_instance(rng, 3, 0.6, nmin=2)
    v_gt = ground_truth(rng, inst.n1, inst.n2)
    a = run_solver(EXACT, inst)
    g = hamming_loss_grad(v_gt, a.v)
    gaps = []
    for lam in (10.0, 1e2, 1e3, 1e4):
        a_lam = run_solver(EXACT, inst.with_similarities(sv=inst.sv + lam * g))
        gaps.append(abs(interpolated_loss(inst, v_gt, lam, EXACT) - hamming_loss(v_gt, a_lam.v)))
    assert gaps[-1] <= gaps[0] + 1e-12 and gaps[-1] < 1e-2


def _fd_check(inst, v_gt, lam, rng, h=1e-3):
    """Compare d_sv with central differences of L_lam on probes with stable solutions."""
    a, ctx = forward(inst, EXACT)
    g = hamming_loss_grad(v_gt, a.v)
    d_sv, _ = backward(ctx, g, lam, EXACT)
    L = lambda sv: interpolated_loss(inst.with_similarities(sv=sv), v_gt, lam, EXACT)
    sol = lambda sv: (run_solver(EXACT, inst.with_similarities(sv=sv)),
                      run_solver(EXACT, inst.with_similarities(sv=sv + lam * g)))
    base = sol(inst.sv)
    used = 0
    for idx in range(inst.sv.size):
        e = np.zeros_like(inst.sv)
        e[idx] = h
        if sol(inst.sv + e) != base or sol(inst.sv - e) != base:
            continue  # probe crosses a breakpoint
        fd = (L(inst.sv + e) - L(inst.sv - e)) / (2 * h)
        assert abs(fd - d_sv[idx]) <= 1e-4
        used += 1
    return used


def test_gradient_matches_finite_differences_on_three_by_three():
    rng = np.random.default_rng(6)
    used = 0
    for _ in range(10):
        g1 = AttributedGraph(3, [[0, 1], [1, 2], [2, 0]])
        g2 = AttributedGraph(3, [[0, 1], [1, 2], [2, 0]])
        inst = MatchingInstance(g1, g2, rng.uniform(-1, 1, 9), rng.uniform(-1, 1, 9))
        used += _fd_check(inst, ground_truth(rng, 3, 3), 80.0, rng)
    assert used > 50


def test_piecewise_linear_along_a_direction():
    rng = np.random.default_rng(7)
    inst = random_instance(rng, 3, 0.6, nmin=3)
    v_gt = ground_truth(rng, inst.n1, inst.n2)
    lam = 2.0
    d = rng.standard_normal(inst.sv.size)
    checked = 0
    for t in np.linspace(-1, 1, 21):
        x = inst.with_similarities(sv=inst.sv + t * d)
        a, ctx = forward(x, EXACT)
        g = hamming_loss_grad(v_gt, a.v)
        d_sv, _ = backward(ctx, g, lam, EXACT)
        h = 1e-6
        L = lambda s: interpolated_loss(x.with_similarities(sv=s), v_gt, lam, EXACT)
        sols = [(run_solver(EXACT, x.with_similarities(sv=x.sv + s * h * d)),
                 run_solver(EXACT, x.with_similarities(sv=x.sv + s * h * d + lam * g))) for s in (-1, 1)]
        if sols[0] != sols[1]:
            continue
        slope = (L(x.sv + h * d) - L(x.sv - h * d)) / (2 * h)
        assert abs(slope - d_sv @ d) <= 1e-6
        checked += 1
    assert checked >= 15


def test_sinkhorn_pipeline_returns_node_only_assignment():
    inst = random_instance(np.random.default_rng(8), 4, 0.6)
    a = SinkhornPipeline()(inst)
    assert a.v.size == inst.n1 * inst.n2 and not a.e.any()
