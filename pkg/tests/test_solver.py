import itertools

import numpy as np
import pytest

from diffgm.generator import GeneratorConfig, generate_pair, inner_product_instance
from diffgm.graph import (
    Assignment, AttributedGraph, ContractError, MatchingInstance, induced_edges, score_linear,
)
from diffgm.lap import lap_max
from diffgm.solver import (
    MAX_EXPANDED, QualityLevel, TreeNode, branch, brute_force_gms, brute_force_gms_star,
    constraint_violations, coupled_bound, is_leaf, lower_bound, relative_gap, solve_gms,
    solve_gms_star, upper_bound,
)
from oracles import gms_optimum, partial_injections, random_instance

ALPHAS = [0.0, 0.5, 1.0, 1.5, 2.0]


def completion_value(instance, node, cols):
    for i, k in node.fixed_in:
        if cols[i] != k:
            return None
    if any(cols[i] == k for i, k in node.fixed_out):
        return None
    m1 = instance.m1
    s = sum(instance.sv[k * instance.n1 + i] for i, k in enumerate(cols) if k is not None)
    for b, (k, l) in enumerate(instance.g2.edges):
        for a, (i, j) in enumerate(instance.g1.edges):
            if cols[i] == k and cols[j] == l:
                s += max(instance.se[b * m1 + a], 0.0)
    return s


def best_completion(instance, node):
    vals = [completion_value(instance, node, c) for c in partial_injections(instance.n1, instance.n2)]
    vals = [x for x in vals if x is not None]
    return max(vals) if vals else None


def random_node(rng, instance, n_in=1, n_out=2):
    pairs = [(i, k) for i in range(instance.n1) for k in range(instance.n2)]
    rng.shuffle(pairs)
    fixed_in, rows, cols = set(), set(), set()
    for i, k in pairs:
        if len(fixed_in) < n_in and i not in rows and k not in cols:
            fixed_in.add((i, k))
            rows.add(i)
            cols.add(k)
    rest = [p for p in pairs if p not in fixed_in][:n_out]
    return TreeNode(frozenset(fixed_in), frozenset(rest))


def topology_conflict_instance():
    g = AttributedGraph(2, [[0, 1]])
    # node similarities favor the swap, the edge favors the identity
    return MatchingInstance(g, g, [0.0, 1.0, 1.0, 0.0], [3.0])


def all_feasible_pairs(instance):
    n1, n2, m = instance.n1, instance.n2, instance.m1 * instance.m2
    for v in itertools.product([0, 1], repeat=n1 * n2):
        for e in itertools.product([0, 1], repeat=m):
            a = Assignment(v, e)
            if not constraint_violations(instance, a):
                yield a


def test_single_vertex():
    g = AttributedGraph(1, [])
    r = solve_gms(MatchingInstance(g, g, [5.0], []), 0.0)
    assert np.array_equal(r.assignment.v, [1])
    assert r.lb == r.ub == 5.0 and r.gap == 0.0


def test_topology_conflict_lowers_score_below_relaxation():
    inst = topology_conflict_instance()
    exact = max(score_linear(inst, a) for a in all_feasible_pairs(inst))
    assert exact == 3.0
    assert solve_gms(inst, 0.0).score == exact
    assert solve_gms_star(inst).score == 5.0


def test_gms_star_examples():
    rng = np.random.default_rng(0)
    g1, g2 = AttributedGraph(3, []), AttributedGraph(2, [])
    sv = rng.uniform(-1, 1, 6)
    inst = MatchingInstance(g1, g2, sv, [])
    assert solve_gms_star(inst).score == pytest.approx(lap_max(inst.sv_matrix())[1])
    neg = random_instance(rng, 3, 0.8)
    neg = neg.with_similarities(sv=-np.abs(neg.sv) - 0.1, se=-np.abs(neg.se) - 0.1)
    r = solve_gms_star(neg)
    assert r.score == 0.0 and not r.assignment.v.any() and not r.assignment.e.any()


def test_gms_star_against_enumeration():
    rng = np.random.default_rng(1)
    for _ in range(50):
        inst = random_instance(rng, 3, 0.5, nmin=3)
        expected = max(score_linear(inst, a) for a in all_feasible_pairs_relaxed(inst))
        assert solve_gms_star(inst).score == pytest.approx(expected, abs=1e-9)
        assert brute_force_gms_star(inst) == pytest.approx(expected, abs=1e-9)


def all_feasible_pairs_relaxed(instance):
    Wv, We = instance.sv_matrix(), instance.se_matrix()
    for cv in partial_injections(*Wv.shape):
        for ce in partial_injections(*We.shape) if We.size else [()]:
            v = np.zeros(Wv.shape, np.int8)
            for i, c in enumerate(cv):
                if c is not None:
                    v[i, c] = 1
            e = np.zeros(We.shape, np.int8)
            for a, c in enumerate(ce):
                if c is not None:
                    e[a, c] = 1
            yield Assignment(v.reshape(-1, order="F"), e.reshape(-1, order="F"))


def test_exact_against_brute_force():
    rng = np.random.default_rng(2)
    for _ in range(100):
        inst = random_instance(rng, 4, 0.6, edge_scale=2.0)
        r = solve_gms(inst, 0.0)
        assert r.score == pytest.approx(gms_optimum(inst), abs=1e-9)
        assert r.score == pytest.approx(brute_force_gms(inst)[1], abs=1e-9)
        assert r.lb == pytest.approx(score_linear(inst, r.assignment), abs=1e-12)


def test_gap_guarantee_monotonicity_dominance_feasibility():
    rng = np.random.default_rng(3)
    for _ in range(60):
        inst = random_instance(rng, 4, 0.6, edge_scale=2.0)
        exact = solve_gms(inst, 0.0)
        star = solve_gms_star(inst)
        assert star.score >= exact.score - 1e-9
        assert not constraint_violations(inst, star.assignment, topology=False)
        for alpha in ALPHAS:
            r = solve_gms(inst, alpha)
            assert r.gap <= alpha + 1e-9
            assert r.lb <= r.ub + 1e-9
            if r.ub > 0:
                assert r.lb >= (1 - alpha) * r.ub - 1e-9
            assert exact.score >= r.score - 1e-9
            assert not constraint_violations(inst, r.assignment)


def test_bound_sandwich_along_the_search():
    rng = np.random.default_rng(4)
    for _ in range(40):
        inst = random_instance(rng, 4, 0.6, edge_scale=2.0)
        opt = gms_optimum(inst)
        trace = []
        solve_gms(inst, 0.0, trace=trace)
        for lb, ub in trace:
            assert lb <= opt + 1e-9 <= ub + 2e-9


def test_upper_bound_root_equals_relaxation():
    rng = np.random.default_rng(5)
    for _ in range(30):
        inst = random_instance(rng, 4, 0.5)
        assert upper_bound(inst, TreeNode()) == pytest.approx(solve_gms_star(inst).score, abs=1e-12)


def test_upper_bound_with_full_node_matching_fixed():
    rng = np.random.default_rng(6)
    for _ in range(30):
        inst = random_instance(rng, 4, 0.7, nmin=2)
        star = solve_gms_star(inst)
        V = star.assignment.v.reshape(inst.n1, inst.n2, order="F")
        fixed_in = {(int(i), int(k)) for i, k in zip(*np.nonzero(V))}
        fixed_out = {(i, k) for i in range(inst.n1) for k in range(inst.n2)} - fixed_in
        node = TreeNode(frozenset(fixed_in), frozenset(fixed_out))
        node_score = float(inst.sv @ star.assignment.v)
        # edge pairs whose tail and head pairs are both fixed in
        S = inst.se_matrix().copy()
        for a, (i, j) in enumerate(inst.g1.edges):
            for b, (k, l) in enumerate(inst.g2.edges):
                if (i, k) not in fixed_in or (j, l) not in fixed_in:
                    S[a, b] = -1.0
        edge_score = lap_max(S)[1] if S.size else 0.0
        assert upper_bound(inst, node) == pytest.approx(node_score + edge_score, abs=1e-9)


def test_bounds_bracket_best_completion():
    rng = np.random.default_rng(7)
    for _ in range(150):
        inst = random_instance(rng, 3, 0.7, edge_scale=2.0)
        node = random_node(rng, inst, int(rng.integers(0, 2)), int(rng.integers(0, 3)))
        best = best_completion(inst, node)
        a, lb = lower_bound(inst, node)
        assert not constraint_violations(inst, a)
        assert lb == pytest.approx(score_linear(inst, a), abs=1e-12)
        assert lb <= best + 1e-9
        assert upper_bound(inst, node) >= best - 1e-9
        assert coupled_bound(inst, node) >= best - 1e-9


def test_lower_bound_zero_noise_equals_ground_truth_score():
    s = generate_pair(GeneratorConfig(n_points=6, descriptor_dim=6, seed=1))
    inst = inner_product_instance(s)
    gt = Assignment(s.v_gt, induced_edges(inst, s.v_gt, positive_only=True))
    a, lb = lower_bound(inst, TreeNode())
    assert np.array_equal(a.v, s.v_gt)
    assert lb == pytest.approx(score_linear(inst, gt))


def test_lower_bound_all_negative():
    inst = random_instance(np.random.default_rng(8), 3, 0.5)
    inst = inst.with_similarities(sv=-np.abs(inst.sv) - 0.1)
    a, lb = lower_bound(inst, TreeNode())
    assert lb == 0.0 and not a.v.any()


def test_branch_on_one_by_one():
    g = AttributedGraph(1, [])
    inst = MatchingInstance(g, g, [2.0], [])
    kids = branch(TreeNode(), inst)
    assert [k.fixed_in for k in kids] == [frozenset({(0, 0)}), frozenset()]
    assert [k.fixed_out for k in kids] == [frozenset(), frozenset({(0, 0)})]
    assert all(is_leaf(inst, k) for k in kids)


def test_branch_partitions_completions():
    rng = np.random.default_rng(9)
    for _ in range(30):
        inst = random_instance(rng, 3, 0.5, nmin=2)
        node = random_node(rng, inst, int(rng.integers(0, 2)), 1)
        if is_leaf(inst, node):
            continue
        kids = branch(node, inst)
        maps = list(partial_injections(inst.n1, inst.n2))

        def members(nd):
            return {c for c in maps if completion_value(inst, nd, c) is not None}

        a, b = members(kids[0]), members(kids[1])
        assert a | b == members(node) and not a & b


def test_branch_chain_depth_bound():
    rng = np.random.default_rng(10)
    for _ in range(10):
        inst = random_instance(rng, 4, 0.5)
        node, depth = TreeNode(), 0
        while not is_leaf(inst, node):
            node = branch(node, inst)[int(rng.integers(0, 2))]
            depth += 1
        assert depth <= inst.n1 * inst.n2


def test_branch_rejects_leaf():
    g = AttributedGraph(1, [])
    inst = MatchingInstance(g, g, [1.0], [])
    with pytest.raises(ContractError):
        branch(TreeNode(frozenset({(0, 0)})), inst)


def test_tree_node_invariants():
    with pytest.raises(ContractError):
        TreeNode(frozenset({(0, 0)}), frozenset({(0, 0)}))
    with pytest.raises(ContractError):
        TreeNode(frozenset({(0, 0), (0, 1)}))


def test_quality_level_and_gap_definition():
    with pytest.raises(ContractError):
        QualityLevel(-0.1)
    assert relative_gap(0.0, 0.0) == 0.0
    assert relative_gap(2.0, 1.0) == 0.5
    assert relative_gap(1e-13, 0.0) == pytest.approx(1e-13 / 1e-12)


def test_node_cap_sets_exhausted_flag():
    rng = np.random.default_rng(11)
    for _ in range(100):
        inst = random_instance(rng, 4, 0.7, edge_scale=3.0, nmin=3)
        r = solve_gms(inst, 0.0, max_expanded=0)
        if not r.root_optimal:
            assert r.exhausted and r.gap > 0
            assert not constraint_violations(inst, r.assignment)
            return
    pytest.fail("no instance needed branching")


def test_default_cap():
    assert MAX_EXPANDED == 10 ** 6


def test_deterministic():
    inst = random_instance(np.random.default_rng(12), 4, 0.6, edge_scale=2.0)
    a, b = solve_gms(inst, 0.0), solve_gms(inst, 0.0)
    assert a.assignment == b.assignment and a.tree_nodes_expanded == b.tree_nodes_expanded
