"""Graph matching as a mixed-integer linear program, solved by branch-and-bound.

The matching program maximizes ``sv . v + se . e`` under one-to-one node constraints,
one-to-one edge constraints and the topological constraints tying an edge
pair to the matching of both its tail pair and its head pair. Dropping the
topological constraints splits the problem into two independent linear
assignment problems (the topology-relaxed model). The search tree bounds
each node by the smaller of that relaxation and a node-coupled decomposition
bound.
"""

from __future__ import annotations

import heapq
import itertools
import weakref
from dataclasses import dataclass, field

import numpy as np

from . import lap
from .graph import (
    Assignment, ContractError, MatchingInstance, induced_edges, node_constraints_ok,
    score_linear, unvec, vec,
)

#: denominator floor of the relative gap
GAP_EPS = 1e-12
#: relative slack under which ``ub`` and ``lb`` are treated as equal
GAP_TOL = 1e-10
MAX_EXPANDED = 10 ** 6


@dataclass(frozen=True)
class QualityLevel:
    """Stopping threshold on the relative gap; 0 means solve to optimality."""

    alpha: float = 0.0

    def __post_init__(self):
        if not (self.alpha >= 0.0):
            raise ContractError("alpha must be >= 0")


@dataclass
class SolverResult:
    assignment: Assignment
    lb: float
    ub: float
    gap: float
    tree_nodes_expanded: int = 0
    root_optimal: bool = True
    exhausted: bool = False

    @property
    def score(self) -> float:
        return self.lb


@dataclass(eq=False)
class TreeNode:
    """A partial matching: pairs forced in and pairs forced out."""

    fixed_in: frozenset = frozenset()
    fixed_out: frozenset = frozenset()
    ub: float = float("inf")
    relaxed_v: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.fixed_in & self.fixed_out:
            raise ContractError("a pair cannot be fixed both in and out")
        rows = [i for i, _ in self.fixed_in]
        cols = [k for _, k in self.fixed_in]
        if len(set(rows)) != len(rows) or len(set(cols)) != len(cols):
            raise ContractError("fixed_in is not a matching")


def relative_gap(ub: float, lb: float) -> float:
    if ub == lb:
        return 0.0
    return abs(ub - lb) / max(abs(ub), GAP_EPS)


def _masks(instance: MatchingInstance, node: TreeNode):
    """(possible, forced, free) boolean ``(n1, n2)`` masks of a tree node."""
    n1, n2 = instance.n1, instance.n2
    forced = np.zeros((n1, n2), dtype=bool)
    for i, k in node.fixed_in:
        forced[i, k] = True
    out = np.zeros((n1, n2), dtype=bool)
    for i, k in node.fixed_out:
        out[i, k] = True
    row_taken = forced.any(axis=1)
    col_taken = forced.any(axis=0)
    free = ~out & ~row_taken[:, None] & ~col_taken[None, :]
    possible = free | forced
    return possible, forced, free


def _edge_mask(instance: MatchingInstance, possible: np.ndarray) -> np.ndarray:
    E1, E2 = instance.g1.edges, instance.g2.edges
    if len(E1) == 0 or len(E2) == 0:
        return np.zeros((len(E1), len(E2)), dtype=bool)
    return (possible[np.ix_(E1[:, 0], E2[:, 0])]
            & possible[np.ix_(E1[:, 1], E2[:, 1])])


def _relaxation(instance: MatchingInstance, node: TreeNode, coupled: bool = False):
    possible, forced, free = _masks(instance, node)
    edge_allowed = _edge_mask(instance, possible)
    X, node_score = lap._solve(instance.sv_matrix(), free, forced)
    bound = node_score + lap._solve(instance.se_matrix(), edge_allowed)[1]
    if coupled:
        bound = min(bound, _coupled_bound(instance, free, forced, edge_allowed))
    return bound, vec(X.astype(np.int8))


class _ArcGroups:
    """Per-instance incidence data for the coupled bound (arcs grouped by endpoint)."""

    def __init__(self, instance: MatchingInstance):
        E1, E2 = instance.g1.edges, instance.g2.edges
        self.sides = []
        for end in (0, 1):
            o1, s1, k1 = _groups(E1[:, end])
            o2, s2, k2 = _groups(E2[:, end])
            T1 = np.zeros((instance.n1, len(E1)))
            T1[E1[:, end], np.arange(len(E1))] = 1.0
            T2 = np.zeros((instance.n2, len(E2)))
            T2[E2[:, end], np.arange(len(E2))] = 1.0
            self.sides.append((o1, s1, k1, o2, s2, k2, T1, T2))


def _groups(keys):
    order = np.argsort(keys, kind="stable")
    sk = keys[order]
    starts = np.flatnonzero(np.r_[True, sk[1:] != sk[:-1]]) if len(sk) else np.zeros(0, int)
    return order, starts, sk[starts]


_ARC_GROUPS: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _arc_groups(instance) -> _ArcGroups:
    g = _ARC_GROUPS.get(instance)
    if g is None:
        g = _ARC_GROUPS[instance] = _ArcGroups(instance)
    return g


def _coupled_bound(instance, free, forced, edge_allowed) -> float:
    n1, n2 = instance.n1, instance.n2
    W = instance.sv_matrix().copy()
    if instance.m1 and instance.m2:
        S = np.maximum(instance.se_matrix(), 0.0) * edge_allowed
        for o1, s1, k1, o2, s2, k2, T1, T2 in _arc_groups(instance).sides:
            # row-side: each arc of g1 takes its best arc of g2 sharing endpoint k
            best = np.zeros((instance.m1, n2))
            best[:, k2] = np.maximum.reduceat(S[:, o2], s2, axis=1)
            by_rows = T1 @ best
            # column-side: the same with the graphs' roles swapped
            best = np.zeros((n1, instance.m2))
            best[k1, :] = np.maximum.reduceat(S[o1, :], s1, axis=0)
            by_cols = best @ T2.T
            W += 0.5 * np.minimum(by_rows, by_cols)
    return lap._solve(W, free, forced)[1]


def coupled_bound(instance: MatchingInstance, node: TreeNode) -> float:
    """Node-coupled decomposition bound.

    Every matched edge pair is shared between its tail pair and its head pair,
    so half of its similarity is charged to each. For a node pair ``(i, k)``
    the arcs at ``i`` can collect at most, summed per arc, the best positive
    similarity among arcs at ``k`` with the same orientation (or the converse
    sum, whichever is smaller). An assignment over these inflated node weights
    bounds every completion of ``node`` from above.
    """
    possible, forced, free = _masks(instance, node)
    return _coupled_bound(instance, free, forced, _edge_mask(instance, possible))


def upper_bound(instance: MatchingInstance, node: TreeNode) -> float:
    """Topology-relaxed optimum restricted to the completions of ``node``.

    Fixed-in pairs are removed from the node assignment and added to the
    score; fixed-out pairs, and pairs clashing with a fixed-in pair, are masked
    as unassignable. An edge pair stays assignable only when both its tail
    pair and its head pair are.
    """
    return _relaxation(instance, node)[0]


def lower_bound(instance: MatchingInstance, node: TreeNode) -> tuple[Assignment, float]:
    """Feasible completion: restricted node assignment plus its best induced edges."""
    _, forced, free = _masks(instance, node)
    v, _ = lap.lap_max(instance.sv_matrix(), allowed=free | forced, forced=forced)
    e = induced_edges(instance, v, positive_only=True)
    a = Assignment(v, e)
    return a, score_linear(instance, a)


def _completion(instance, v):
    # the node relaxation's own assignment is already the restricted node LAP
    a = Assignment(v, induced_edges(instance, v, positive_only=True))
    return a, score_linear(instance, a)


def branch(node: TreeNode, instance: MatchingInstance, incumbent_v=None) -> list[TreeNode]:
    """Split ``node`` on one free pair into a fixed-in and a fixed-out child.

    The pair is the free pair of largest ``|sv|`` among those where the node's
    relaxed node assignment disagrees with ``incumbent_v``; without
    disagreement, the free pair of largest ``|sv|``. Ties go to the lowest
    column-wise index.
    """
    _, _, free = _masks(instance, node)
    if not free.any():
        raise ContractError("node is fully fixed")
    free_v = vec(free)
    candidates = free_v
    if incumbent_v is not None and node.relaxed_v is not None:
        disagree = free_v & (np.asarray(node.relaxed_v) != np.asarray(incumbent_v))
        if disagree.any():
            candidates = disagree
    weight = np.where(candidates, np.abs(instance.sv), -np.inf)
    idx = int(np.argmax(weight))
    pair = (idx % instance.n1, idx // instance.n1)
    return [
        TreeNode(node.fixed_in | {pair}, node.fixed_out),
        TreeNode(node.fixed_in, node.fixed_out | {pair}),
    ]


def is_leaf(instance: MatchingInstance, node: TreeNode) -> bool:
    return not _masks(instance, node)[2].any()


def solve_gms(instance: MatchingInstance, quality: QualityLevel | float = 0.0,
              max_expanded: int = MAX_EXPANDED, trace=None) -> SolverResult:
    """Best-first branch-and-bound stopped once the relative gap is <= alpha.

    Parameters
    ----------
    instance : MatchingInstance
    quality : QualityLevel or float
        ``alpha``; 0 returns a proven optimum.
    max_expanded : int
        Safeguard on expanded tree nodes. When hit, the incumbent is returned
        with ``exhausted=True``.
    trace : list, optional
        If given, ``(lb, ub)`` is appended after every bound update.
    """
    if not isinstance(quality, QualityLevel):
        quality = QualityLevel(float(quality))
    alpha = quality.alpha

    def done(ub, lb):
        g = relative_gap(ub, lb)
        return g <= alpha or g <= GAP_TOL

    root = TreeNode()
    root.ub, root.relaxed_v = _relaxation(instance, root, coupled=True)
    incumbent, lb = _completion(instance, root.relaxed_v)
    ub = max(root.ub, lb)
    root_optimal = relative_gap(ub, lb) <= GAP_TOL
    if trace is not None:
        trace.append((lb, ub))

    open_list: list = []
    counter = itertools.count()
    expanded = 0
    exhausted = False
    p = root
    while not done(ub, lb):
        if expanded >= max_expanded:
            exhausted = True
            break
        if not is_leaf(instance, p):
            expanded += 1
            for child in branch(p, instance, incumbent.v):
                child.ub, child.relaxed_v = _relaxation(instance, child, coupled=True)
                if child.ub > lb:
                    heapq.heappush(open_list, (-child.ub, next(counter), child))
        if not open_list:
            ub = lb
            break
        p = heapq.heappop(open_list)[2]
        a, s = _completion(instance, p.relaxed_v)
        if s > lb:
            incumbent, lb = a, s
        # best-first: the popped node carries the largest bound left open
        ub = max(lb, min(ub, p.ub))
        if trace is not None:
            trace.append((lb, ub))

    return SolverResult(incumbent, lb, ub, relative_gap(ub, lb), expanded,
                        root_optimal, exhausted)


def solve_gms_star(instance: MatchingInstance) -> SolverResult:
    """Exact optimum of the topology-relaxed model (two independent LSAPs)."""
    v, sv_score = lap.lap_max(instance.sv_matrix())
    e, se_score = lap.lap_max(instance.se_matrix())
    a = Assignment(v, e)
    score = score_linear(instance, a)
    return SolverResult(a, score, score, 0.0, 0, True)


def constraint_violations(instance: MatchingInstance, a: Assignment,
                          topology: bool = True) -> list[str]:
    """Names of violated constraint families (empty if feasible)."""
    bad = []
    n1, n2, m1, m2 = instance.n1, instance.n2, instance.m1, instance.m2
    V = unvec(a.v, n1, n2).astype(int)
    E = unvec(a.e, m1, m2).astype(int)
    if np.any(V.sum(axis=1) > 1):
        bad.append("node_rows")
    if np.any(V.sum(axis=0) > 1):
        bad.append("node_cols")
    if np.any(E.sum(axis=1) > 1):
        bad.append("edge_rows")
    if np.any(E.sum(axis=0) > 1):
        bad.append("edge_cols")
    if topology and m1 and m2:
        E1, E2 = instance.g1.edges, instance.g2.edges
        tail2 = np.zeros((m2, n2), dtype=int)
        tail2[np.arange(m2), E2[:, 0]] = 1
        head2 = np.zeros((m2, n2), dtype=int)
        head2[np.arange(m2), E2[:, 1]] = 1
        # sum over arcs (k, l) leaving k of e[ij, kl] <= v[i, k]
        if np.any(E @ tail2 > V[E1[:, 0], :]):
            bad.append("topology_tail")
        # sum over arcs (k, l) entering l of e[ij, kl] <= v[j, l]
        if np.any(E @ head2 > V[E1[:, 1], :]):
            bad.append("topology_head")
    return bad


def brute_force_gms(instance: MatchingInstance) -> tuple[Assignment, float]:
    """Exact optimum by enumerating every partial node injection (test oracle).

    For a fixed node matching the best feasible ``e`` takes every induced edge
    pair with positive similarity: induced pairs already form a matching.
    """
    n1, n2 = instance.n1, instance.n2
    best, best_a = -np.inf, None
    for cols in itertools.product(list(range(n2)) + [None], repeat=n1):
        used = [c for c in cols if c is not None]
        if len(used) != len(set(used)):
            continue
        V = np.zeros((n1, n2), dtype=np.int8)
        for i, c in enumerate(cols):
            if c is not None:
                V[i, c] = 1
        v = vec(V)
        e = induced_edges(instance, v, positive_only=True)
        a = Assignment(v, e)
        s = score_linear(instance, a)
        if s > best:
            best, best_a = s, a
    return best_a, float(best)


def brute_force_gms_star(instance: MatchingInstance) -> float:
    """Topology-relaxed optimum by enumerating both assignments independently."""
    return lap.lap_bruteforce(instance.sv_matrix())[1] + lap.lap_bruteforce(instance.se_matrix())[1]


def solver_for(name: str, alpha: float = 0.0, **kwargs):
    """Callable ``instance -> SolverResult`` for ``gms`` or ``gms-star``."""
    if name == "gms":
        q = QualityLevel(alpha)
        return lambda inst: solve_gms(inst, q, **kwargs)
    if name == "gms-star":
        return solve_gms_star
    raise ValueError(f"unknown solver {name!r}")


__all__ = [
    "QualityLevel", "SolverResult", "TreeNode", "solve_gms", "solve_gms_star",
    "upper_bound", "coupled_bound", "lower_bound", "branch", "relative_gap", "constraint_violations",
    "brute_force_gms", "brute_force_gms_star", "node_constraints_ok", "solver_for",
]
