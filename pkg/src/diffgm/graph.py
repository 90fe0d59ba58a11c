"""Core types for attributed graphs, matching instances and assignments.

Vectorization is column-wise everywhere: the node pair ``(i, k)`` with
``i`` in the first graph and ``k`` in the second lives at index
``k * n1 + i``, and the edge pair ``(a, b)`` (arc ``a`` of the first graph,
arc ``b`` of the second) lives at ``b * m1 + a``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class ContractError(ValueError):
    """Raised when an argument violates a documented precondition."""


class UndefinedMetricError(ValueError):
    """Raised when a metric has no meaning for the given inputs."""


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """Directed graph with fixed-width vertex and edge descriptors.

    Parameters
    ----------
    n_vertices : int
        Number of vertices.
    edges : array-like, shape (m, 2)
        Directed arcs as ``(tail, head)`` index pairs.
    vertex_descriptors : array-like, shape (n, d_v), optional
    edge_descriptors : array-like, shape (m, d_e), optional
    """

    n_vertices: int
    edges: np.ndarray
    vertex_descriptors: np.ndarray | None = None
    edge_descriptors: np.ndarray | None = None

    def __post_init__(self):
        n = int(self.n_vertices)
        if n < 0:
            raise ContractError("negative vertex count")
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ContractError("arc references a vertex outside the graph")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ContractError("self-loops are not allowed")
        if len({(int(t), int(h)) for t, h in edges}) != len(edges):
            raise ContractError("duplicate arcs")
        object.__setattr__(self, "n_vertices", n)
        object.__setattr__(self, "edges", _frozen(edges, np.int64))
        if self.vertex_descriptors is not None:
            vd = np.asarray(self.vertex_descriptors, dtype=float)
            if vd.ndim != 2 or vd.shape[0] != n:
                raise ContractError("vertex descriptors must have shape (n, d_v)")
            object.__setattr__(self, "vertex_descriptors", _frozen(vd))
        if self.edge_descriptors is not None:
            ed = np.asarray(self.edge_descriptors, dtype=float)
            if ed.ndim != 2 or ed.shape[0] != len(edges):
                raise ContractError("edge descriptors must have shape (m, d_e)")
            object.__setattr__(self, "edge_descriptors", _frozen(ed))

    @property
    def n_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True, eq=False)
class MatchingInstance:
    """A graph pair with node and edge-pair similarity vectors."""

    g1: AttributedGraph
    g2: AttributedGraph
    sv: np.ndarray
    se: np.ndarray

    def __post_init__(self):
        sv = np.asarray(self.sv, dtype=float).ravel()
        se = np.asarray(self.se, dtype=float).ravel()
        if sv.size != self.n1 * self.n2:
            raise ContractError(f"sv has length {sv.size}, expected {self.n1 * self.n2}")
        if se.size != self.m1 * self.m2:
            raise ContractError(f"se has length {se.size}, expected {self.m1 * self.m2}")
        if not (np.all(np.isfinite(sv)) and np.all(np.isfinite(se))):
            raise ContractError("similarities must be finite")
        object.__setattr__(self, "sv", _frozen(sv))
        object.__setattr__(self, "se", _frozen(se))

    @property
    def n1(self) -> int:
        return self.g1.n_vertices

    @property
    def n2(self) -> int:
        return self.g2.n_vertices

    @property
    def m1(self) -> int:
        return self.g1.n_edges

    @property
    def m2(self) -> int:
        return self.g2.n_edges

    def sv_matrix(self) -> np.ndarray:
        """Node similarities as an ``(n1, n2)`` matrix."""
        return unvec(self.sv, self.n1, self.n2)

    def se_matrix(self) -> np.ndarray:
        """Edge-pair similarities as an ``(m1, m2)`` matrix."""
        return unvec(self.se, self.m1, self.m2)

    def with_similarities(self, sv=None, se=None) -> "MatchingInstance":
        return MatchingInstance(
            self.g1, self.g2,
            self.sv if sv is None else sv,
            self.se if se is None else se,
        )


@dataclass(frozen=True, eq=False)
class Assignment:
    """Binary node-matching vector ``v`` and edge-matching vector ``e``."""

    v: np.ndarray
    e: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "v", _frozen(np.asarray(self.v).ravel(), np.int8))
        object.__setattr__(self, "e", _frozen(np.asarray(self.e).ravel(), np.int8))
        if np.any((self.v != 0) & (self.v != 1)) or np.any((self.e != 0) & (self.e != 1)):
            raise ContractError("assignment vectors must be binary")

    def __eq__(self, other):
        if not isinstance(other, Assignment):
            return NotImplemented
        return np.array_equal(self.v, other.v) and np.array_equal(self.e, other.e)

    __hash__ = None

    @classmethod
    def empty(cls, instance: MatchingInstance) -> "Assignment":
        return cls(np.zeros(instance.n1 * instance.n2, np.int8),
                   np.zeros(instance.m1 * instance.m2, np.int8))


@dataclass(frozen=True, eq=False)
class TrainSample:
    """A graph pair carrying raw descriptors plus its ground-truth node matching."""

    g1: AttributedGraph
    g2: AttributedGraph
    v_gt: np.ndarray
    points1: np.ndarray | None = field(default=None, repr=False)
    points2: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        v_gt = np.asarray(self.v_gt).ravel().astype(np.int8)
        if v_gt.size != self.g1.n_vertices * self.g2.n_vertices:
            raise ContractError("v_gt length does not match the graph pair")
        if not node_constraints_ok(v_gt, self.g1.n_vertices, self.g2.n_vertices):
            raise ContractError("v_gt violates the one-to-one node constraints")
        object.__setattr__(self, "v_gt", _frozen(v_gt, np.int8))


def vec(matrix) -> np.ndarray:
    """Column-wise vectorization of a matrix."""
    return np.asarray(matrix).reshape(-1, order="F").copy()


def unvec(vector, rows: int, cols: int) -> np.ndarray:
    """Inverse of :func:`vec`."""
    return np.asarray(vector).reshape((rows, cols), order="F")


def node_constraints_ok(v, n1: int, n2: int) -> bool:
    V = unvec(v, n1, n2)
    return bool(np.all(V.sum(axis=0) <= 1) and np.all(V.sum(axis=1) <= 1))


def induced_edges(instance: MatchingInstance, v, positive_only: bool = False) -> np.ndarray:
    """Edge-pair indicator ``e`` implied by a node matching.

    ``e[ab] = 1`` iff arc ``a = (i, j)`` and arc ``b = (k, l)`` satisfy
    ``v[i, k] = v[j, l] = 1``. With ``positive_only`` the pair must also have
    a strictly positive edge similarity.
    """
    V = unvec(np.asarray(v), instance.n1, instance.n2).astype(bool)
    E1, E2 = instance.g1.edges, instance.g2.edges
    if len(E1) == 0 or len(E2) == 0:
        return np.zeros(len(E1) * len(E2), np.int8)
    tails = V[np.ix_(E1[:, 0], E2[:, 0])]
    heads = V[np.ix_(E1[:, 1], E2[:, 1])]
    E = tails & heads
    if positive_only:
        E &= instance.se_matrix() > 0
    return vec(E.astype(np.int8))


def _check_assignment(instance: MatchingInstance, v, e=None):
    if np.asarray(v).size != instance.n1 * instance.n2:
        raise ContractError("node vector has the wrong length")
    if e is not None and np.asarray(e).size != instance.m1 * instance.m2:
        raise ContractError("edge vector has the wrong length")


def score_quadratic(instance: MatchingInstance, v) -> float:
    """Quadratic matching score of a node assignment.

    ``sv . v`` plus ``se[ij, kl] * v[i, k] * v[j, l]`` summed over every
    arc pair in ``E1 x E2``.
    """
    _check_assignment(instance, v)
    v = np.asarray(v, dtype=float).ravel()
    if not node_constraints_ok(v, instance.n1, instance.n2):
        raise ContractError("node vector violates the matching constraints")
    e = induced_edges(instance, v)
    return float(instance.sv @ v + instance.se @ e)


def score_linear(instance: MatchingInstance, a: Assignment) -> float:
    """Linear score ``sv . v + se . e``."""
    _check_assignment(instance, a.v, a.e)
    return float(instance.sv @ a.v + instance.se @ a.e)


def _check_pair(x, y):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ContractError(f"length mismatch: {x.size} vs {y.size}")
    if x.size == 0:
        raise ContractError("empty vectors")
    return x, y


def hamming_loss(v_gt, v) -> float:
    """Normalized Hamming distance ``|v - v_gt|_1 / len(v)``."""
    v_gt, v = _check_pair(v_gt, v)
    return float(np.sum(v_gt * (1 - v) + (1 - v_gt) * v) / v.size)


def hamming_loss_grad(v_gt, v) -> np.ndarray:
    """Gradient of :func:`hamming_loss` with respect to ``v``.

    The loss is affine in ``v`` for a fixed ``v_gt``, so the gradient
    ``(1 - 2 v_gt) / len(v)`` does not depend on ``v``.
    """
    v_gt, v = _check_pair(v_gt, v)
    return (1.0 - 2.0 * v_gt) / v.size


def accuracy(v_gt, v) -> float:
    """Fraction of ground-truth matches recovered by ``v``."""
    v_gt, v = _check_pair(v_gt, v)
    total = v_gt.sum()
    if total == 0:
        raise UndefinedMetricError("accuracy is undefined for an empty ground truth")
    return float(np.sum(v * v_gt) / total)


# -- serialization -----------------------------------------------------------

def instance_to_dict(instance: MatchingInstance, v_gt=None) -> dict:
    return {
        "n1": instance.n1,
        "n2": instance.n2,
        "edges1": instance.g1.edges.tolist(),
        "edges2": instance.g2.edges.tolist(),
        "sv": instance.sv.tolist(),
        "se": instance.se.tolist(),
        "v_gt": None if v_gt is None else np.asarray(v_gt).astype(int).tolist(),
    }


def instance_from_dict(d: dict) -> tuple[MatchingInstance, np.ndarray | None]:
    try:
        g1 = AttributedGraph(int(d["n1"]), np.asarray(d["edges1"], dtype=np.int64).reshape(-1, 2))
        g2 = AttributedGraph(int(d["n2"]), np.asarray(d["edges2"], dtype=np.int64).reshape(-1, 2))
        instance = MatchingInstance(g1, g2, d["sv"], d["se"])
    except (KeyError, TypeError) as exc:
        raise ContractError(f"malformed instance document: {exc}") from exc
    v_gt = d.get("v_gt")
    if v_gt is not None:
        v_gt = np.asarray(v_gt, dtype=np.int8)
        if v_gt.size != instance.n1 * instance.n2:
            raise ContractError("v_gt length does not match the instance")
    return instance, v_gt


def dumps_instance(instance: MatchingInstance, v_gt=None) -> str:
    """Serialize to a single JSON line (``repr``-exact floats)."""
    return json.dumps(instance_to_dict(instance, v_gt), separators=(",", ":"))


def loads_instance(text: str) -> tuple[MatchingInstance, np.ndarray | None]:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ContractError(f"invalid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise ContractError("instance document must be a JSON object")
    return instance_from_dict(d)
