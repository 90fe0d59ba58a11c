"""Synthetic keypoint-matching pairs built on Delaunay graphs."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .delaunay import DegenerateGeometryError, delaunay, incircle, orient
from .graph import AttributedGraph, MatchingInstance, TrainSample, vec


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters of one synthetic pair.

    ``noise_sigma`` perturbs the second graph's vertex descriptors;
    ``position_sigma`` jitters its keypoint coordinates (which changes edge
    descriptors and possibly the triangulation). Outliers only exist in the
    second graph.
    """

    n_points: int = 8
    descriptor_dim: int = 8
    noise_sigma: float = 0.0
    outlier_count: int = 0
    seed: int = 0
    position_sigma: float = 0.0

    def __post_init__(self):
        if self.n_points < 3:
            raise ValueError("n_points must be >= 3")
        if self.descriptor_dim < 1:
            raise ValueError("descriptor_dim must be >= 1")
        if self.noise_sigma < 0 or self.position_sigma < 0:
            raise ValueError("noise levels must be >= 0")
        if self.outlier_count < 0:
            raise ValueError("outlier_count must be >= 0")


def _degenerate(P) -> bool:
    for a, b, c in itertools.combinations(range(len(P)), 3):
        if orient(P[a], P[b], P[c]) == 0.0:
            return True
    for a, b, c, d in itertools.combinations(range(len(P)), 4):
        ccw = (a, b, c) if orient(P[a], P[b], P[c]) > 0 else (a, c, b)
        if incircle(P[ccw[0]], P[ccw[1]], P[ccw[2]], P[d]) == 0.0:
            return True
    return False


def sample_points(rng: np.random.Generator, n: int, max_tries: int = 100) -> np.ndarray:
    """Uniform points in the unit square, redrawn while exactly degenerate."""
    for _ in range(max_tries):
        P = rng.random((n, 2))
        if not _degenerate(P):
            return P
    raise DegenerateGeometryError("could not draw points in general position")


def directed_arcs(undirected) -> np.ndarray:
    """Expand ``(i, j)`` pairs into the arcs ``(i, j), (j, i)``."""
    arcs = []
    for i, j in undirected:
        arcs.append((i, j))
        arcs.append((j, i))
    return np.array(arcs, dtype=np.int64).reshape(-1, 2)


def class_vectors(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """``n`` unit descriptors, mutually orthonormal when ``dim >= n``."""
    if dim >= n:
        Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        return Q[:, :n].T.copy()
    C = rng.standard_normal((n, dim))
    return C / np.linalg.norm(C, axis=1, keepdims=True)


def build_graph(points, vertex_descriptors) -> AttributedGraph:
    arcs = directed_arcs(delaunay(points))
    P = np.asarray(points)
    edge_desc = P[arcs[:, 1]] - P[arcs[:, 0]]
    return AttributedGraph(len(P), arcs, vertex_descriptors, edge_desc)


def generate_pair(config: GeneratorConfig) -> TrainSample:
    """Draw one graph pair with its ground-truth matching.

    The second graph holds the first graph's keypoints in a random order
    (plus optional coordinate jitter and descriptor noise) followed by
    ``outlier_count`` extra random keypoints, all shuffled together.
    """
    rng = np.random.default_rng(config.seed)
    n, o = config.n_points, config.outlier_count
    P1 = sample_points(rng, n)
    C = class_vectors(rng, n, config.descriptor_dim)
    n2 = n + o
    perm = rng.permutation(n2)  # inlier i -> perm[i]; outliers -> perm[n:]
    for _ in range(100):
        P2 = np.empty((n2, 2))
        P2[perm[:n]] = P1 + config.position_sigma * rng.standard_normal((n, 2))
        P2[perm[n:]] = rng.random((o, 2))
        if not _degenerate(P2):
            break
    else:
        raise DegenerateGeometryError("could not draw the second point set in general position")
    Y = np.empty((n2, config.descriptor_dim))
    Y[perm[:n]] = C + config.noise_sigma * rng.standard_normal(C.shape)
    if o:
        Y[perm[n:]] = class_vectors(rng, o, config.descriptor_dim)
    V = np.zeros((n, n2), dtype=np.int8)
    V[np.arange(n), perm[:n]] = 1
    return TrainSample(build_graph(P1, C), build_graph(P2, Y), vec(V), P1, P2)


def generate_dataset(config: GeneratorConfig, size: int) -> list[TrainSample]:
    """``size`` samples with seeds derived from ``config.seed``."""
    seeds = np.random.SeedSequence(config.seed).generate_state(size, dtype=np.uint64)
    out = []
    for s in seeds:
        cfg = GeneratorConfig(config.n_points, config.descriptor_dim, config.noise_sigma,
                              config.outlier_count, int(s), config.position_sigma)
        out.append(generate_pair(cfg))
    return out


def inner_product_instance(sample: TrainSample) -> MatchingInstance:
    """Instance whose similarities are plain descriptor inner products."""
    g1, g2 = sample.g1, sample.g2
    sv = vec(g1.vertex_descriptors @ g2.vertex_descriptors.T)
    se = vec(g1.edge_descriptors @ g2.edge_descriptors.T)
    return MatchingInstance(g1, g2, sv, se)
