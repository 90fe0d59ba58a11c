"""End-to-end training of a bilinear similarity model through a matching layer."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .graph import (
    ContractError, MatchingInstance, TrainSample, accuracy, hamming_loss,
    hamming_loss_grad, unvec, vec,
)
from .layer import SinkhornPipeline, backward, forward
from .sinkhorn import SinkhornConfig, discretize, permutation_loss, sinkhorn_grad
from .solver import SolverResult, solver_for

SOLVERS = ("gms", "gms-star", "sinkhorn")
METRIC_FIELDS = ["epoch", "mean_loss", "train_acc", "test_acc", "mean_gap", "mean_tree_nodes"]


@dataclass
class SimilarityModel:
    """``sv[i, k] = x_i^T A y_k`` and ``se[a, b] = p_a^T B q_b``."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        self.A = np.array(self.A, dtype=float)
        self.B = np.array(self.B, dtype=float)
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.B))):
            raise ContractError("model parameters must be finite")

    @classmethod
    def random(cls, d_v: int, d_e: int, seed=0, scale: float = 0.01) -> "SimilarityModel":
        rng = np.random.default_rng(seed)
        return cls(scale * rng.standard_normal((d_v, d_v)), scale * rng.standard_normal((d_e, d_e)))

    def params(self) -> dict:
        return {"A": self.A, "B": self.B}

    def copy(self) -> "SimilarityModel":
        return SimilarityModel(self.A.copy(), self.B.copy())

    def save(self, path):
        np.savez(path, A=self.A, B=self.B)

    @classmethod
    def load(cls, path) -> "SimilarityModel":
        with np.load(path) as f:
            return cls(f["A"], f["B"])


def compute_similarities(model: SimilarityModel, sample: TrainSample) -> MatchingInstance:
    X, Y = sample.g1.vertex_descriptors, sample.g2.vertex_descriptors
    P, Q = sample.g1.edge_descriptors, sample.g2.edge_descriptors
    if X.shape[1] != model.A.shape[0] or Y.shape[1] != model.A.shape[1]:
        raise ContractError("vertex descriptor dimension does not match A")
    if P.shape[1] != model.B.shape[0] or Q.shape[1] != model.B.shape[1]:
        raise ContractError("edge descriptor dimension does not match B")
    return MatchingInstance(sample.g1, sample.g2, vec(X @ model.A @ Y.T), vec(P @ model.B @ Q.T))


def backprop_similarities(model: SimilarityModel, sample: TrainSample, d_sv, d_se):
    """Adjoint of :func:`compute_similarities`: ``(dA, dB)``."""
    g1, g2 = sample.g1, sample.g2
    d_sv = np.asarray(d_sv, dtype=float).ravel()
    d_se = np.asarray(d_se, dtype=float).ravel()
    if d_sv.size != g1.n_vertices * g2.n_vertices or d_se.size != g1.n_edges * g2.n_edges:
        raise ContractError("gradient vectors do not match the instance")
    Dv = unvec(d_sv, g1.n_vertices, g2.n_vertices)
    De = unvec(d_se, g1.n_edges, g2.n_edges)
    dA = g1.vertex_descriptors.T @ Dv @ g2.vertex_descriptors
    dB = g1.edge_descriptors.T @ De @ g2.edge_descriptors
    return dA, dB


@dataclass
class AdamState:
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


BETA1, BETA2, ADAM_EPS = 0.9, 0.999, 1e-8


def adam_step(params: dict, grads: dict, state: AdamState, learning_rate: float):
    """One Adam update; returns new parameter arrays and the new state."""
    if params.keys() != grads.keys():
        raise ContractError("params and grads have different keys")
    t = state.t + 1
    new_params, m, v = {}, {}, {}
    for k, p in params.items():
        g = np.asarray(grads[k], dtype=float)
        if g.shape != np.shape(p):
            raise ContractError(f"shape mismatch for {k}: {g.shape} vs {np.shape(p)}")
        m[k] = BETA1 * state.m.get(k, 0.0) + (1 - BETA1) * g
        v[k] = BETA2 * state.v.get(k, 0.0) + (1 - BETA2) * g * g
        m_hat = m[k] / (1 - BETA1 ** t)
        v_hat = v[k] / (1 - BETA2 ** t)
        new_params[k] = p - learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
    return new_params, AdamState(t, m, v)


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 2e-3
    lr_halving_steps: int = 3  # epochs between learning-rate halvings
    batch_size: int = 8
    epochs: int = 10
    lam: float = 80.0
    alpha: float = 0.0
    seed: int = 0
    init_scale: float = 0.01
    sinkhorn: SinkhornConfig = SinkhornConfig()

    def __post_init__(self):
        if not self.learning_rate > 0 or not self.lam > 0:
            raise ValueError("learning_rate and lam must be > 0")
        if self.batch_size < 1 or self.epochs < 0 or self.lr_halving_steps < 1:
            raise ValueError("invalid batch_size, epochs or lr_halving_steps")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")


@dataclass
class EpochMetrics:
    epoch: int
    mean_loss: float
    train_acc: float
    test_acc: float
    mean_gap: float
    mean_tree_nodes: float

    def row(self) -> list:
        return [self.epoch, self.mean_loss, self.train_acc, self.test_acc,
                self.mean_gap, self.mean_tree_nodes]


def make_solver(name: str, alpha: float = 0.0, sinkhorn: SinkhornConfig = SinkhornConfig()):
    if name == "sinkhorn":
        return SinkhornPipeline(sinkhorn)
    return solver_for(name, alpha)


def predict(model: SimilarityModel, sample: TrainSample, solver) -> np.ndarray:
    out = solver(compute_similarities(model, sample))
    return out.assignment.v if isinstance(out, SolverResult) else out.v


def evaluate(model: SimilarityModel, samples, solver) -> float:
    """Mean matching accuracy over ``samples``."""
    if not samples:
        return float("nan")
    return float(np.mean([accuracy(s.v_gt, predict(model, s, solver)) for s in samples]))


def _sample_step(model, sample, solver_name, solver, config):
    """Loss, accuracy, (gap, nodes) and parameter gradients for one sample."""
    inst = compute_similarities(model, sample)
    if solver_name == "sinkhorn":
        V_gt = unvec(sample.v_gt, inst.n1, inst.n2)
        soft, _ = sinkhorn_grad(inst.sv_matrix(), np.zeros((inst.n1, inst.n2)), config.sinkhorn)
        loss, g_soft = permutation_loss(soft, V_gt)
        _, d_sv_mat = sinkhorn_grad(inst.sv_matrix(), g_soft, config.sinkhorn)
        v_hat = discretize(soft)
        d_sv, d_se = vec(d_sv_mat), np.zeros(inst.m1 * inst.m2)
        stats = (0.0, 0)
    else:
        a, ctx = forward(inst, solver)
        v_hat = a.v
        loss = hamming_loss(sample.v_gt, v_hat)
        d_sv, d_se = backward(ctx, hamming_loss_grad(sample.v_gt, v_hat), config.lam, solver)
        r = ctx.result
        stats = (r.gap, r.tree_nodes_expanded) if isinstance(r, SolverResult) else (0.0, 0)
    dA, dB = backprop_similarities(model, sample, d_sv, d_se)
    return loss, accuracy(sample.v_gt, v_hat), stats, dA, dB


def train(dataset, config: TrainConfig = TrainConfig(), solver: str = "gms", test_set=None,
          model: SimilarityModel | None = None):
    """Train on ``dataset`` and return ``(model, [EpochMetrics, ...])``.

    ``solver`` is ``"gms"`` (quality level ``config.alpha``), ``"gms-star"`` or
    ``"sinkhorn"``; the Sinkhorn pipeline is trained with the permutation
    loss through its own unrolled gradient. Test accuracy always uses the same
    pipeline solved exactly (``alpha = 0``).
    """
    dataset = list(dataset)
    if not dataset:
        raise ContractError("empty training set")
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}")
    rng = np.random.default_rng(config.seed)
    if model is None:
        s0 = dataset[0]
        model = SimilarityModel.random(s0.g1.vertex_descriptors.shape[1],
                                       s0.g1.edge_descriptors.shape[1],
                                       rng, config.init_scale)
    else:
        model = model.copy()
    train_solver = make_solver(solver, config.alpha, config.sinkhorn)
    eval_solver = make_solver(solver, 0.0, config.sinkhorn)
    state = AdamState()
    history = []
    for epoch in range(1, config.epochs + 1):
        lr = config.learning_rate * 0.5 ** ((epoch - 1) // config.lr_halving_steps)
        order = rng.permutation(len(dataset))
        losses, accs, gaps, nodes = [], [], [], []
        for start in range(0, len(order), config.batch_size):
            batch = [dataset[i] for i in order[start:start + config.batch_size]]
            gA = np.zeros_like(model.A)
            gB = np.zeros_like(model.B)
            for sample in batch:
                loss, acc, (gap, n_nodes), dA, dB = _sample_step(
                    model, sample, solver, train_solver, config)
                losses.append(loss)
                accs.append(acc)
                gaps.append(gap)
                nodes.append(n_nodes)
                gA += dA / len(batch)
                gB += dB / len(batch)
            params, state = adam_step(model.params(), {"A": gA, "B": gB}, state, lr)
            model = SimilarityModel(params["A"], params["B"])
        test_acc = evaluate(model, test_set, eval_solver) if test_set else float("nan")
        history.append(EpochMetrics(epoch, float(np.mean(losses)), float(np.mean(accs)),
                                    test_acc, float(np.mean(gaps)), float(np.mean(nodes))))
    return model, history


def write_metrics_csv(path, history) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(METRIC_FIELDS)
        for m in history:
            w.writerow([m.epoch] + [repr(float(x)) for x in m.row()[1:]])


def read_metrics_csv(path) -> list[EpochMetrics]:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    return [EpochMetrics(int(r["epoch"]), *(float(r[k]) for k in METRIC_FIELDS[1:])) for r in rows]
