# The interpolated loss is piecewise linear in the similarities; its slope is
# what the backward pass returns.
import numpy as np

from diffgm import AttributedGraph, MatchingInstance, backward, forward, hamming_loss, interpolated_loss
from diffgm.graph import hamming_loss_grad
from diffgm.solver import solver_for

rng = np.random.default_rng(3)
tri = [[0, 1], [1, 2], [2, 0]]
inst = MatchingInstance(AttributedGraph(3, tri), AttributedGraph(3, tri),
                        rng.uniform(-1, 1, 9), rng.uniform(-1, 1, 9))
v_gt = np.eye(3, dtype=np.int8).reshape(-1, order="F")
solver = solver_for("gms", 0.0)
lam = 2.0

a, ctx = forward(inst, solver)
g = hamming_loss_grad(v_gt, a.v)
d_sv, d_se = backward(ctx, g, lam, solver)
print("prediction    ", a.v, " hamming loss", hamming_loss(v_gt, a.v))
print("d_sv          ", np.round(d_sv, 3))

direction = rng.standard_normal(9)
print("\n   t     L(v)    L_lam   slope(FD)  slope(backward)")
for t in np.linspace(-1.0, 1.0, 9):
    x = inst.with_similarities(sv=inst.sv + t * direction)
    a, ctx = forward(x, solver)
    d, _ = backward(ctx, hamming_loss_grad(v_gt, a.v), lam, solver)
    L = lambda s: interpolated_loss(x.with_similarities(sv=s), v_gt, lam, solver)
    h = 1e-5
    fd = (L(x.sv + h * direction) - L(x.sv - h * direction)) / (2 * h)
    print(f"{t:5.2f}  {hamming_loss(v_gt, a.v):6.3f}  {L(x.sv):7.4f}  {fd:9.4f}  {d @ direction:9.4f}")
