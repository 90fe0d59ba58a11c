# Bounds closing in during a branch-and-bound solve, and the effect of alpha.
import numpy as np

from diffgm import GeneratorConfig, generate_pair, solve_gms
from diffgm.learn import SimilarityModel, compute_similarities

# a random (untrained) similarity model makes a hard instance
sample = generate_pair(GeneratorConfig(n_points=8, descriptor_dim=8, noise_sigma=0.3, seed=4))
model = SimilarityModel.random(8, 2, seed=0, scale=0.3)
inst = compute_similarities(model, sample)
print(f"{inst.n1} x {inst.n2} nodes, {inst.m1} x {inst.m2} arcs")

trace = []
r = solve_gms(inst, 0.0, trace=trace)
print(f"exact: score {r.score:.4f}, {r.tree_nodes_expanded} nodes expanded, optimal at root: {r.root_optimal}")
for step in np.linspace(0, len(trace) - 1, 8).astype(int):
    lb, ub = trace[step]
    print(f"  step {step:4d}  lb {lb:8.4f}  ub {ub:8.4f}")

print("\nalpha  score    ub       gap    nodes")
for alpha in (0.0, 0.05, 0.2, 0.5, 1.0, 2.0):
    r = solve_gms(inst, alpha)
    print(f"{alpha:5.2f}  {r.score:7.4f}  {r.ub:7.4f}  {r.gap:.3f}  {r.tree_nodes_expanded:5d}")
