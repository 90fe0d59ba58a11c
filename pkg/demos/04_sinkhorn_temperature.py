# Sinkhorn soft assignments sharpen toward the LAP solution as temperature drops.
import numpy as np

from diffgm import SinkhornConfig, discretize, lap_max, sinkhorn_solve
from diffgm.sinkhorn import sinkhorn_padded

np.set_printoptions(precision=3, suppress=True)
S = np.array([[0.9, 0.2, -0.4],
              [0.3, 0.8, 0.1],
              [-0.5, 0.0, -0.2]])
print("LAP matching:", lap_max(S)[0])

for T in (1.0, 0.1, 0.01):
    soft = sinkhorn_solve(S, SinkhornConfig(temperature=T, max_iters=1000))
    print(f"\nT = {T}\n{soft}\ndiscretized: {discretize(soft)}")

P = sinkhorn_padded(S, SinkhornConfig(temperature=0.1, max_iters=2000, convergence_tol=1e-10))
print("\npadded", P.shape, "row sums", P.sum(axis=1).round(8), "col sums", P.sum(axis=0).round(8))
