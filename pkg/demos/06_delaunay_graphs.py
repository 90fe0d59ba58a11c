# Keypoint graphs: Delaunay edges doubled into arcs, displacement edge features.
import numpy as np

from diffgm import GeneratorConfig, delaunay, generate_pair
from diffgm.graph import unvec

print("unit square:", delaunay([[0, 0], [0, 1], [1, 0], [1, 1]]))

s = generate_pair(GeneratorConfig(n_points=6, descriptor_dim=6, outlier_count=2, seed=3))
print(f"\ng1: {s.g1.n_vertices} vertices, {s.g1.n_edges} arcs")
print(f"g2: {s.g2.n_vertices} vertices, {s.g2.n_edges} arcs (2 outliers)")
print("first arcs of g1 and their displacement descriptors:")
for (t, h), d in zip(s.g1.edges[:4], s.g1.edge_descriptors[:4]):
    print(f"  {t} -> {h}  {np.round(d, 3)}")
V = unvec(s.v_gt, s.g1.n_vertices, s.g2.n_vertices)
print("ground truth (row i matched to column):", V.argmax(axis=1), "unmatched columns:",
      np.nonzero(V.sum(axis=0) == 0)[0])
