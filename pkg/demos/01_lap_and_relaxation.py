# Linear assignment with non-assignment, and what dropping topology costs.
import numpy as np

from diffgm import AttributedGraph, MatchingInstance, lap_bruteforce, lap_max, solve_gms, solve_gms_star

W = np.array([[1.0, 5.0],
              [4.0, 2.0]])
v, score = lap_max(W)
print("weights\n", W)
print("lap_max    v =", v, "score =", score)
print("brute force  score =", lap_bruteforce(W)[1])

# negative pairs are simply left unmatched
W = np.array([[0.7, -0.2, -1.0],
              [-0.3, -0.1, 0.4]])
print("\nmixed signs: v =", lap_max(W)[0], "score =", lap_max(W)[1])

# one arc per graph; node similarities prefer swapping the two vertices,
# the edge similarity prefers keeping them in place
g = AttributedGraph(2, [[0, 1]])
inst = MatchingInstance(g, g, sv=[0.0, 1.0, 1.0, 0.0], se=[3.0])
exact = solve_gms(inst)
relaxed = solve_gms_star(inst)
print("\nexact (topology kept):   v =", exact.assignment.v, "e =", exact.assignment.e, "score =", exact.score)
print("relaxed (topology dropped): v =", relaxed.assignment.v, "e =", relaxed.assignment.e,
      "score =", relaxed.score)
print("the relaxed solution pairs the edge with a swapped node map, which no real matching allows")
