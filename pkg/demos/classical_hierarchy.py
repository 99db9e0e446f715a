"""
Four maps, four levels
======================

Each map is classified on a handful of sets. A level passes when its
residual stays below eps over the tested horizon; no pass is a proof.
"""

import numpy as np

from qeh import ArcSet, CellSet, ClassifierParams, MapSpec, classify_set_level, set_correlation

# The rotation by the golden ratio is ergodic: time averages of the
# correlation vanish. Its correlations never decay, so mixing fails.
golden = (np.sqrt(5) - 1) / 2
arcs = [ArcSet([(0, 0.5)]), ArcSet([(0.25, 0.5)])]
v = classify_set_level(MapSpec.rotation(golden), arcs)
for lv in v.levels:
    print(f"{lv.name:11s} residual {lv.residual:.4f}  passed {lv.passed}")

# The same sets under the trivial rotation fail everything.
v = classify_set_level(MapSpec.rotation(0.0), [arcs[0], arcs[0]])
print(v.flags())

# On the 2^5 x 2^5 grid the cat map decorrelates a vertical and a
# horizontal half-plane at once and keeps them apart for 200 steps.
k = 5
left = CellSet.from_predicate(k, lambda i, j: i < 16)
bottom = CellSet.from_predicate(k, lambda i, j: j < 16)
print([set_correlation(MapSpec.cat(), left, bottom, n) for n in range(6)])
v = classify_set_level(MapSpec.cat(), [left, bottom], ClassifierParams(N_cesaro=200, N_mix=200))
print(v.flags())

# The dyadic shift moves digits of y into x. Cylinders on disjoint digit
# blocks stay independent until a digit wraps around the finite ring.
k = 10
sets = [
    CellSet.from_predicate(k, lambda i, j: i >> (k - 3) == 0b011),
    CellSet.from_predicate(k, lambda i, j: (j >> (k - 3)) & 7 == 0b101),
    CellSet.from_predicate(k, lambda i, j: (j >> (k - 6)) & 7 == 0b110),
]
shift = MapSpec.bernoulli_shift(2)
print([set_correlation(shift, sets[0], sets[2], n) for n in range(14)])
v = classify_set_level(shift, sets, ClassifierParams(N_cesaro=10, N_mix=10))
print(v.flags())
