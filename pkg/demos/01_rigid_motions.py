"""
Rigid motions of the plane and of space as pairs (rotation, translation).

Walks through composition, the exponential of a generator (Omega, v), its
logarithm, and why a half turn has no principal logarithm.
"""

import numpy as np

from rigidform.errors import BranchSingularity
from rigidform.liegroup import SEAlgebraElement, SEElement, se_compose, se_exp, se_log

np.set_printoptions(precision=4, suppress=True)

quarter = SEElement.planar(np.pi / 2, (1.0, 0.0))
print("quarter turn then shift by (1, 0):\n", quarter.matrix())

twice = se_compose(quarter, quarter)
print("applied twice:\n", twice.matrix())

# The generator whose time-1 flow is the quarter turn. Its velocity part is not
# simply the translation: the rotation bends the path of every point.
gen = se_log(quarter)
print("log: Omega =\n", gen.omega, "\n     v =", gen.vel)
print("exp(log) recovers the element:", se_exp(gen).allclose(quarter))

# Following the generator for a fraction of the time moves along the same screw.
for t in (0.25, 0.5, 1.0):
    a = se_exp(gen, t)
    ang = np.degrees(np.arctan2(a.rotation[1, 0], a.rotation[0, 0]))
    print(f"t={t:4.2f}: angle {ang:6.2f} deg, translation {a.translation}")

try:
    se_log(twice)
except BranchSingularity as exc:
    print("half turn:", exc)

# In three dimensions the same calls apply.
rng = np.random.default_rng(0)
w = rng.normal(size=(3, 3))
g3 = SEAlgebraElement(0.5 * (w - w.T), rng.normal(size=3))
print("SE(3) round trip error:", (se_log(se_exp(g3)) - g3).norm())
