"""
Which target formations are stable, and why three eigenvalues must vanish.

The formation field is the descent flow of a potential. At a target
configuration the Hessian always has at least k(k+1)/2 zero eigenvalues, one
for each direction of rigid motion. A rigid graph has exactly that many;
a flexible graph gains extra zero modes along its flexes.
"""

import numpy as np

from rigidform.formation import classify_orbit, is_infinitesimally_rigid
from rigidform.presets import equilateral_triangle, five_agent_framework, regular_tetrahedron, square_cycle

np.set_printoptions(precision=4, suppress=True)

cases = {
    "triangle": equilateral_triangle()[:2],
    "five agents": five_agent_framework()[:2],
    "square 4-cycle": square_cycle(),
    "tetrahedron": regular_tetrahedron()[:2],
}

for name, (graph, q) in cases.items():
    rep = classify_orbit(graph, None, q)
    print(f"{name:15s} rigid={is_infinitesimally_rigid(graph, q)!s:5s} zeros={rep.zero_count} -> {rep.classification}")
    print("   spectrum:", np.sort(rep.eigenvalues.real))
