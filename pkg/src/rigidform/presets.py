"""Ready-made frameworks used by the tests, demos and bundled scenarios."""

from __future__ import annotations

import numpy as np

from .formation import CliqueSpec, FormationGraph

# Five agents, clique {0, 1, 2}; agent 3 hangs off edge {0, 1}, agent 4 off {1, 2}.
# Agents 1..3 sit on a triangle with 4 and 5 hanging below it; the layout has
# diameter 2 and is centred on its centroid.
FIVE_AGENT_EDGES = ((0, 1), (0, 2), (1, 2), (0, 3), (1, 3), (1, 4), (2, 4))
_FIVE_AGENT_RAW = np.array([[0.0, 0.0], [0.5, -0.7], [1.0, 0.0], [-0.5, -0.7], [1.5, -0.7]])


def five_agent_framework() -> tuple[FormationGraph, np.ndarray, CliqueSpec]:
    """Graph, target configuration and clique of the five-agent steering example."""
    q = _FIVE_AGENT_RAW - _FIVE_AGENT_RAW.mean(axis=0)
    return FormationGraph.from_configuration(FIVE_AGENT_EDGES, q), q, CliqueSpec((0, 1, 2))


def equilateral_triangle(side: float = 1.0) -> tuple[FormationGraph, np.ndarray, CliqueSpec]:
    ang = np.pi / 2 + 2 * np.pi * np.arange(3) / 3
    q = side / np.sqrt(3.0) * np.column_stack([np.cos(ang), np.sin(ang)])
    return FormationGraph.from_configuration(((0, 1), (0, 2), (1, 2)), q), q, CliqueSpec((0, 1, 2))


def square_cycle(side: float = 1.0) -> tuple[FormationGraph, np.ndarray]:
    """Flexible 4-cycle at a square; not rigid in the plane."""
    q = side * np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    return FormationGraph.from_configuration(((0, 1), (1, 2), (2, 3), (0, 3)), q), q


def regular_tetrahedron(side: float = 1.0) -> tuple[FormationGraph, np.ndarray, CliqueSpec]:
    q = side / np.sqrt(8.0) * np.array([[1.0, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]])
    edges = tuple((i, j) for i in range(4) for j in range(i + 1, 4))
    return FormationGraph.from_configuration(edges, q), q, CliqueSpec((0, 1, 2, 3))
