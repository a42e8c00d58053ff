"""
Scenario files: YAML documents describing one formation experiment.

Vertices are labelled 1..n in files and 0..n-1 in the library. Example::

    name: five_agents
    dimension: 2
    positions:            # one row per agent
      - [0.0, 0.0]
      - [1.0, 0.0]
      - [0.5, 0.8]
    edges:                # [i, j, target length]
      - [1, 2, 1.0]
      - [1, 3, 0.94]
      - [2, 3, 0.94]
    clique: [1, 2, 3]
    law: {family: linear, gain: 1.0}
    target: {angle_deg: 90, translation: [1.0, 0.0]}   # or rotation: [[...], ...]
    steering: {rate: 0.1, epsilon: 0.3, refine: false}
    perturbation: {magnitude: 0.01, seed: 0}           # or offsets: [[i, j, c], ...]
    integrator: {step: null, initial_step: 0.05, stride: 10}
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .errors import RigidFormError
from .formation import CliqueSpec, FormationGraph, InteractionLaw, OffsetField
from .liegroup import SEElement
from .robustness import sample_perturbation


class ScenarioError(RigidFormError, ValueError):
    pass


@dataclass(frozen=True)
class TargetSpec:
    rotation: tuple[tuple[float, ...], ...]
    translation: tuple[float, ...]
    angle_deg: float | None = None

    def element(self) -> SEElement:
        return SEElement(np.array(self.rotation), np.array(self.translation))


@dataclass(frozen=True)
class PerturbationSpec:
    offsets: tuple[tuple[int, int, float], ...] | None = None
    magnitude: float | None = None
    seed: int = 0


@dataclass(frozen=True)
class IntegratorSpec:
    step: float | None = None
    initial_step: float = 0.05
    refine_tol: float = 1e-8
    stride: int = 10
    settle_tol: float = 1e-9
    horizon: float = 500.0


@dataclass(frozen=True)
class Scenario:
    dimension: int
    positions: tuple[tuple[float, ...], ...]
    edges: tuple[tuple[int, int, float], ...]
    clique: tuple[int, ...] | None = None
    law_family: str = "linear"
    law_gain: float = 1.0
    name: str = "scenario"
    target: TargetSpec | None = None
    rate: float | None = None
    epsilon: float | None = None
    refine: bool = False
    perturbation: PerturbationSpec | None = None
    integrator: IntegratorSpec = field(default_factory=IntegratorSpec)

    @property
    def n(self) -> int:
        return len(self.positions)

    def graph(self) -> FormationGraph:
        return FormationGraph(self.n, tuple((i, j) for i, j, _ in self.edges), tuple(d for _, _, d in self.edges))

    def configuration(self) -> np.ndarray:
        return np.array(self.positions, dtype=float)

    def law(self) -> InteractionLaw:
        return InteractionLaw(self.law_family, self.law_gain)

    def clique_spec(self) -> CliqueSpec:
        if self.clique is None:
            raise ScenarioError(f"{self.name}: this command needs a 'clique'")
        return CliqueSpec(self.clique)

    def offsets(self, seed: int | None = None) -> OffsetField:
        g = self.graph()
        spec = self.perturbation
        if spec is None:
            return OffsetField.zeros(g.directed_edges())
        if spec.offsets is not None:
            return OffsetField({(i, j): c for i, j, c in spec.offsets}, g.directed_edges())
        return sample_perturbation(g, spec.magnitude, spec.seed if seed is None else seed)


def _line_map(node, path=(), out=None) -> dict[tuple, int]:
    """1-based source line of every mapping value and sequence item, keyed by path."""
    if out is None:
        out = {}
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for key, val in node.value:
            _line_map(val, path + (key.value,), out)
    elif isinstance(node, yaml.SequenceNode):
        for idx, val in enumerate(node.value):
            _line_map(val, path + (idx,), out)
    return out


class _Reader:
    def __init__(self, data, lines, source):
        self.data = data
        self.lines = lines
        self.source = source

    def fail(self, path, msg):
        probe = tuple(path)
        while probe not in self.lines and probe:
            probe = probe[:-1]
        line = self.lines.get(probe)
        where = f"{self.source}:{line}" if line else self.source
        raise ScenarioError(f"{where}: {msg}")

    def get(self, path, default=...):
        cur = self.data
        for key in path:
            if isinstance(cur, dict) and key in cur:
                cur = cur[key]
            elif isinstance(cur, list) and isinstance(key, int) and key < len(cur):
                cur = cur[key]
            else:
                if default is ...:
                    self.fail(path[:-1], f"missing required key '{'.'.join(map(str, path))}'")
                return default
        return cur

    def number(self, path, value=..., positive=False, allow_none=False):
        val = self.get(path) if value is ... else value
        if val is None and allow_none:
            return None
        if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
            self.fail(path, f"'{_dotted(path)}' must be a finite number, got {val!r}")
        if positive and not val > 0:
            self.fail(path, f"'{_dotted(path)}' must be positive, got {val!r}")
        return float(val)

    def integer(self, path, lo=None, hi=None, value=...):
        val = self.get(path) if value is ... else value
        if isinstance(val, bool) or not isinstance(val, int):
            self.fail(path, f"'{_dotted(path)}' must be an integer, got {val!r}")
        if (lo is not None and val < lo) or (hi is not None and val > hi):
            self.fail(path, f"'{_dotted(path)}' = {val} is outside {lo}..{hi}")
        return val

    def seq(self, path, length=None):
        val = self.get(path)
        if not isinstance(val, list):
            self.fail(path, f"'{_dotted(path)}' must be a list")
        if length is not None and len(val) != length:
            self.fail(path, f"'{_dotted(path)}' must have {length} entries, got {len(val)}")
        return val


def _dotted(path):
    return ".".join(str(p + 1) if isinstance(p, int) else p for p in path) or "<root>"


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    """Parse and validate a scenario document."""
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{source}: invalid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ScenarioError(f"{source}: scenario must be a mapping")
    rd = _Reader(data, _line_map(node), source)

    k = rd.integer(("dimension",), lo=1)
    pos_raw = rd.seq(("positions",))
    n = len(pos_raw)
    if n < 1:
        rd.fail(("positions",), "at least one agent is required")
    positions = []
    for a in range(n):
        row = rd.seq(("positions", a), length=k)
        positions.append(tuple(rd.number(("positions", a, c)) for c in range(k)))

    edges, seen = [], {}
    for e, _ in enumerate(rd.seq(("edges",))):
        rd.seq(("edges", e), length=3)
        i = rd.integer(("edges", e, 0), lo=1, hi=n) - 1
        j = rd.integer(("edges", e, 1), lo=1, hi=n) - 1
        d = rd.number(("edges", e, 2), positive=True)
        if i == j:
            rd.fail(("edges", e), f"self-loop at vertex {i + 1}")
        key = (min(i, j), max(i, j))
        if key in seen:
            rd.fail(("edges", e), f"duplicate edge ({key[0] + 1}, {key[1] + 1})")
        seen[key] = d
        edges.append((key[0], key[1], d))

    clique = None
    if rd.get(("clique",), None) is not None:
        clique = tuple(rd.integer(("clique", c), lo=1, hi=n) - 1 for c in range(len(rd.seq(("clique",)))))
        if len(clique) != k + 1:
            rd.fail(("clique",), f"a clique in dimension {k} needs {k + 1} members, got {len(clique)}")
        if len(set(clique)) != len(clique):
            rd.fail(("clique",), "clique members must be distinct")
        for a in range(len(clique)):
            for b in range(a + 1, len(clique)):
                key = (min(clique[a], clique[b]), max(clique[a], clique[b]))
                if key not in seen:
                    rd.fail(("clique",), f"clique is not complete: missing edge ({key[0] + 1}, {key[1] + 1})")

    family = rd.get(("law", "family"), "linear")
    if family not in ("linear", "squared"):
        rd.fail(("law", "family"), f"unknown law family {family!r} (expected linear or squared)")
    gain = rd.number(("law", "gain"), value=rd.get(("law", "gain"), 1.0), positive=True)

    target = None
    if rd.get(("target",), None) is not None:
        trans = tuple(rd.number(("target", "translation", c)) for c in range(len(rd.seq(("target", "translation"), k))))
        angle = rd.get(("target", "angle_deg"), None)
        if angle is not None:
            if k != 2:
                rd.fail(("target", "angle_deg"), "angle_deg is only available for dimension 2")
            angle = rd.number(("target", "angle_deg"))
            rot = SEElement.planar(np.deg2rad(angle)).rotation
        else:
            rd.seq(("target", "rotation"), k)
            rot = np.array([[rd.number(("target", "rotation", a, b)) for b in range(len(rd.seq(("target", "rotation", a), k)))] for a in range(k)])
            if np.max(np.abs(rot.T @ rot - np.eye(k))) > 1e-8 or abs(np.linalg.det(rot) - 1) > 1e-8:
                rd.fail(("target", "rotation"), "target rotation is not a proper rotation matrix")
        target = TargetSpec(tuple(tuple(float(x) for x in row) for row in rot), trans, angle)

    rate = rd.number(("steering", "rate"), value=rd.get(("steering", "rate"), None), positive=True, allow_none=True)
    epsilon = rd.number(("steering", "epsilon"), value=rd.get(("steering", "epsilon"), None), positive=True, allow_none=True)
    refine = rd.get(("steering", "refine"), False)
    if not isinstance(refine, bool):
        rd.fail(("steering", "refine"), "'steering.refine' must be true or false")

    pert = None
    if rd.get(("perturbation",), None) is not None:
        if rd.get(("perturbation", "offsets"), None) is not None:
            offs = []
            for e, _ in enumerate(rd.seq(("perturbation", "offsets"))):
                rd.seq(("perturbation", "offsets", e), length=3)
                i = rd.integer(("perturbation", "offsets", e, 0), lo=1, hi=n) - 1
                j = rd.integer(("perturbation", "offsets", e, 1), lo=1, hi=n) - 1
                if (min(i, j), max(i, j)) not in seen:
                    rd.fail(("perturbation", "offsets", e), f"offset on ({i + 1}, {j + 1}) which is not an edge")
                offs.append((i, j, rd.number(("perturbation", "offsets", e, 2))))
            pert = PerturbationSpec(offsets=tuple(offs))
        else:
            mag = rd.number(("perturbation", "magnitude"))
            if mag < 0:
                rd.fail(("perturbation", "magnitude"), "magnitude must be nonnegative")
            seed = rd.integer(("perturbation", "seed"), lo=0, value=rd.get(("perturbation", "seed"), 0))
            pert = PerturbationSpec(magnitude=mag, seed=seed)

    defaults = IntegratorSpec()
    integ = IntegratorSpec(
        step=rd.number(("integrator", "step"), value=rd.get(("integrator", "step"), None), positive=True, allow_none=True),
        initial_step=rd.number(("integrator", "initial_step"), value=rd.get(("integrator", "initial_step"), defaults.initial_step), positive=True),
        refine_tol=rd.number(("integrator", "refine_tol"), value=rd.get(("integrator", "refine_tol"), defaults.refine_tol), positive=True),
        stride=rd.integer(("integrator", "stride"), lo=1, value=rd.get(("integrator", "stride"), defaults.stride)),
        settle_tol=rd.number(("integrator", "settle_tol"), value=rd.get(("integrator", "settle_tol"), defaults.settle_tol), positive=True),
        horizon=rd.number(("integrator", "horizon"), value=rd.get(("integrator", "horizon"), defaults.horizon), positive=True),
    )

    name = rd.get(("name",), Path(source).stem if source != "<scenario>" else "scenario")
    return Scenario(
        dimension=k,
        positions=tuple(positions),
        edges=tuple(edges),
        clique=clique,
        law_family=family,
        law_gain=gain,
        name=str(name),
        target=target,
        rate=rate,
        epsilon=epsilon,
        refine=refine,
        perturbation=pert,
        integrator=integ,
    )


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read: {exc.strerror}") from None
    return parse_scenario(text, str(path))


def scenario_to_dict(sc: Scenario) -> dict[str, Any]:
    """Plain-data form with 1-based labels, suitable for YAML."""
    out: dict[str, Any] = {
        "name": sc.name,
        "dimension": sc.dimension,
        "positions": [list(row) for row in sc.positions],
        "edges": [[i + 1, j + 1, d] for i, j, d in sc.edges],
        "law": {"family": sc.law_family, "gain": sc.law_gain},
    }
    if sc.clique is not None:
        out["clique"] = [c + 1 for c in sc.clique]
    if sc.target is not None:
        if sc.target.angle_deg is not None:
            out["target"] = {"angle_deg": sc.target.angle_deg, "translation": list(sc.target.translation)}
        else:
            out["target"] = {"rotation": [list(r) for r in sc.target.rotation], "translation": list(sc.target.translation)}
    steering = {}
    if sc.rate is not None:
        steering["rate"] = sc.rate
    if sc.epsilon is not None:
        steering["epsilon"] = sc.epsilon
    steering["refine"] = sc.refine
    out["steering"] = steering
    if sc.perturbation is not None:
        if sc.perturbation.offsets is not None:
            out["perturbation"] = {"offsets": [[i + 1, j + 1, c] for i, j, c in sc.perturbation.offsets]}
        else:
            out["perturbation"] = {"magnitude": sc.perturbation.magnitude, "seed": sc.perturbation.seed}
    it = sc.integrator
    out["integrator"] = {
        "step": it.step,
        "initial_step": it.initial_step,
        "refine_tol": it.refine_tol,
        "stride": it.stride,
        "settle_tol": it.settle_tol,
        "horizon": it.horizon,
    }
    return out


def export_scenario(sc: Scenario) -> str:
    """YAML text that parses back to ``sc``."""
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False, default_flow_style=None)


def with_overrides(sc: Scenario, rate=None, epsilon=None, refine=None, seed=None) -> Scenario:
    changes = {}
    if rate is not None:
        changes["rate"] = rate
    if epsilon is not None:
        changes["epsilon"] = epsilon
    if refine:
        changes["refine"] = True
    if seed is not None and sc.perturbation is not None and sc.perturbation.offsets is None:
        changes["perturbation"] = replace(sc.perturbation, seed=seed)
    return replace(sc, **changes) if changes else sc
