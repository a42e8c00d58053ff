"""
Formation graphs, interaction laws and the distance-based formation field.

Agent i moves with

    dx_i/dt = sum_{j in N_i} [f_ij(||x_j - x_i||) + c_ij] (x_j - x_i)

where f_ij is the interaction law of edge {i, j} and c_ij a constant offset on
the directed edge i -> j (perturbations and clique controls are both offsets).
With no offsets the field is the descent flow f = -grad Phi of

    Phi(p) = sum_{(i,j) in E} int_1^{||x_j - x_i||} x f_ij(x) dx.

Vertex indices are 0-based throughout the library.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import integrate

from .errors import DimensionMismatch, NonReciprocal, RankDeficient, SupportViolation
from .liegroup import SEAlgebraElement, as_configuration, config_rank, se_dim

Edge = tuple[int, int]


@dataclass(frozen=True)
class FormationGraph:
    """Undirected graph with a positive target length on every edge.

    ``edges`` are stored as sorted pairs (i, j) with i < j, in sorted order, and
    ``target_lengths[e]`` belongs to ``edges[e]``.
    """

    n: int
    edges: tuple[Edge, ...]
    target_lengths: tuple[float, ...]

    def __post_init__(self):
        if len(self.edges) != len(self.target_lengths):
            raise ValueError("one target length is needed per edge")
        pairs = {}
        for (i, j), d in zip(self.edges, self.target_lengths):
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-loop at vertex {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise ValueError(f"edge ({i}, {j}) has a vertex outside 0..{self.n - 1}")
            key = (min(i, j), max(i, j))
            if key in pairs:
                raise ValueError(f"duplicate edge {key}")
            if not (np.isfinite(d) and d > 0):
                raise ValueError(f"edge {key} needs a positive target length, got {d}")
            pairs[key] = float(d)
        order = sorted(pairs)
        object.__setattr__(self, "edges", tuple(order))
        object.__setattr__(self, "target_lengths", tuple(pairs[e] for e in order))

    @classmethod
    def from_lengths(cls, n: int, lengths: Mapping[Edge, float]) -> "FormationGraph":
        return cls(n, tuple(lengths), tuple(lengths.values()))

    @classmethod
    def from_configuration(cls, edges: Iterable[Edge], q) -> "FormationGraph":
        """Graph whose target lengths are met exactly by ``q``."""
        q = as_configuration(q)
        edges = list(edges)
        d = [float(np.linalg.norm(q[j] - q[i])) for i, j in edges]
        return cls(q.shape[0], tuple(edges), tuple(d))

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def tails(self) -> np.ndarray:
        return np.array([e[0] for e in self.edges], dtype=int)

    @cached_property
    def heads(self) -> np.ndarray:
        return np.array([e[1] for e in self.edges], dtype=int)

    @cached_property
    def dbar(self) -> np.ndarray:
        return np.array(self.target_lengths)

    @cached_property
    def _index(self) -> dict[Edge, int]:
        return {e: idx for idx, e in enumerate(self.edges)}

    @cached_property
    def _scatter(self) -> tuple[np.ndarray, np.ndarray]:
        tail = np.zeros((self.n, self.m))
        head = np.zeros((self.n, self.m))
        tail[self.tails, np.arange(self.m)] = 1.0
        head[self.heads, np.arange(self.m)] = 1.0
        return tail, head

    def edge_index(self, i: int, j: int) -> int:
        """Position of the undirected edge {i, j} in ``edges``."""
        try:
            return self._index[(min(i, j), max(i, j))]
        except KeyError:
            raise KeyError(f"({i}, {j}) is not an edge") from None

    def has_edge(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self._index

    def directed_edges(self) -> list[Edge]:
        """Every edge in both directions: (i, j) then (j, i) for each stored edge."""
        out = []
        for i, j in self.edges:
            out.append((i, j))
            out.append((j, i))
        return out

    def edge_lengths(self, p) -> np.ndarray:
        p = as_configuration(p)
        return np.linalg.norm(p[self.heads] - p[self.tails], axis=1)


@dataclass(frozen=True)
class CliqueSpec:
    """Ordered list of k+1 vertices that are pairwise adjacent."""

    members: tuple[int, ...]

    def __post_init__(self):
        mem = tuple(int(i) for i in self.members)
        if len(set(mem)) != len(mem):
            raise ValueError(f"clique members must be distinct, got {mem}")
        object.__setattr__(self, "members", mem)

    def edges(self) -> list[Edge]:
        """Clique edges (members[a], members[b]) for a < b, as vertex pairs."""
        mem = self.members
        return [(mem[a], mem[b]) for a in range(len(mem)) for b in range(a + 1, len(mem))]

    def directed_edges(self) -> list[Edge]:
        out = []
        for i, j in self.edges():
            out.append((i, j))
            out.append((j, i))
        return out

    def validate(self, graph: FormationGraph, p=None) -> None:
        """Check completeness in ``graph`` and, if ``p`` is given, full rank of the sub-configuration."""
        for i, j in self.edges():
            if not graph.has_edge(i, j):
                raise ValueError(f"clique is not complete: missing edge ({i}, {j})")
        if p is not None:
            p = as_configuration(p)
            k = p.shape[1]
            if len(self.members) != k + 1:
                raise ValueError(f"a clique in R^{k} needs {k + 1} members, got {len(self.members)}")
            if config_rank(p[list(self.members)]) < k:
                raise RankDeficient("clique sub-configuration is not of full rank")


@dataclass(frozen=True)
class InteractionLaw:
    """Scalar interaction law f(x; dbar) applied along an edge.

    Families:
      ``linear``   f(x) = gain * (x - dbar)
      ``squared``  f(x) = gain * (x**2 - dbar**2)
      ``custom``   f(x) = func(x, dbar) for a user callable
    Only ``linear`` has a closed-form potential and an analytic Jacobian; the
    other families use quadrature and central differences.
    """

    family: str = "linear"
    gain: float = 1.0
    func: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.family not in ("linear", "squared", "custom"):
            raise ValueError(f"unknown law family {self.family!r}")
        if self.family == "custom" and self.func is None:
            raise ValueError("custom law needs func")
        if self.family != "custom" and not self.gain > 0:
            raise ValueError("gain must be positive")

    @property
    def is_linear(self) -> bool:
        return self.family == "linear"

    def __call__(self, x, dbar):
        x = np.asarray(x, dtype=float)
        if self.family == "linear":
            return self.gain * (x - dbar)
        if self.family == "squared":
            return self.gain * (x * x - np.asarray(dbar) ** 2)
        return np.asarray(self.func(x, dbar), dtype=float)

    def slope(self, x, dbar):
        """Derivative in x (linear family only)."""
        return np.full_like(np.asarray(x, dtype=float), self.gain)

    def potential_term(self, x: float, dbar: float) -> float:
        """int_1^x s f(s) ds."""
        if self.family == "linear":
            return self.gain * ((x**3 - 1.0) / 3.0 - dbar * (x**2 - 1.0) / 2.0)
        val, _ = integrate.quad(lambda s: s * float(self(s, dbar)), 1.0, x, epsabs=1e-13, epsrel=1e-12)
        return val


Laws = InteractionLaw | Sequence[InteractionLaw] | Mapping[Edge, InteractionLaw]
LINEAR = InteractionLaw()


def _per_edge_laws(graph: FormationGraph, laws: Laws | None) -> list[InteractionLaw] | InteractionLaw:
    if laws is None:
        return LINEAR
    if isinstance(laws, InteractionLaw):
        return laws
    if isinstance(laws, Mapping):
        out = []
        for i, j in graph.edges:
            law = laws.get((i, j), laws.get((j, i)))
            if law is None:
                raise ValueError(f"no interaction law for edge ({i}, {j})")
            out.append(law)
        return out
    out = list(laws)
    if len(out) != graph.m:
        raise ValueError(f"expected {graph.m} laws, got {len(out)}")
    return out


def _law_values(graph: FormationGraph, laws, r: np.ndarray) -> np.ndarray:
    laws = _per_edge_laws(graph, laws)
    if isinstance(laws, InteractionLaw):
        return np.asarray(laws(r, graph.dbar), dtype=float)
    return np.array([float(law(r[e], graph.dbar[e])) for e, law in enumerate(laws)])


def _all_linear(graph: FormationGraph, laws) -> bool:
    laws = _per_edge_laws(graph, laws)
    if isinstance(laws, InteractionLaw):
        return laws.is_linear
    return all(law.is_linear for law in laws)


def _law_slopes(graph: FormationGraph, laws, r: np.ndarray) -> np.ndarray:
    laws = _per_edge_laws(graph, laws)
    if isinstance(laws, InteractionLaw):
        return laws.slope(r, graph.dbar)
    return np.array([float(law.slope(r[e], graph.dbar[e])) for e, law in enumerate(laws)])


class OffsetField:
    """Constant offsets c_ij on directed edges i -> j.

    ``support`` is the set of directed edges allowed to carry a nonzero value;
    entries outside it are rejected. Missing entries inside it are zero.
    """

    def __init__(self, values: Mapping[Edge, float] | None = None, support: Iterable[Edge] | None = None):
        vals = {(int(i), int(j)): float(c) for (i, j), c in (values or {}).items()}
        self.support = frozenset((int(i), int(j)) for i, j in support) if support is not None else None
        if self.support is not None:
            for e, c in vals.items():
                if e not in self.support and c != 0.0:
                    raise SupportViolation(f"offset on {e} lies outside the declared support")
        self.values = {e: c for e, c in vals.items() if c != 0.0}

    @classmethod
    def zeros(cls, support: Iterable[Edge] | None = None) -> "OffsetField":
        return cls({}, support)

    @classmethod
    def on_graph(cls, graph: FormationGraph, values: Mapping[Edge, float] | None = None) -> "OffsetField":
        return cls(values, graph.directed_edges())

    @classmethod
    def on_clique(cls, clique: CliqueSpec, values: Mapping[Edge, float] | None = None) -> "OffsetField":
        return cls(values, clique.directed_edges())

    def __getitem__(self, e: Edge) -> float:
        return self.values.get((int(e[0]), int(e[1])), 0.0)

    def norm(self) -> float:
        """max |c_ij|."""
        return max((abs(c) for c in self.values.values()), default=0.0)

    def is_zero(self) -> bool:
        return not self.values

    def is_reciprocal(self, tol: float = 0.0) -> bool:
        return all(abs(c - self[(j, i)]) <= tol for (i, j), c in self.values.items())

    def _merged_support(self, other: "OffsetField"):
        if self.support is None or other.support is None:
            return None
        return self.support | other.support

    def __add__(self, other: "OffsetField") -> "OffsetField":
        keys = set(self.values) | set(other.values)
        return OffsetField({e: self[e] + other[e] for e in keys}, self._merged_support(other))

    def __mul__(self, s: float) -> "OffsetField":
        return OffsetField({e: s * c for e, c in self.values.items()}, self.support)

    __rmul__ = __mul__

    def __sub__(self, other: "OffsetField") -> "OffsetField":
        return self + other * -1.0

    def __eq__(self, other):
        return isinstance(other, OffsetField) and self.values == other.values and self.support == other.support

    def __repr__(self):
        return f"OffsetField({dict(sorted(self.values.items()))})"

    def check_against(self, graph: FormationGraph) -> None:
        for i, j in self.values:
            if not graph.has_edge(i, j):
                raise SupportViolation(f"offset on ({i}, {j}) but {{{i}, {j}}} is not an edge")

    def edge_arrays(self, graph: FormationGraph) -> tuple[np.ndarray, np.ndarray]:
        """(forward, backward) offsets aligned with ``graph.edges``: c_ij and c_ji for i < j."""
        self.check_against(graph)
        fwd = np.zeros(graph.m)
        bwd = np.zeros(graph.m)
        for (i, j), c in self.values.items():
            e = graph.edge_index(i, j)
            if i < j:
                fwd[e] += c
            else:
                bwd[e] += c
        return fwd, bwd


def _offset_arrays(graph, *offsets) -> tuple[np.ndarray, np.ndarray]:
    fwd = np.zeros(graph.m)
    bwd = np.zeros(graph.m)
    for off in offsets:
        if off is None:
            continue
        f, b = off.edge_arrays(graph)
        fwd += f
        bwd += b
    return fwd, bwd


def _check_config(graph: FormationGraph, p) -> np.ndarray:
    p = as_configuration(p)
    if p.shape[0] != graph.n:
        raise DimensionMismatch(f"graph has {graph.n} vertices, configuration has {p.shape[0]} agents")
    return p


def vector_field(
    graph: FormationGraph,
    laws: Laws | None,
    p,
    perturbation: OffsetField | None = None,
    control: OffsetField | None = None,
) -> np.ndarray:
    """Formation velocity at ``p``, shape (n, k)."""
    p = _check_config(graph, p)
    fwd, bwd = _offset_arrays(graph, perturbation, control)
    diff = p[graph.heads] - p[graph.tails]
    r = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    base = _law_values(graph, laws, r)
    tail, head = graph._scatter
    return tail @ ((base + fwd)[:, None] * diff) - head @ ((base + bwd)[:, None] * diff)


def offset_field(graph: FormationGraph, p, offsets: OffsetField) -> np.ndarray:
    """The field h(p) produced by offsets alone: sum_j c_ij (x_j - x_i)."""
    p = _check_config(graph, p)
    fwd, bwd = offsets.edge_arrays(graph)
    diff = p[graph.heads] - p[graph.tails]
    tail, head = graph._scatter
    return tail @ (fwd[:, None] * diff) - head @ (bwd[:, None] * diff)


def potential(graph: FormationGraph, laws: Laws | None, p, perturbation: OffsetField | None = None) -> float:
    """Phi(p); a reciprocal offset c_ij = c_ji is folded into the law of its edge."""
    p = _check_config(graph, p)
    if perturbation is not None and not perturbation.is_reciprocal(tol=0.0):
        raise NonReciprocal("a potential exists only for reciprocal interactions")
    fwd = _offset_arrays(graph, perturbation)[0]
    r = graph.edge_lengths(p)
    per = _per_edge_laws(graph, laws)
    total = 0.0
    for e in range(graph.m):
        law = per if isinstance(per, InteractionLaw) else per[e]
        d = graph.dbar[e]
        total += law.potential_term(r[e], d)
        total += fwd[e] * (r[e] ** 2 - 1.0) / 2.0
    return float(total)


def rigidity_matrix(graph: FormationGraph, p) -> np.ndarray:
    """|E| x kn matrix; row e has (x_i - x_j) in block i and (x_j - x_i) in block j."""
    p = _check_config(graph, p)
    n, k = p.shape
    if config_rank(p) < k:
        raise RankDeficient("rigidity test needs a full-rank configuration")
    out = np.zeros((graph.m, n * k))
    for e, (i, j) in enumerate(graph.edges):
        out[e, i * k : (i + 1) * k] = p[i] - p[j]
        out[e, j * k : (j + 1) * k] = p[j] - p[i]
    return out


def is_infinitesimally_rigid(graph: FormationGraph, p) -> bool:
    p = _check_config(graph, p)
    n, k = p.shape
    return int(np.linalg.matrix_rank(rigidity_matrix(graph, p))) == n * k - se_dim(k)


def field_jacobian(
    graph: FormationGraph,
    laws: Laws | None,
    p,
    perturbation: OffsetField | None = None,
    control: OffsetField | None = None,
) -> np.ndarray:
    """d(vector_field)/dp as a kn x kn matrix (stacked ordering)."""
    p = _check_config(graph, p)
    n, k = p.shape
    if not _all_linear(graph, laws):
        return _fd_jacobian(lambda x: vector_field(graph, laws, x, perturbation, control), p)
    fwd, bwd = _offset_arrays(graph, perturbation, control)
    diff = p[graph.heads] - p[graph.tails]
    r = np.linalg.norm(diff, axis=1)
    base = _law_values(graph, laws, r)
    slope = _law_slopes(graph, laws, r)
    jac = np.zeros((n * k, n * k))
    eye = np.eye(k)
    for e, (i, j) in enumerate(graph.edges):
        d = diff[e]
        outer = np.outer(d, d) * (slope[e] / r[e]) if r[e] > 0 else np.zeros((k, k))
        kf = (base[e] + fwd[e]) * eye + outer
        kb = (base[e] + bwd[e]) * eye + outer
        si, sj = slice(i * k, (i + 1) * k), slice(j * k, (j + 1) * k)
        # row block i: +kf (x_j - x_i);  row block j: -kb (x_j - x_i)
        jac[si, sj] += kf
        jac[si, si] -= kf
        jac[sj, sj] -= kb
        jac[sj, si] += kb
    return jac


def _fd_jacobian(fun, p: np.ndarray) -> np.ndarray:
    x0 = p.reshape(-1)
    step = 1e-6 * (1.0 + np.max(np.abs(x0)))
    cols = []
    for idx in range(x0.size):
        xp = x0.copy()
        xm = x0.copy()
        xp[idx] += step
        xm[idx] -= step
        cols.append((fun(xp.reshape(p.shape)) - fun(xm.reshape(p.shape))).reshape(-1) / (2 * step))
    return np.column_stack(cols)


def hessian(
    graph: FormationGraph,
    laws: Laws | None,
    p,
    generator: SEAlgebraElement | None = None,
    perturbation: OffsetField | None = None,
    control: OffsetField | None = None,
) -> np.ndarray:
    """Negative Jacobian of the field minus its rigid part.

    With ``generator`` (Omega, v) the auxiliary rigid field Omega x_i + v is
    subtracted first, whose Jacobian is blockdiag(Omega). Without offsets and
    without a generator this is the Hessian of the potential.
    """
    jac = field_jacobian(graph, laws, p, perturbation, control)
    if generator is not None:
        jac = jac - np.kron(np.eye(graph.n), generator.omega)
    return -jac


class Stability(str, enum.Enum):
    EXPONENTIALLY_STABLE = "ExponentiallyStable"
    DEGENERATE = "Degenerate"
    UNSTABLE = "Unstable"

    def __str__(self):
        return self.value


@dataclass(frozen=True, eq=False)
class StabilityReport:
    eigenvalues: np.ndarray
    zero_count: int
    classification: Stability
    zero_tol: float


def zero_tolerance(eigenvalues) -> float:
    lam = np.abs(np.asarray(eigenvalues))
    return max(1e-8, 1e-7 * float(lam.max(initial=0.0)))


def classify_spectrum(eigenvalues, k: int) -> StabilityReport:
    eig = np.asarray(eigenvalues, dtype=complex)
    eig = eig[np.lexsort((eig.imag, eig.real))]
    tol = zero_tolerance(eig)
    is_zero = np.abs(eig) < tol
    zero_count = int(is_zero.sum())
    rest = eig[~is_zero]
    if np.any(rest.real < -tol):
        cls = Stability.UNSTABLE
    elif zero_count == se_dim(k) and np.all(rest.real > tol):
        cls = Stability.EXPONENTIALLY_STABLE
    else:
        cls = Stability.DEGENERATE
    return StabilityReport(eig, zero_count, cls, tol)


def classify_orbit(
    graph: FormationGraph,
    laws: Laws | None,
    p,
    generator: SEAlgebraElement | None = None,
    perturbation: OffsetField | None = None,
    control: OffsetField | None = None,
) -> StabilityReport:
    """Classify the invariant orbit through ``p`` from the Hessian spectrum."""
    p = _check_config(graph, p)
    hess = hessian(graph, laws, p, generator, perturbation, control)
    if perturbation is None and control is None and generator is None:
        eig = np.linalg.eigvalsh(0.5 * (hess + hess.T)).astype(complex)
    else:
        eig = np.linalg.eigvals(hess)
    return classify_spectrum(eig, p.shape[1])
