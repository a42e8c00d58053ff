"""
Rigid motions SE(k) and their generators se(k).

A configuration of n agents in R^k is stored as a float array of shape (n, k);
row i is the position x_i. Flattening in C order gives the stacked vector
(x_1, ..., x_n) in R^{kn} used by the vector fields and Hessians.

Group elements act by (theta, b) . p = (theta x_1 + b, ..., theta x_n + b) and
compose as a . b = (theta_a theta_b, theta_a b_b + b_a).

The exponential, the logarithm and the integrated exponential
(exp(Omega t) - I) / Omega are all evaluated blockwise on the real Schur form
of the skew (or orthogonal) matrix, which is block diagonal with 2x2 rotation
blocks because both kinds of matrix are normal.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import factorial

import numpy as np
from scipy import linalg as sla

from .errors import BranchSingularity, DimensionMismatch, NonOrthogonal, RankDeficient

ORTHO_TOL = 1e-8
PI_GUARD = 1e-6


def as_configuration(p, k: int | None = None) -> np.ndarray:
    """Validate ``p`` and return it as a float array of shape (n, k)."""
    arr = np.asarray(p, dtype=float)
    if arr.ndim == 1 and k is not None:
        if arr.size % k:
            raise DimensionMismatch(f"vector of length {arr.size} is not a multiple of k={k}")
        arr = arr.reshape(-1, k)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionMismatch(f"configuration must have shape (n, k), got {arr.shape}")
    if k is not None and arr.shape[1] != k:
        raise DimensionMismatch(f"configuration has k={arr.shape[1]}, expected {k}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("configuration has non-finite coordinates")
    return arr


def skew_dim(k: int) -> int:
    """Dimension k(k-1)/2 of so(k)."""
    return k * (k - 1) // 2


def se_dim(k: int) -> int:
    """Dimension k(k+1)/2 of se(k), which is also the dimension of a full-rank orbit."""
    return k * (k + 1) // 2


def skew_basis(k: int) -> list[np.ndarray]:
    """Basis E_ab - E_ba of so(k), pairs (a, b) with a < b in lexicographic order."""
    out = []
    for a in range(k):
        for b in range(a + 1, k):
            m = np.zeros((k, k))
            m[a, b] = 1.0
            m[b, a] = -1.0
            out.append(m)
    return out


def _skew(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m - m.T)


@dataclass(frozen=True, eq=False)
class SEElement:
    """Rigid motion x -> rotation @ x + translation."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        rot = np.array(self.rotation, dtype=float)
        trans = np.array(self.translation, dtype=float).reshape(-1)
        if rot.ndim != 2 or rot.shape[0] != rot.shape[1] or rot.shape[0] != trans.size:
            raise DimensionMismatch(
                f"rotation {rot.shape} and translation {trans.shape} do not describe SE(k)"
            )
        rot.setflags(write=False)
        trans.setflags(write=False)
        object.__setattr__(self, "rotation", rot)
        object.__setattr__(self, "translation", trans)
        self.check()

    @property
    def k(self) -> int:
        return self.translation.size

    @classmethod
    def identity(cls, k: int) -> "SEElement":
        return cls(np.eye(k), np.zeros(k))

    @classmethod
    def planar(cls, angle: float, translation=(0.0, 0.0)) -> "SEElement":
        """Element of SE(2) from a rotation angle in radians."""
        c, s = np.cos(angle), np.sin(angle)
        return cls(np.array([[c, -s], [s, c]]), np.asarray(translation, dtype=float))

    def check(self, tol: float = ORTHO_TOL) -> None:
        """Raise NonOrthogonal unless rotation is in SO(k) within ``tol``."""
        r = self.rotation
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(self.translation)):
            raise NonOrthogonal("non-finite group element")
        if np.max(np.abs(r.T @ r - np.eye(self.k))) > tol:
            raise NonOrthogonal("rotation is not orthogonal")
        if abs(np.linalg.det(r) - 1.0) > tol:
            raise NonOrthogonal("rotation has determinant != +1")

    def inverse(self) -> "SEElement":
        rt = self.rotation.T
        return SEElement(rt, -rt @ self.translation)

    def matrix(self) -> np.ndarray:
        """Homogeneous (k+1) x (k+1) matrix [[theta, b], [0, 1]]."""
        k = self.k
        m = np.eye(k + 1)
        m[:k, :k] = self.rotation
        m[:k, k] = self.translation
        return m

    @classmethod
    def from_matrix(cls, m) -> "SEElement":
        m = np.asarray(m, dtype=float)
        k = m.shape[0] - 1
        return cls(m[:k, :k], m[:k, k])

    def allclose(self, other: "SEElement", atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.rotation, other.rotation, rtol=0, atol=atol)
            and np.allclose(self.translation, other.translation, rtol=0, atol=atol)
        )

    def __repr__(self):
        return f"SEElement(rotation={self.rotation.tolist()}, translation={self.translation.tolist()})"


@dataclass(frozen=True, eq=False)
class SEAlgebraElement:
    """Generator (omega, vel) of se(k); the induced field at x is omega @ x + vel."""

    omega: np.ndarray
    vel: np.ndarray

    def __post_init__(self):
        om = np.array(self.omega, dtype=float)
        v = np.array(self.vel, dtype=float).reshape(-1)
        if om.ndim != 2 or om.shape[0] != om.shape[1] or om.shape[0] != v.size:
            raise DimensionMismatch(f"omega {om.shape} and vel {v.shape} do not describe se(k)")
        # store the exact skew part so omega + omega.T == 0 holds bitwise
        upper = np.triu(om, 1) - np.triu(om.T, 1)
        om = 0.5 * upper - 0.5 * upper.T
        om.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "vel", v)

    @property
    def k(self) -> int:
        return self.vel.size

    @classmethod
    def zero(cls, k: int) -> "SEAlgebraElement":
        return cls(np.zeros((k, k)), np.zeros(k))

    def to_vector(self) -> np.ndarray:
        """Coordinates (omega_ab for a < b, then vel) of length k(k+1)/2."""
        iu = np.triu_indices(self.k, 1)
        return np.concatenate([self.omega[iu], self.vel])

    @classmethod
    def from_vector(cls, vec, k: int) -> "SEAlgebraElement":
        vec = np.asarray(vec, dtype=float)
        if vec.size != se_dim(k):
            raise DimensionMismatch(f"se({k}) coordinates need {se_dim(k)} entries, got {vec.size}")
        nw = skew_dim(k)
        om = np.zeros((k, k))
        om[np.triu_indices(k, 1)] = vec[:nw]
        return cls(om - om.T, vec[nw:])

    def matrix(self) -> np.ndarray:
        """Augmented (k+1) x (k+1) matrix [[omega, vel], [0, 0]]."""
        k = self.k
        m = np.zeros((k + 1, k + 1))
        m[:k, :k] = self.omega
        m[:k, k] = self.vel
        return m

    def field(self, p) -> np.ndarray:
        """Tangent field (omega x_i + vel)_i at configuration ``p``, shape (n, k)."""
        p = as_configuration(p, self.k)
        return p @ self.omega.T + self.vel

    def norm(self) -> float:
        return float(np.linalg.norm(self.to_vector()))

    def __add__(self, other: "SEAlgebraElement") -> "SEAlgebraElement":
        return SEAlgebraElement(self.omega + other.omega, self.vel + other.vel)

    def __sub__(self, other: "SEAlgebraElement") -> "SEAlgebraElement":
        return SEAlgebraElement(self.omega - other.omega, self.vel - other.vel)

    def __mul__(self, s: float) -> "SEAlgebraElement":
        return SEAlgebraElement(s * self.omega, s * self.vel)

    __rmul__ = __mul__

    def __neg__(self) -> "SEAlgebraElement":
        return self * -1.0

    def __repr__(self):
        return f"SEAlgebraElement(omega={self.omega.tolist()}, vel={self.vel.tolist()})"


def se_compose(a: SEElement, b: SEElement) -> SEElement:
    """Product a . b; ``a`` is applied after ``b``."""
    if a.k != b.k:
        raise DimensionMismatch(f"cannot compose SE({a.k}) with SE({b.k})")
    return SEElement(a.rotation @ b.rotation, a.rotation @ b.translation + a.translation)


def se_act(a: SEElement, p) -> np.ndarray:
    """Apply the rigid motion ``a`` to every agent of ``p``."""
    p = as_configuration(p)
    if p.shape[1] != a.k:
        raise DimensionMismatch(f"SE({a.k}) cannot act on a configuration in R^{p.shape[1]}")
    return p @ a.rotation.T + a.translation


def _schur_blocks(t: np.ndarray, tol: float = 1e-12) -> list[tuple[int, int]]:
    """(start, size) of the diagonal blocks of a real quasi-triangular Schur factor."""
    k = t.shape[0]
    scale = max(1.0, float(np.max(np.abs(t))))
    blocks, i = [], 0
    while i < k:
        if i + 1 < k and abs(t[i + 1, i]) > tol * scale:
            blocks.append((i, 2))
            i += 2
        else:
            blocks.append((i, 1))
            i += 1
    return blocks


def _normal_schur(m: np.ndarray):
    t, z = sla.schur(m, output="real")
    return t, z, _schur_blocks(t)


def _phi_block(w: float, t: float) -> np.ndarray:
    """Integral from 0 to t of the 2x2 rotation by angle w*s."""
    wt = w * t
    if abs(wt) < 1e-4:
        # series in wt avoids the 0/0 of sin(wt)/w
        s = t * (1.0 - wt**2 / 6.0 + wt**4 / 120.0)
        c = t * (wt / 2.0 - wt**3 / 24.0 + wt**5 / 720.0)
    else:
        s = np.sin(wt) / w
        c = (1.0 - np.cos(wt)) / w
    return np.array([[s, -c], [c, s]])


def _exp_and_phi(omega: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    k = omega.shape[0]
    if not np.any(omega):
        return np.eye(k), t * np.eye(k)
    tq, z, blocks = _normal_schur(_skew(omega))
    e = np.zeros((k, k))
    ph = np.zeros((k, k))
    for start, size in blocks:
        sl = slice(start, start + size)
        if size == 1:
            # skew matrices have zero real eigenvalues
            e[sl, sl] = 1.0
            ph[sl, sl] = t
        else:
            w = 0.5 * (tq[start + 1, start] - tq[start, start + 1])
            c, s = np.cos(w * t), np.sin(w * t)
            e[sl, sl] = [[c, -s], [s, c]]
            ph[sl, sl] = _phi_block(w, t)
    return z @ e @ z.T, z @ ph @ z.T


def so_exp(omega, t: float = 1.0) -> np.ndarray:
    """exp(omega t) for skew ``omega``."""
    return _exp_and_phi(np.asarray(omega, dtype=float), float(t))[0]


def phi_series(omega, t: float = 1.0) -> np.ndarray:
    """(exp(omega t) - I) / omega, i.e. I t + omega t^2/2! + omega^2 t^3/3! + ...

    Well defined for every skew ``omega`` including zero.
    """
    return _exp_and_phi(np.asarray(omega, dtype=float), float(t))[1]


def phi_series_truncated(omega, t: float, terms: int) -> np.ndarray:
    """Partial sum of the defining power series with ``terms`` terms."""
    omega = np.asarray(omega, dtype=float)
    k = omega.shape[0]
    acc = np.zeros((k, k))
    power = np.eye(k)
    for m in range(terms):
        acc += power * t ** (m + 1) / factorial(m + 1)
        power = power @ omega
    return acc


def se_exp(g: SEAlgebraElement, t: float = 1.0) -> SEElement:
    """Group element reached after time ``t`` along the generator ``g``."""
    e, ph = _exp_and_phi(g.omega, float(t))
    return SEElement(e, ph @ g.vel)


def se_log(a: SEElement) -> SEAlgebraElement:
    """Principal logarithm; the inverse of ``se_exp(., 1)`` for rotation angles below pi."""
    a.check()
    k = a.k
    tq, z, blocks = _normal_schur(a.rotation)
    lg = np.zeros((k, k))
    for start, size in blocks:
        if size == 1:
            if tq[start, start] < 0:
                raise BranchSingularity("rotation has eigenvalue -1 (angle pi)")
            continue
        blk = tq[start : start + 2, start : start + 2]
        w = np.arctan2(0.5 * (blk[1, 0] - blk[0, 1]), 0.5 * (blk[0, 0] + blk[1, 1]))
        if np.pi - abs(w) < PI_GUARD:
            raise BranchSingularity(f"rotation angle {abs(w):.9f} is within {PI_GUARD} of pi")
        lg[start, start + 1] = -w
        lg[start + 1, start] = w
    omega = _skew(z @ lg @ z.T)
    vel = np.linalg.solve(phi_series(omega, 1.0), a.translation)
    return SEAlgebraElement(omega, vel)


def config_rank(p) -> int:
    """Dimension of span{x_2 - x_1, ..., x_n - x_1}."""
    p = as_configuration(p)
    n = p.shape[0]
    if n == 1:
        return 0
    sv = np.linalg.svd((p[1:] - p[0]).T, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > sv[0] * n * 1e-10))


def orbit_distance(p, q) -> tuple[float, SEElement]:
    """min over rigid motions a of ||p - a . q||, and the minimising a.

    Centroid alignment followed by orthogonal Procrustes restricted to SO(k).
    """
    p = as_configuration(p)
    q = as_configuration(q, p.shape[1])
    if p.shape != q.shape:
        raise DimensionMismatch(f"configurations {p.shape} and {q.shape} differ")
    k = p.shape[1]
    pc, qc = p.mean(axis=0), q.mean(axis=0)
    cross = (q - qc).T @ (p - pc)
    u, _, vt = np.linalg.svd(cross)
    d = np.ones(k)
    if np.linalg.det(vt.T @ u.T) < 0:
        d[-1] = -1.0
    rot = vt.T @ np.diag(d) @ u.T
    aligner = SEElement(rot, pc - rot @ qc)
    return float(np.linalg.norm(p - se_act(aligner, q))), aligner


def _tangent_matrix(q: np.ndarray) -> np.ndarray:
    """Columns are the fields (E x_i + e)_i of the se(k) coordinate basis, flattened."""
    n, k = q.shape
    cols = [(q @ om.T).reshape(-1) for om in skew_basis(k)]
    for ax in range(k):
        v = np.zeros((n, k))
        v[:, ax] = 1.0
        cols.append(v.reshape(-1))
    return np.column_stack(cols)


def tangent_basis(q) -> np.ndarray:
    """Orthonormal basis of the tangent space of the orbit through ``q``.

    Returned as a (kn, k(k+1)/2) array whose columns are the basis vectors.
    """
    q = as_configuration(q)
    if config_rank(q) < q.shape[1]:
        raise RankDeficient("tangent space of the orbit needs a full-rank configuration")
    basis, _ = np.linalg.qr(_tangent_matrix(q))
    return basis


def normal_basis(q) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of the orbit tangent space."""
    t = tangent_basis(q)
    u, _, _ = np.linalg.svd(t, full_matrices=True)
    return u[:, t.shape[1] :]


def transport_generator(g: SEAlgebraElement, a: SEElement) -> SEAlgebraElement:
    """Generator of the same rigid field seen at a . p instead of p."""
    if g.k != a.k:
        raise DimensionMismatch("generator and group element have different k")
    om = a.rotation @ g.omega @ a.rotation.T
    return SEAlgebraElement(om, a.rotation @ g.vel - om @ a.translation)


def fit_generator(p, field) -> tuple[SEAlgebraElement, float]:
    """Least-squares (Omega, v) with field_i ~ Omega x_i + v, and the residual norm."""
    p = as_configuration(p)
    k = p.shape[1]
    if config_rank(p) < k:
        raise RankDeficient("rigid fit is unique only at a full-rank configuration")
    target = np.asarray(field, dtype=float).reshape(-1)
    if target.size != p.size:
        raise DimensionMismatch(f"field of size {target.size} does not match configuration {p.shape}")
    design = _tangent_matrix(p)
    coef, *_ = np.linalg.lstsq(design, target, rcond=None)
    resid = float(np.linalg.norm(target - design @ coef))
    return SEAlgebraElement.from_vector(coef, k), resid
