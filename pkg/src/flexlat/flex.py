"""Constraint Jacobians, infinitesimal flexes and predictor-corrector tracing.

Everything works in the gauge chart: the pinned orbit sits at the origin,
``a = (a1, 0, 0)`` and ``b = (b1, b2, 0)``.  A configuration of ``n`` orbits
is then a vector of ``3n`` numbers: the positions of the ``n - 1`` free
orbits followed by ``(a1, b1, b2)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .lattice_complex import PeriodicComplex
from .realization import (EdgeLengths, GaugeFrame, GramMatrix, Realization,
                          all_edge_lengths, apply_gauge)

log = logging.getLogger(__name__)


class CorrectorError(RuntimeError):
    """Gauss-Newton projection did not reach the corrector tolerance."""


class NotOnManifoldError(ValueError):
    """Start configuration violates the length constraints."""


@dataclass(frozen=True)
class SolverSettings:
    rank_tolerance: float = 1e-8
    corrector_tolerance: float = 1e-10
    step_size: float = 1e-2
    max_corrector_iterations: int = 25

    def __post_init__(self):
        for name in ("rank_tolerance", "corrector_tolerance", "step_size",
                     "max_corrector_iterations"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


def _colmap(n: int, pinned: int) -> np.ndarray:
    cols = np.full(n, -1, dtype=np.int64)
    free = [i for i in range(n) if i != pinned]
    cols[free] = 3 * np.arange(len(free))
    return cols


@dataclass(frozen=True, eq=False)
class Configuration:
    """Gauge-chart coordinates of a realization of ``complex``."""

    complex: PeriodicComplex
    coords: np.ndarray
    pinned: int = 0

    def __post_init__(self):
        x = np.array(self.coords, dtype=float)
        if x.shape != (3 * self.complex.n_orbits,):
            raise ValueError(f"expected {3 * self.complex.n_orbits} coordinates, got {x.shape}")
        object.__setattr__(self, "coords", x)

    @classmethod
    def from_realization(cls, c: PeriodicComplex, r: Realization, pinned: int = 0) -> "Configuration":
        g = apply_gauge(r, GaugeFrame(pinned))
        free = np.delete(g.positions, pinned, axis=0).ravel()
        return cls(c, np.concatenate([free, [g.a[0], g.b[0], g.b[1]]]), pinned)

    def with_coords(self, x) -> "Configuration":
        return Configuration(self.complex, x, self.pinned)

    @property
    def n(self) -> int:
        return self.complex.n_orbits

    def unpack(self):
        return unpack(self.coords, self.n, self.pinned)

    def realization(self) -> Realization:
        return Realization(*self.unpack())

    def gram(self) -> GramMatrix:
        a1, b1, b2 = self.coords[-3:]
        return GramMatrix(float(a1 * a1), float(a1 * b1), float(b1 * b1 + b2 * b2))

    def chart_valid(self) -> bool:
        a1, _, b2 = self.coords[-3:]
        return bool(a1 > 0 and b2 > 0)


def unpack(x: np.ndarray, n: int, pinned: int = 0):
    free = x[:-3].reshape(n - 1, 3)
    pos = np.insert(free, pinned, 0.0, axis=0) if n > 1 else np.zeros((1, 3))
    a = np.array([x[-3], 0.0, 0.0])
    b = np.array([x[-2], x[-1], 0.0])
    return np.ascontiguousarray(pos), a, b


def target_array(c: PeriodicComplex, target: EdgeLengths) -> np.ndarray:
    try:
        return np.array([target[e] for e in c.constraint_edges], dtype=float)
    except KeyError as exc:
        raise KeyError(f"no target length for edge {exc.args[0]}") from None


class _System:
    """Constraint data of one complex, bound for repeated kernel calls."""

    def __init__(self, c: PeriodicComplex, target=None, pinned: int = 0):
        self.c = c
        self.n = c.n_orbits
        self.pinned = pinned
        self.edges = np.ascontiguousarray(c.constraint_array)
        self.colmap = _colmap(self.n, pinned)
        self.target = None if target is None else (
            target if isinstance(target, np.ndarray) else target_array(c, target))

    def residual(self, x) -> np.ndarray:
        pos, a, b = unpack(x, self.n, self.pinned)
        out = np.empty(len(self.edges))
        kernels.edge_residuals(pos, a, b, self.edges, self.target, out)
        return out

    def jacobian(self, x) -> np.ndarray:
        pos, a, b = unpack(x, self.n, self.pinned)
        out = np.zeros((len(self.edges), 3 * self.n))
        kernels.edge_jacobian(pos, a, b, self.edges, self.colmap, out)
        return out


def residual_vector(c: PeriodicComplex, q: Configuration, target: EdgeLengths) -> np.ndarray:
    return _System(c, target, q.pinned).residual(q.coords)


def constraint_jacobian(c: PeriodicComplex, q: Configuration, target=None) -> np.ndarray:
    """Derivatives of the squared constraint lengths in gauge coordinates.

    One row per constraint (surface edges, then aux pairs, canonical order).
    The derivatives do not depend on ``target``; it is accepted so callers
    can pass the same arguments as to :func:`residual_vector`.
    """
    return _System(c, None, q.pinned).jacobian(q.coords)


class FlexSpace(NamedTuple):
    dimension: int
    basis: np.ndarray  # columns, orthonormal


def matrix_rank(J: np.ndarray, rank_tolerance: float) -> int:
    if J.size == 0:
        return 0
    S = np.linalg.svd(J, compute_uv=False)
    return int(np.sum(S > rank_tolerance * S[0])) if S[0] > 0 else 0


def infinitesimal_flex_space(J: np.ndarray, s: SolverSettings = SolverSettings()) -> FlexSpace:
    """Nullspace of ``J`` by SVD (singular values under ``rank_tolerance * max`` count as zero)."""
    ncol = J.shape[1]
    if J.shape[0] == 0 or not np.any(J):
        return FlexSpace(ncol, np.eye(ncol))
    _, S, Vt = np.linalg.svd(J, full_matrices=True)
    rank = int(np.sum(S > s.rank_tolerance * S[0]))
    basis = Vt[rank:].T.copy()
    return FlexSpace(ncol - rank, basis)


def _newton(system: _System, x: np.ndarray, s: SolverSettings):
    r = system.residual(x)
    it = 0
    while np.max(np.abs(r), initial=0.0) > s.corrector_tolerance:
        if it >= s.max_corrector_iterations:
            raise CorrectorError(
                f"residual {np.max(np.abs(r)):.3e} after {it} Gauss-Newton iterations")
        J = system.jacobian(x)
        dx = np.linalg.lstsq(J, -r, rcond=s.rank_tolerance)[0]
        if not np.all(np.isfinite(dx)):
            raise CorrectorError("non-finite Gauss-Newton step")
        base = np.linalg.norm(r)
        step = 1.0
        for _ in range(5):
            xn = x + step * dx
            rn = system.residual(xn)
            if np.linalg.norm(rn) < base:
                break
            step *= 0.5
        x, r = xn, rn
        it += 1
    return x, it


def project_newton(c: PeriodicComplex, q: Configuration, target: EdgeLengths,
                   s: SolverSettings = SolverSettings()) -> Configuration:
    """Gauss-Newton projection of ``q`` onto the constraint set ``target``."""
    x, _ = _newton(_System(c, target, q.pinned), q.coords.copy(), s)
    return q.with_coords(x)


def gram_differential(q: Configuration) -> np.ndarray:
    """3 x 3n differential of ``(g11, g12, g22)`` in gauge coordinates."""
    a1, b1, b2 = q.coords[-3:]
    D = np.zeros((3, len(q.coords)))
    D[:, -3:] = [[2 * a1, 0.0, 0.0], [b1, a1, 0.0], [0.0, 2 * b1, 2 * b2]]
    return D


def gram_tangent_rank(c: PeriodicComplex, q: Configuration,
                      s: SolverSettings = SolverSettings()) -> int:
    """Rank of the infinitesimal flexes projected onto the Gram differentials."""
    space = infinitesimal_flex_space(constraint_jacobian(c, q), s)
    if space.dimension == 0:
        return 0
    D = gram_differential(q)
    M = D @ space.basis
    S = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(S > s.rank_tolerance * np.linalg.norm(D, 2)))


def gram_varying_direction(c: PeriodicComplex, q: Configuration,
                           s: SolverSettings = SolverSettings()):
    """Unit infinitesimal flex with the largest Gram velocity (``None`` if rigid).

    Falls back to the first nullspace vector when every flex keeps the
    Gram matrix fixed to first order.
    """
    space = infinitesimal_flex_space(constraint_jacobian(c, q), s)
    if space.dimension == 0:
        return None
    M = gram_differential(q) @ space.basis
    _, S, Vt = np.linalg.svd(M, full_matrices=True)
    v = Vt[0] if S.size and S[0] > 0 else np.eye(space.dimension)[0]
    t = space.basis @ v
    # deterministic sign: first significant entry positive
    piv = np.flatnonzero(np.abs(t) > 1e-9 * np.abs(t).max())[0]
    return t / np.linalg.norm(t) * np.sign(t[piv])


def is_regular(c: PeriodicComplex, q: Configuration, target: EdgeLengths,
               s: SolverSettings = SolverSettings(), h: float = 1e-6) -> bool:
    """Whether the Jacobian rank is locally constant on the constraint set at ``q``.

    Each nullspace direction is followed by ``+-h``, projected back, and the
    rank re-measured; any change (or a failed projection) marks ``q`` singular.
    """
    system = _System(c, target, q.pinned)
    J = system.jacobian(q.coords)
    rank = matrix_rank(J, s.rank_tolerance)
    space = infinitesimal_flex_space(J, s)
    for i in range(space.dimension):
        for sign in (1.0, -1.0):
            try:
                x, _ = _newton(system, q.coords + sign * h * space.basis[:, i], s)
            except CorrectorError:
                return False
            if matrix_rank(system.jacobian(x), s.rank_tolerance) != rank:
                return False
    return True


class FlexSample(NamedTuple):
    t: float
    q: Configuration
    gram: GramMatrix
    residual_norm: float


@dataclass
class FlexPath:
    """Samples along one traced flex; ``t`` is accumulated arclength in the chart."""

    samples: list = field(default_factory=list)
    tangent: np.ndarray | None = None
    stop_reason: str = "completed"
    flex_dimension: int = 0

    def __len__(self):
        return len(self.samples)

    @property
    def truncated(self) -> bool:
        return self.stop_reason != "completed"

    def grams(self) -> np.ndarray:
        return np.array([smp.gram for smp in self.samples], dtype=float).reshape(-1, 3)

    def coords(self) -> np.ndarray:
        return np.array([smp.q.coords for smp in self.samples])


def trace_flex(c: PeriodicComplex, q0: Configuration, direction, steps: int,
               s: SolverSettings = SolverSettings(), target: EdgeLengths | None = None,
               max_halvings: int = 4) -> FlexPath:
    """Follow a flex from ``q0`` with a tangent predictor and Gauss-Newton corrector.

    The path stops early (``stop_reason`` set, no exception) when the chart
    degenerates or the corrector fails even after step halving; a rigid start
    yields an empty path.
    """
    if target is None:
        target = all_edge_lengths(c, q0.realization())
    system = _System(c, target, q0.pinned)
    x = q0.coords.copy()
    r0 = np.max(np.abs(system.residual(x)), initial=0.0)
    if r0 > s.corrector_tolerance:
        raise NotOnManifoldError(f"start residual {r0:.3e} exceeds corrector tolerance")
    space = infinitesimal_flex_space(system.jacobian(x), s)
    path = FlexPath(flex_dimension=space.dimension)
    if space.dimension == 0:
        path.stop_reason = "rigid"
        return path
    d = np.asarray(direction, dtype=float)
    dn = np.linalg.norm(d)
    if dn == 0:
        raise ValueError("zero direction")
    proj = space.basis @ (space.basis.T @ d)
    if np.linalg.norm(d - proj) > 1e-6 * dn:
        raise ValueError("direction is not an infinitesimal flex at the start configuration")
    tangent = proj / np.linalg.norm(proj)
    path.tangent = tangent.copy()

    def sample(t, xx):
        q = q0.with_coords(xx)
        return FlexSample(t, q, q.gram(), float(np.max(np.abs(system.residual(xx)), initial=0.0)))

    path.samples.append(sample(0.0, x))
    arclength = 0.0
    h = s.step_size
    for _ in range(steps):
        space = infinitesimal_flex_space(system.jacobian(x), s)
        if space.dimension == 0:
            path.stop_reason = "rigid"
            break
        tan = space.basis @ (space.basis.T @ tangent)
        nrm = np.linalg.norm(tan)
        if nrm < 1e-8:
            path.stop_reason = "tangent_lost"
            break
        tan /= nrm
        hh = h
        new = None
        for _ in range(max_halvings + 1):
            try:
                xn, _ = _newton(system, x + hh * tan, s)
            except CorrectorError:
                hh *= 0.5
                continue
            if np.linalg.norm(xn - x) > 2 * h:
                hh *= 0.5
                continue
            new = xn
            break
        if new is None:
            path.stop_reason = "corrector_failed"
            break
        if not q0.with_coords(new).chart_valid():
            path.stop_reason = "chart_boundary"
            break
        arclength += float(np.linalg.norm(new - x))
        tangent = tan
        x = new
        path.samples.append(sample(arclength, x))
    log.debug("traced %d samples, stop=%s", len(path.samples), path.stop_reason)
    return path


def branch_directions(c: PeriodicComplex, q: Configuration, s: SolverSettings = SolverSettings(),
                      mode="gram") -> list:
    """Seed tangents for tracing: ``[(label, direction), ...]``.

    ``mode`` is ``"gram"`` (Gram-varying tangent and its negative), ``"all"``
    (every nullspace basis vector, both signs) or an integer basis index.
    """
    space = infinitesimal_flex_space(constraint_jacobian(c, q), s)
    if space.dimension == 0:
        return []
    if mode == "gram":
        vecs = [gram_varying_direction(c, q, s)]
    elif mode == "all":
        vecs = [space.basis[:, i] for i in range(space.dimension)]
    else:
        i = int(mode)
        if not 0 <= i < space.dimension:
            raise ValueError(f"branch index {i} outside flex space of dimension {space.dimension}")
        vecs = [space.basis[:, i]]
    out = []
    for j, v in enumerate(vecs):
        out.append((f"branch{j}_fwd", v))
        out.append((f"branch{j}_bwd", -v))
    return out
