"""Deterministic constructors for example surfaces, folded seeds and test surgeries."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .flex import Configuration
from .lattice_complex import Edge, PeriodicComplex, Triangle, change_of_basis
from .realization import Realization, all_edge_lengths, refine_realization

#: fold-line direction of each family in lattice coordinates
FAMILIES = {"a": (1, 0), "b": (0, 1), "a-b": (1, -1), "a+b": (1, 1)}
# integer form constant on each line of the family, stepping by one between lines
_LINE_INDEX = {"a": np.array([0, 1]), "b": np.array([1, 0]),
               "a-b": np.array([1, 1]), "a+b": np.array([1, -1])}


class IncompatibleFoldError(ValueError):
    """The requested fold lines are not edge lines of the complex."""


def _check_basis(a, b):
    a = np.asarray(a, float).reshape(3)
    b = np.asarray(b, float).reshape(3)
    if np.linalg.norm(np.cross(a, b)) <= 1e-12 * np.linalg.norm(a) * np.linalg.norm(b):
        raise ValueError("period vectors a, b are colinear")
    return a, b


def _refine(c: PeriodicComplex, r: Realization, C):
    if C is None:
        return c, r
    return change_of_basis(c, C), refine_realization(r, C)


def triangulated_plane(a=(1.0, 0.0, 0.0), b=(0.0, 1.0, 0.0), C=None):
    """Plane cut into triangles by the lines parallel to ``a``, ``b`` and ``a - b``.

    The one-orbit complex is refined by ``change_of_basis(C)``; the
    realization is flat, in the plane spanned by ``a`` and ``b``.
    """
    a, b = _check_basis(a, b)
    c = PeriodicComplex.build(
        1,
        edges=[(0, 0, 1, 0), (0, 0, 0, 1), (0, 0, 1, -1)],
        triangles=[[(0, (0, 0)), (0, (1, 0)), (0, (0, 1))],
                   [(0, (1, 0)), (0, (1, 1)), (0, (0, 1))]],
    )
    return _refine(c, Realization(np.zeros((1, 3)), a, b), C)


def grid_squares(side: float = 1.0, C=None):
    """Square grid; each square split by its (1, 1) diagonal, the other diagonal kept as aux."""
    if not side > 0:
        raise ValueError("side must be positive")
    c = PeriodicComplex.build(
        1,
        edges=[(0, 0, 1, 0), (0, 0, 0, 1), (0, 0, 1, 1)],
        triangles=[[(0, (0, 0)), (0, (1, 0)), (0, (1, 1))],
                   [(0, (0, 0)), (0, (1, 1)), (0, (0, 1))]],
        aux=[(0, 0, 1, -1)],
    )
    r = Realization(np.zeros((1, 3)), (side, 0.0, 0.0), (0.0, side, 0.0))
    return _refine(c, r, C)


def folded_plane_seed(c: PeriodicComplex, r: Realization, phi: float, family: str,
                      base=None, pinned: int = 0) -> Configuration:
    """Accordion fold of a flat periodic plane at dihedral angle ``phi``.

    Vertices are classified by the index ``sigma`` of the fold line of
    ``family`` they lie on (lines parallel to ``a``, ``b``, ``a - b`` or
    ``a + b`` of ``base``).  Strips between consecutive lines are tilted
    alternately by ``+phi`` and ``-phi``, so ``phi = 0`` is the flat state.

    Parameters
    ----------
    c, r : flat complex and realization (vertices on the lattice of ``base``)
    phi : fold angle in radians
    family : key of :data:`FAMILIES`
    base : ``(a0, b0)`` the line families refer to; defaults to ``(r.a, r.b)``,
        which is only right when ``r`` has not been refined.

    Raises
    ------
    IncompatibleFoldError
        if vertices are off the lattice, a period crosses an odd number of
        fold lines, or some edge or aux pair would change length.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown fold family {family!r}; expected one of {sorted(FAMILIES)}")
    a0, b0 = _check_basis(*(base if base is not None else (r.a, r.b)))
    B = np.column_stack([a0, b0])
    p0 = r.positions[0]
    scale = max(np.linalg.norm(a0), np.linalg.norm(b0))

    def lattice_coords(P):
        xy, *_ = np.linalg.lstsq(B, P.T, rcond=None)
        xy = xy.T
        rounded = np.rint(xy)
        if np.max(np.abs(B @ rounded.T - P.T), initial=0.0) > 1e-9 * scale:
            raise IncompatibleFoldError("realization is not on the lattice of the base vectors")
        return rounded.astype(np.int64)

    fm, fk = FAMILIES[family]
    form = _LINE_INDEX[family]
    xy = lattice_coords(r.positions - p0)
    sigma = xy @ form
    period_sigma = lattice_coords(np.vstack([r.a, r.b])) @ form
    if np.any(period_sigma % 2):
        raise IncompatibleFoldError(
            f"periods cross an odd number of {family!r} fold lines; refine the lattice")

    n_hat = np.cross(a0, b0)
    n_hat /= np.linalg.norm(n_hat)
    d_hat = fm * a0 + fk * b0
    d_hat /= np.linalg.norm(d_hat)
    e_hat = np.cross(n_hat, d_hat)
    # spacing of consecutive fold lines, measured with a lattice step of sigma = 1
    unit = b0 if family == "a" else a0
    w = float(unit @ e_hat)
    cp, sp = math.cos(phi), math.sin(phi)

    rel = r.positions - p0
    along = rel @ d_hat
    pos = (p0 + np.outer(along, d_hat) + np.outer(sigma * w * cp, e_hat)
           + np.outer((sigma % 2) * w * sp, n_hat))
    M = np.outer(d_hat, d_hat) + cp * np.outer(e_hat, e_hat)
    folded = Realization(pos, M @ r.a, M @ r.b)

    before = all_edge_lengths(c, r)
    after = all_edge_lengths(c, folded)
    worst = max((abs(after[e] - before[e]) for e in before), default=0.0)
    if worst > 1e-9 * scale ** 2:
        raise IncompatibleFoldError(f"{family!r} fold lines are not edge lines of the complex")
    return Configuration.from_realization(c, folded, pinned)


def accordion_gram(a, b, phi: float):
    """Closed-form Gram matrix of the ``'a'``-family accordion of a flat plane.

    ``b`` is the doubled period crossing two fold lines; ``a`` lies along them.
    """
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    aa = a @ a
    along = (a @ b) / math.sqrt(aa)
    across_sq = b @ b - along ** 2
    return aa, a @ b, along ** 2 + math.cos(phi) ** 2 * across_sq


@dataclass(frozen=True)
class MiuraParams:
    """Parallelogram angle, edge-chain lengths and fold height of a Miura-ori pattern."""

    alpha: float
    a0_len: float
    b0_len: float
    z: float

    def __post_init__(self):
        if not 0 < self.alpha < math.pi / 2:
            raise ValueError("alpha must lie in (0, pi/2)")
        if not (self.a0_len > 0 and self.b0_len > 0):
            raise ValueError("a0_len and b0_len must be positive")
        if not 0 < 2 * abs(self.z) < self.a0_len:
            raise ValueError("need 0 < 2|z| < a0_len")
        if not 4 * self.x ** 2 < self.b0_len ** 2 / math.sin(self.alpha) ** 2:
            raise ValueError("fold too deep for these parameters (|b| would vanish)")

    @property
    def a_len(self) -> float:
        return math.sqrt(self.a0_len ** 2 - 4 * self.z ** 2)

    @property
    def x(self) -> float:
        return self.a0_len * self.b0_len / math.tan(self.alpha) / (2 * self.a_len)

    @property
    def b_len(self) -> float:
        return math.sqrt(self.b0_len ** 2 / math.sin(self.alpha) ** 2 - 4 * self.x ** 2)

    def hyperbola(self, g11: float, g22: float) -> float:
        """Left side of the relation tying ``g11`` and ``g22`` on the Miura flex."""
        sa2 = math.sin(self.alpha) ** 2
        ca2 = math.cos(self.alpha) ** 2
        return (g11 * g22 * sa2 - g11 * self.b0_len ** 2
                + self.a0_len ** 2 * self.b0_len ** 2 * ca2)


def _miura_vertex(I: int, J: int):
    return (I % 2) + 2 * (J % 2), (I // 2, J // 2)


def miura_ori(p: MiuraParams):
    """Miura-ori: 2 x 2 block of parallelogram faces, each split by one diagonal.

    Orbit ``i + 2 j`` sits at grid corner ``(i, j)``; the second diagonal of
    every face is an aux constraint so faces stay rigid.
    """
    edges, aux, tris = [], [], []

    def E(p1, p2):
        (u, s), (v, t) = _miura_vertex(*p1), _miura_vertex(*p2)
        return Edge.make(u, v, (t[0] - s[0], t[1] - s[1]))

    for i in range(2):
        for j in range(2):
            v00, v10, v11, v01 = (i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)
            edges += [E(v00, v10), E(v00, v01), E(v00, v11)]
            aux.append(E(v10, v01))
            tris.append([_miura_vertex(*v) for v in (v00, v10, v11)])
            tris.append([_miura_vertex(*v) for v in (v00, v11, v01)])
    c = PeriodicComplex.build(4, edges, tris, aux)
    al, bl, x = p.a_len, p.b_len, p.x
    pos = np.zeros((4, 3))
    for i in range(2):
        for j in range(2):
            pos[i + 2 * j] = (i * al / 2 + x * j, j * bl / 2, p.z * i)
    return c, Realization(pos, (al, 0.0, 0.0), (0.0, bl, 0.0))


def star_subdivide(c: PeriodicComplex, t) -> PeriodicComplex:
    """Replace triangle orbit ``t`` by three triangles around a new orbit ``n``."""
    t = t if isinstance(t, Triangle) else Triangle.make(t)
    t = Triangle.make(t.corners)
    if t not in c.triangles:
        raise ValueError(f"triangle {t.as_row()} is not in the complex")
    n = c.n_orbits
    P = (n, (0, 0))
    cs = t.corners
    new_edges = [Edge.make(o, n, (-s[0], -s[1])) for o, s in cs]
    new_tris = [Triangle.make([cs[i], cs[(i + 1) % 3], P]) for i in range(3)]
    labels = None if c.labels is None else (*c.labels, f"star{n}")
    return PeriodicComplex(n + 1, c.edges | frozenset(new_edges),
                           (c.triangles - {t}) | frozenset(new_tris), c.aux, labels)


def star_subdivide_realization(r: Realization, t, lift: float = 0.0) -> Realization:
    """Realization for :func:`star_subdivide`: new vertex at the centroid of ``t``.

    ``lift`` moves it along the triangle normal.
    """
    t = t if isinstance(t, Triangle) else Triangle.make(t)
    pts = np.array([r.lift(o, s) for o, s in t.corners])
    centre = pts.mean(axis=0)
    if lift:
        nrm = np.cross(pts[1] - pts[0], pts[2] - pts[0])
        centre = centre + lift * nrm / np.linalg.norm(nrm)
    return Realization(np.vstack([r.positions, centre]), r.a, r.b)


__all__ = [
    "FAMILIES", "IncompatibleFoldError", "MiuraParams", "accordion_gram", "folded_plane_seed",
    "grid_squares", "miura_ori", "star_subdivide", "star_subdivide_realization",
    "triangulated_plane",
]
