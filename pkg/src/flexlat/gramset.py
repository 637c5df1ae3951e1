"""Gram point clouds: clustering, local dimension and polynomial relation fitting.

Coordinates are ``X = g11``, ``Y = g12``, ``Z = g22``.  Monomials of total
degree at most ``D`` are ordered graded-lex: by degree, then with higher
powers of ``X`` (then ``Y``) first, e.g. ``1, X, Y, Z, X^2, XY, XZ, Y^2,
YZ, Z^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

MONOMIAL_ORDER = "gradedlex-XYZ"


class InsufficientPointsError(ValueError):
    """Too few samples for the requested fit or estimate."""


@dataclass
class GramCloud:
    """Gram samples ``(g11, g12, g22)`` with ``(path_id, t)`` tags."""

    points: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    tags: list = field(default_factory=list)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float).reshape(-1, 3)
        if not self.tags:
            self.tags = [(0, float(i)) for i in range(len(self.points))]
        if len(self.tags) != len(self.points):
            raise ValueError("one tag per point required")
        p = self.points
        bad = ~((p[:, 0] > 0) & (p[:, 0] * p[:, 2] - p[:, 1] ** 2 > 0))
        if np.any(bad):
            raise ValueError(f"{int(bad.sum())} Gram points are not positive definite")

    def __len__(self):
        return len(self.points)

    @property
    def path_ids(self) -> np.ndarray:
        return np.array([t[0] for t in self.tags], dtype=int)

    def subset(self, idx) -> "GramCloud":
        idx = np.asarray(idx, dtype=int)
        return GramCloud(self.points[idx], [self.tags[i] for i in idx])


def sample_gram(paths, dedupe_tol: float = 1e-12) -> GramCloud:
    """Concatenate the Gram samples of traced paths, dropping near-duplicates.

    ``paths`` holds :class:`~flexlat.flex.FlexPath` objects or ``(t, grams)``
    pairs of arrays; path ids follow input order.
    """
    pts, tags = [], []
    for pid, path in enumerate(paths):
        if hasattr(path, "samples"):
            ts = [s.t for s in path.samples]
            gs = path.grams()
        else:
            ts, gs = path
        gs = np.asarray(gs, dtype=float).reshape(-1, 3)
        pts.append(gs)
        tags.extend((pid, float(t)) for t in ts)
    if not pts:
        return GramCloud()
    P = np.vstack(pts)
    keep = np.ones(len(P), dtype=bool)
    if len(P) > 1:
        for i, j in sorted(cKDTree(P).query_pairs(dedupe_tol, p=np.inf)):
            if keep[i]:
                keep[j] = False
    idx = np.flatnonzero(keep)
    return GramCloud(P[idx], [tags[i] for i in idx])


def consecutive_gaps(cloud: GramCloud) -> np.ndarray:
    """Distances between successive samples of the same path."""
    gaps = []
    ids = cloud.path_ids
    for pid in np.unique(ids):
        sel = np.flatnonzero(ids == pid)
        order = sel[np.argsort([cloud.tags[i][1] for i in sel], kind="stable")]
        if len(order) > 1:
            gaps.append(np.linalg.norm(np.diff(cloud.points[order], axis=0), axis=1))
    return np.concatenate(gaps) if gaps else np.zeros(0)


def clusters(cloud: GramCloud, link_radius: float | None = None) -> list:
    """Connected components of the graph linking samples closer than ``link_radius``.

    The default radius is three times the largest gap between consecutive
    samples of a path.  Components are index arrays, ordered by first index.
    """
    n = len(cloud)
    if n == 0:
        return []
    if link_radius is None:
        gaps = consecutive_gaps(cloud)
        link_radius = 3 * float(gaps.max()) if gaps.size and gaps.max() > 0 else 0.0
    pairs = np.array(sorted(cKDTree(cloud.points).query_pairs(link_radius)),
                     dtype=int).reshape(-1, 2)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    comps = {}
    for i, lab in enumerate(labels):
        comps.setdefault(lab, []).append(i)
    return sorted((np.array(v) for v in comps.values()), key=lambda a: a[0])


def _rank(M: np.ndarray, tol: float) -> int:
    if M.size == 0:
        return 0
    S = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(S > tol * S[0])) if S[0] > 0 else 0


def cluster_dimension(points, radius: float, tolerance: float = 0.1,
                      min_points: int = 10) -> int:
    """Local dimension of one connected set of Gram samples.

    Around every sample with at least ``min_points`` neighbours within
    ``radius``, the centred neighbourhood matrix is ranked with relative
    singular value threshold ``tolerance``; the largest rank is returned.
    Coincident samples have dimension 0.
    """
    P = np.asarray(points, float).reshape(-1, 3)
    if len(P) == 0:
        raise InsufficientPointsError("no points")
    spread = np.ptp(P, axis=0).max()
    if spread <= 1e-12 * max(1.0, np.abs(P).max()):
        return 0
    tree = cKDTree(P)
    best = None
    for nb in tree.query_ball_point(P, radius):
        if len(nb) < min_points:
            continue
        Q = P[nb]
        r = _rank(Q - Q.mean(axis=0), tolerance)
        best = r if best is None else max(best, r)
    if best is None:
        raise InsufficientPointsError(
            f"no sample has {min_points} neighbours within radius {radius:g}")
    return best


def local_dimension(cloud: GramCloud, radius: float, tolerance: float = 0.1,
                    min_points: int = 10, link_radius: float | None = None) -> list:
    """Estimated dimension of each cluster (list aligned with :func:`clusters`).

    See :func:`cluster_dimension` for the per-cluster estimate.
    """
    if len(cloud) == 0:
        raise InsufficientPointsError("empty cloud")
    return [cluster_dimension(cloud.points[comp], radius, tolerance, min_points)
            for comp in clusters(cloud, link_radius)]


def principal_direction(points) -> np.ndarray:
    """Unit direction of largest spread of a point set (sign: largest entry positive)."""
    P = np.asarray(points, float)
    _, _, Vt = np.linalg.svd(P - P.mean(axis=0), full_matrices=False)
    v = Vt[0]
    return v * np.sign(v[np.argmax(np.abs(v))])


# ---------------------------------------------------------------------------
# polynomial relations


def monomials(D: int) -> list:
    """Exponent triples of total degree <= ``D`` in graded-lex order."""
    out = []
    for d in range(D + 1):
        for i in range(d, -1, -1):
            for j in range(d - i, -1, -1):
                out.append((i, j, d - i - j))
    return out


def _vandermonde(P: np.ndarray, mons) -> np.ndarray:
    return np.column_stack([P[:, 0] ** i * P[:, 1] ** j * P[:, 2] ** k for i, j, k in mons])


@dataclass(frozen=True)
class PolyRelation:
    """Polynomial in ``(X, Y, Z)`` with coefficients over :func:`monomials` of ``degree``."""

    degree: int
    coefficients: tuple

    def __post_init__(self):
        if len(self.coefficients) != len(monomials(self.degree)):
            raise ValueError("coefficient vector does not match the degree")
        if not any(self.coefficients):
            raise ValueError("relation is identically zero")

    @property
    def coef(self) -> np.ndarray:
        return np.asarray(self.coefficients, dtype=float)

    def __call__(self, points) -> np.ndarray:
        P = np.asarray(points, float).reshape(-1, 3)
        return _vandermonde(P, monomials(self.degree)) @ self.coef

    def effective_degree(self, tol: float = 1e-12) -> int:
        c = np.abs(self.coef)
        big = tol * c.max()
        return max(sum(m) for m, x in zip(monomials(self.degree), c) if x > big)

    def leading_form(self, tol: float = 1e-12) -> dict:
        """Top-degree homogeneous part as ``{(i, j, k): coefficient}``."""
        d = self.effective_degree(tol)
        return {m: x for m, x in zip(monomials(self.degree), self.coefficients)
                if sum(m) == d and abs(x) > tol * np.abs(self.coef).max()}

    def to_dict(self) -> dict:
        return {"degree": self.degree, "monomial_order": MONOMIAL_ORDER,
                "monomials": [list(m) for m in monomials(self.degree)],
                "coefficients": list(self.coefficients)}

    @classmethod
    def from_dict(cls, d: dict) -> "PolyRelation":
        if d.get("monomial_order", MONOMIAL_ORDER) != MONOMIAL_ORDER:
            raise ValueError(f"unsupported monomial order {d.get('monomial_order')!r}")
        return cls(int(d["degree"]), tuple(float(x) for x in d["coefficients"]))


def _normalize(c: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    c = c / np.linalg.norm(c)
    nz = np.flatnonzero(np.abs(c) > tol)
    if nz.size and c[nz[0]] < 0:
        c = -c
    return c


def _unshift(coef: np.ndarray, mons, centre: np.ndarray, scale: float) -> np.ndarray:
    """Rewrite ``f((p - centre) / scale)`` in powers of ``p``."""
    index = {m: n for n, m in enumerate(mons)}
    out = np.zeros(len(mons))
    for (i, j, k), cf in zip(mons, coef):
        if cf == 0:
            continue
        w = cf / scale ** (i + j + k)
        for a in range(i + 1):
            ca = math.comb(i, a) * (-centre[0]) ** (i - a)
            for b in range(j + 1):
                cb = math.comb(j, b) * (-centre[1]) ** (j - b)
                for g in range(k + 1):
                    cg = math.comb(k, g) * (-centre[2]) ** (k - g)
                    out[index[(a, b, g)]] += w * ca * cb * cg
    return out


def _multiply(coef: np.ndarray, mons, by: tuple, D: int) -> np.ndarray | None:
    index = {m: n for n, m in enumerate(monomials(D))}
    out = np.zeros(len(index))
    for m, cf in zip(mons, coef):
        t = (m[0] + by[0], m[1] + by[1], m[2] + by[2])
        if cf == 0:
            continue
        if sum(t) > D:
            return None
        out[index[t]] += cf
    return out


def _echelon(G: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Row-reduce generators so each leads with a distinct highest monomial."""
    G = G.copy()
    used = []
    for col in range(G.shape[1] - 1, -1, -1):
        free = [r for r in range(len(G)) if r not in used]
        if not free:
            break
        r = max(free, key=lambda rr: abs(G[rr, col]))
        if abs(G[r, col]) <= tol * np.abs(G).max():
            continue
        G[r] /= G[r, col]
        for rr in range(len(G)):
            if rr != r:
                G[rr] -= G[rr, col] * G[r]
        used.append(r)
    return G[used]


def fit_relations(cloud: GramCloud, D: int, svd_threshold: float = 1e-7) -> list:
    """Polynomial relations of degree <= ``D`` vanishing on the cloud.

    Fitting runs on centred, isotropically scaled points.  Relations are
    collected degree by degree, keeping only generators that are not
    polynomial multiples of relations already found, and are returned in
    the original coordinates with unit coefficient norm.
    """
    mons = monomials(D)
    if len(cloud) < 2 * len(mons):
        raise InsufficientPointsError(
            f"{len(cloud)} points; degree {D} needs at least {2 * len(mons)}")
    P = cloud.points
    centre = P.mean(axis=0)
    scale = float(np.abs(P - centre).max()) or 1.0
    U = (P - centre) / scale
    V = _vandermonde(U, mons)
    found = []   # coefficient vectors (normalised coordinates, full degree-D basis)
    for d in range(1, D + 1):
        m_d = len(monomials(d))
        _, S, Wt = np.linalg.svd(V[:, :m_d], full_matrices=True)
        null = Wt[np.flatnonzero(S < svd_threshold * S[0])] if S[0] > 0 else Wt
        if len(null) == 0:
            continue
        multiples = []
        for f in found:
            for mono in monomials(d - 1):
                g = _multiply(f[:m_d], mons[:m_d], mono, d)
                if g is not None:
                    multiples.append(g)
        if multiples:
            Q, R = np.linalg.qr(np.array(multiples).T)
            rank = int(np.sum(np.abs(np.diag(R)) > 1e-10 * np.abs(R).max()))
            Q = Q[:, :rank] if rank else np.zeros((m_d, 0))
            residual = null.T - Q @ (Q.T @ null.T)
        else:
            residual = null.T
        Ur, Sr, _ = np.linalg.svd(residual, full_matrices=False)
        new = Ur[:, Sr > 0.5].T
        for g in new:
            found.append(np.concatenate([g, np.zeros(len(mons) - m_d)]))
    if not found:
        return []
    G = np.array([_unshift(f, mons, centre, scale) for f in found])
    G = _echelon(G)
    return [PolyRelation(D, tuple(float(x) for x in _normalize(g))) for g in G]


def relation_residual(rel: PolyRelation, cloud: GramCloud) -> float:
    """Scale-aware worst residual: ``max |rel(p)| / (|coef| * max(1, max|p|)^D)``."""
    if len(cloud) == 0:
        return 0.0
    s = max(1.0, float(np.linalg.norm(cloud.points, axis=1).max()))
    return float(np.abs(rel(cloud.points)).max() / (np.linalg.norm(rel.coef) * s ** rel.degree))


# generic shear making both leading forms regular in Z
_SHEAR = (0.6180339887498949, 0.41421356237309503)


def leading_form_resultant(r1: PolyRelation, r2: PolyRelation) -> float:
    """Size of the Z-resultant of the two leading forms (0 iff they share a factor).

    Each form is scaled to unit coefficient norm and sheared by a fixed
    generic substitution ``X -> X + c1 Z``, ``Y -> Y + c2 Z`` first; the
    result is the largest coefficient of the resultant.
    """
    import sympy

    X, Y, Z = sympy.symbols("X Y Z")

    def form(rel):
        lf = rel.leading_form()
        nrm = math.sqrt(sum(v * v for v in lf.values()))
        expr = sum(sympy.Float(v / nrm) * X ** i * Y ** j * Z ** k for (i, j, k), v in lf.items())
        return sympy.expand(expr.subs({X: X + _SHEAR[0] * Z, Y: Y + _SHEAR[1] * Z},
                                      simultaneous=True))

    f, g = form(r1), form(r2)
    res = sympy.resultant(sympy.Poly(f, Z), sympy.Poly(g, Z))
    coeffs = sympy.Poly(res, X, Y).coeffs() if res.free_symbols else [res]
    return float(max(abs(complex(cf)) for cf in coeffs))


def relations_to_dict(rels, cloud: GramCloud | None = None) -> dict:
    out = {"monomial_order": MONOMIAL_ORDER, "relations": [r.to_dict() for r in rels]}
    if cloud is not None:
        out["residuals"] = [relation_residual(r, cloud) for r in rels]
    return out
