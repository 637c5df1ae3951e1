"""Combinatorial reduction of periodic triangulated planes to the all-special base case.

Moves act on the quotient complex only: collapsing the disk bounded by an
empty triangle, and flipping a diagonal next to a non-special vertex of
minimal degree.  Each move lowers the measure ``(n, d)`` (number of
non-special orbits, least degree of a non-special vertex) lexicographically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

from .lattice_complex import (ZERO, Edge, LatticeVector, PeriodicComplex, Triangle, det2,
                              special_orbits, unordered_key, validate)


class ReductionError(RuntimeError):
    """A move could not be applied; the input violates the plane hypotheses."""


class InconsistentComplexError(ValueError):
    """Structural check failed in a way valid input cannot produce."""


Lift = tuple  # (orbit, LatticeVector)


def _lift(o, s) -> Lift:
    return int(o), LatticeVector(int(s[0]), int(s[1]))


# ---------------------------------------------------------------------------
# special orbits and the base case


def self_edge_shifts(c: PeriodicComplex, orbit: int) -> frozenset:
    return frozenset(e.shift for e in c.edges if e.u == e.v == orbit)


def common_special_shift(c: PeriodicComplex):
    """Shift ``lambda`` carried by a self-edge of every special orbit, or ``None``.

    When an orbit has several self-edge shifts the lexicographically least
    shared one is returned.
    """
    specials = sorted(special_orbits(c))
    if not specials:
        return None
    common = set(self_edge_shifts(c, specials[0]))
    for o in specials[1:]:
        common &= self_edge_shifts(c, o)
    if not common:
        raise InconsistentComplexError("special orbits have no common self-edge shift")
    return min(common)


@dataclass(frozen=True)
class Cylinder:
    """Strip between the lines of ``v_i`` and ``v_{i+1}`` (lifts)."""

    v: Lift
    v_next: Lift
    self_edge: Edge      # [v_i v_i']
    rung: Edge           # [v_i v_{i+1}]
    diagonal: Edge       # [v_i' v_{i+1}]


@dataclass(frozen=True)
class BaseCaseStructure:
    lam: LatticeVector
    mu: LatticeVector
    vertices: tuple      # lifts v_0 .. v_{q-1}
    cylinders: tuple

    @property
    def q(self) -> int:
        return len(self.vertices)

    @property
    def order(self) -> tuple:
        return tuple(o for o, _ in self.vertices)

    def to_dict(self) -> dict:
        return {
            "lambda": list(self.lam),
            "mu": list(self.mu),
            "q": self.q,
            "orbits": list(self.order),
            "vertex_shifts": [list(s) for _, s in self.vertices],
            "cylinder_edges": [[cy.self_edge.as_row(), cy.rung.as_row(), cy.diagonal.as_row()]
                               for cy in self.cylinders],
        }


def base_case_structure(c: PeriodicComplex) -> BaseCaseStructure:
    """Cylinder decomposition of a complex whose orbits are all special.

    Starting at orbit 0, repeatedly take the triangle on the left of
    ``v_i -> v_i + lambda``; its third corner is ``v_{i+1}``.  The walk
    returns to orbit 0 at ``v_q = v_0 + mu``.
    """
    c = c.surface()
    specials = special_orbits(c)
    if len(specials) != c.n_orbits:
        missing = sorted(set(range(c.n_orbits)) - specials)
        raise ValueError(f"not a base case: orbits {missing} are not special")
    lam = common_special_shift(c)
    v0 = _lift(0, ZERO)
    verts = [v0]
    cylinders = []
    cur = v0
    for _ in range(c.n_orbits + 1):
        hit = c.triangle_left_of(cur, (cur[0], cur[1] + lam))
        if hit is None:
            raise InconsistentComplexError(f"no triangle left of the self-edge at {cur}")
        _, nxt = hit
        nxt = _lift(*nxt)
        vprime = (cur[0], cur[1] + lam)
        cylinders.append(Cylinder(cur, nxt, Edge.make(cur[0], cur[0], lam),
                                  Edge.make(cur[0], nxt[0], nxt[1] - cur[1]),
                                  Edge.make(vprime[0], nxt[0], nxt[1] - vprime[1])))
        # the second triangle of the strip
        second = c.triangle_left_of(nxt, vprime)
        if second is None or second[1] != (nxt[0], nxt[1] + lam):
            raise InconsistentComplexError(f"strip above {cur} is not two triangles")
        if nxt[0] == v0[0]:
            mu = nxt[1] - v0[1]
            break
        if any(nxt[0] == o for o, _ in verts):
            raise InconsistentComplexError(f"orbit {nxt[0]} met twice before closing the cycle")
        verts.append(nxt)
        cur = nxt
    else:
        raise InconsistentComplexError("cylinder walk did not close")
    q = len(verts)
    if q != c.n_orbits:
        raise InconsistentComplexError(f"walk visits {q} of {c.n_orbits} orbits")
    if abs(det2(lam, mu)) != 1:
        raise InconsistentComplexError(f"lambda={tuple(lam)}, mu={tuple(mu)} is not a basis")
    if len(c.edges) != 3 * q or len(c.triangles) != 2 * q:
        raise InconsistentComplexError(
            f"expected {3 * q} edges and {2 * q} triangles, found {len(c.edges)} and "
            f"{len(c.triangles)}")
    for o, _ in verts:
        if lam not in self_edge_shifts(c, o):
            raise InconsistentComplexError(f"orbit {o} lacks the self-edge {tuple(lam)}")
    return BaseCaseStructure(lam, mu, tuple(verts), tuple(cylinders))


def basis_inner_products(s: BaseCaseStructure, lengths) -> tuple[float, float]:
    """``((lambda, lambda), (lambda, mu))`` from squared edge lengths.

    ``(lambda, mu)`` telescopes over the strips as
    ``sum (lambda, v_{i+1} - v_i)``, each term obtained by polarization.
    """
    def ell(e):
        try:
            return float(lengths[e])
        except KeyError:
            raise KeyError(f"no length for edge {e.as_row()}") from None

    ll = ell(s.cylinders[0].self_edge)
    lm = 0.5 * sum(ell(cy.self_edge) + ell(cy.rung) - ell(cy.diagonal) for cy in s.cylinders)
    return ll, lm


# ---------------------------------------------------------------------------
# empty triangles


def find_empty_triangle(c: PeriodicComplex):
    """Least (by key) triple of pairwise adjacent lifts that is not a triangle, or ``None``.

    Only triples closing up in the cover are considered, so 3-cycles that
    wind around the torus are never reported.
    """
    best = None
    for u in range(c.n_orbits):
        nb = c.neighbors[u]
        for (w1, s1), (w2, s2) in combinations(nb, 2):
            if not c.has_edge(w1, w2, s2 - s1):
                continue
            key = unordered_key([(u, ZERO), (w1, s1), (w2, s2)])
            if key in c.triangle_keys:
                continue
            if best is None or key < best:
                best = key
    return best


def _flood(c: PeriodicComplex, start, walls: set, centre, radius: int):
    """Lifted triangles reachable from ``start`` without crossing ``walls``.

    Returns ``None`` once a corner leaves the box of ``radius`` cells.
    """
    region = {frozenset(start): start}
    stack = [start]
    while stack:
        cs = stack.pop()
        for i in range(3):
            a, b = cs[i], cs[(i + 1) % 3]
            if frozenset((a, b)) in walls:
                continue
            hit = c.triangle_left_of(b, a)
            if hit is None:
                raise InconsistentComplexError(f"side {a}-{b} borders one triangle")
            corners = tuple(_lift(*x) for x in hit[0])
            key = frozenset(corners)
            if key in region:
                continue
            if any(max(abs(s[0] - centre[0]), abs(s[1] - centre[1])) > radius
                   for _, s in corners):
                return None
            region[key] = corners
            stack.append(corners)
    return list(region.values())


def _collapse(c: PeriodicComplex, witness, max_radius: int = 64):
    P = [_lift(*x) for x in witness]
    if len(set(P)) != 3:
        raise ValueError("witness must name three distinct lifts")
    for x, y in ((P[0], P[1]), (P[1], P[2]), (P[2], P[0])):
        if not c.has_edge(x[0], y[0], y[1] - x[1]):
            raise ValueError("stale witness: a side is not an edge")
    if unordered_key(P) in c.triangle_keys:
        raise ValueError("stale witness: it is a triangle of the complex")
    walls = {frozenset((P[i], P[(i + 1) % 3])) for i in range(3)}
    sides = []
    for a, b in ((P[0], P[1]), (P[1], P[0])):
        hit = c.triangle_left_of(a, b)
        if hit is None:
            raise InconsistentComplexError("witness side borders no triangle")
        sides.append(tuple(_lift(*x) for x in hit[0]))
    disk = left = None
    radius = 2
    while disk is None and radius <= max_radius:
        for j, start in enumerate(sides):
            region = _flood(c, start, walls, P[0][1], radius)
            if region is not None:
                disk, left = region, j == 0
                break
        radius *= 2
    if disk is None:
        raise ReductionError(f"no bounded side within {max_radius} cells of the witness")

    boundary = set(P)
    interior = {v for cs in disk for v in cs} - boundary
    removed = {o for o, _ in interior}
    if len(removed) != len(interior):
        raise InconsistentComplexError("two interior vertices of the disk share an orbit")
    if removed & {o for o, _ in P}:
        raise InconsistentComplexError("the disk contains a translate of its boundary")
    gone_tris = {t for t in c.triangles if any(o in removed for o, _ in t.corners)}
    if len(gone_tris) != len(disk):
        raise InconsistentComplexError("disk triangles do not match the removed orbits")

    kept = [o for o in range(c.n_orbits) if o not in removed]
    new_id = {o: i for i, o in enumerate(kept)}

    def keep_edge(e):
        return e.u not in removed and e.v not in removed

    def relabel_edge(e):
        return Edge.make(new_id[e.u], new_id[e.v], e.shift)

    def relabel_tri(cs):
        return Triangle.make([(new_id[o], s) for o, s in cs])

    new_tri = (P[0], P[1], P[2]) if left else (P[1], P[0], P[2])
    tris = [relabel_tri(t.corners) for t in c.triangles if t not in gone_tris]
    tris.append(relabel_tri(new_tri))
    labels = None if c.labels is None else tuple(c.labels[o] for o in kept)
    out = PeriodicComplex(len(kept),
                          frozenset(relabel_edge(e) for e in c.edges if keep_edge(e)),
                          frozenset(tris),
                          frozenset(relabel_edge(e) for e in c.aux if keep_edge(e)),
                          labels)
    rep = validate(out)
    if not rep.ok:
        raise ReductionError(f"collapse produced an invalid complex: {rep}")
    return out, kept, sorted(removed)


def collapse_empty_triangle(c: PeriodicComplex, witness, max_radius: int = 64) -> PeriodicComplex:
    """Replace the disk bounded by an empty triangle (and its translates) by one triangle.

    Remaining orbits keep their relative order and are renumbered densely.
    """
    return _collapse(c, witness, max_radius)[0]


# ---------------------------------------------------------------------------
# flips


def _replace(c: PeriodicComplex, drop_edges, add_edges, drop_tris, add_tris) -> PeriodicComplex:
    edges = (c.edges - set(drop_edges)) | set(add_edges)
    aux = c.aux - set(add_edges)
    return PeriodicComplex(c.n_orbits, frozenset(edges),
                           frozenset((c.triangles - set(drop_tris)) | set(add_tris)),
                           frozenset(aux), c.labels)


def flip(c: PeriodicComplex, u: int, i: int) -> PeriodicComplex:
    """Lower the degree of non-special ``u`` by flipping the edge ``u v_{i+1}``.

    ``v_0 .. v_{d-1}`` is the link of ``u`` in orientation order starting at
    its least lift.  Triangles ``[u v_i v_{i+1}]`` and ``[u v_{i+1} v_{i+2}]``
    become ``[u v_i v_{i+2}]`` and ``[v_i v_{i+1} v_{i+2}]``.
    """
    if u in special_orbits(c):
        raise ValueError(f"orbit {u} is special")
    link = c.link(u)
    d = len(link)
    if d < 4:
        raise ValueError(f"orbit {u} has degree {d} < 4")
    vi, vj, vk = (_lift(*link[(i + t) % d]) for t in range(3))
    diag_shift = vk[1] - vi[1]
    if c.has_edge(vi[0], vk[0], diag_shift):
        raise ValueError(f"diagonal {vi}-{vk} is already an edge")
    U = (u, ZERO)
    out = _replace(
        c,
        drop_edges=[Edge.make(u, vj[0], vj[1])],
        add_edges=[Edge.make(vi[0], vk[0], diag_shift)],
        drop_tris=[Triangle.make([U, vi, vj]), Triangle.make([U, vj, vk])],
        add_tris=[Triangle.make([U, vi, vk]), Triangle.make([vi, vj, vk])],
    )
    rep = validate(out)
    if not rep.ok:
        raise ValueError(f"flip at orbit {u}, index {i} gives an invalid complex: {rep}")
    if not special_orbits(c) <= special_orbits(out):
        raise InconsistentComplexError("flip destroyed a special orbit")
    return out


def flip_edge(c: PeriodicComplex, e: Edge) -> PeriodicComplex:
    """Swap edge ``e`` for the other diagonal of its two triangles (any edge, any vertex).

    Raises ``ValueError`` when the new diagonal exists or the result is invalid.
    """
    e = Edge.make(e.u, e.v, e.shift)
    if e not in c.edges:
        raise ValueError(f"{e.as_row()} is not an edge")
    X, Y = (e.u, ZERO), (e.v, e.shift)
    h1, h2 = c.triangle_left_of(X, Y), c.triangle_left_of(Y, X)
    if h1 is None or h2 is None:
        raise ValueError("edge does not border two triangles")
    p, q = _lift(*h1[1]), _lift(*h2[1])
    t1, t2 = Triangle.make(h1[0]), Triangle.make(h2[0])
    if t1 == t2 or p == q:
        raise ValueError("the two triangles at this edge are translates of each other")
    new_edge = Edge.make(p[0], q[0], q[1] - p[1])
    if new_edge in c.edges or (p[0] == q[0] and (q[1] - p[1]).is_zero()):
        raise ValueError("opposite diagonal already an edge")
    out = _replace(c, [e], [new_edge], [t1, t2],
                   [Triangle.make([X, q, p]), Triangle.make([q, Y, p])])
    rep = validate(out)
    if not rep.ok:
        raise ValueError(f"edge flip gives an invalid complex: {rep}")
    return out


# ---------------------------------------------------------------------------
# the reduction loop


def measure(c: PeriodicComplex) -> tuple:
    """``(non-special orbit count, least non-special degree)``; ``(0, 0)`` at a base case."""
    specials = special_orbits(c)
    degs = [c.degree(o) for o in range(c.n_orbits) if o not in specials]
    return (len(degs), min(degs)) if degs else (0, 0)


@dataclass(frozen=True)
class Collapse:
    removed: tuple
    witness: tuple

    def to_dict(self) -> dict:
        return {"move": "collapse", "removed": list(self.removed),
                "witness": [[o, *s] for o, s in self.witness]}


@dataclass(frozen=True)
class Flip:
    vertex: int
    index: int

    def to_dict(self) -> dict:
        return {"move": "flip", "vertex": self.vertex, "index": self.index}


@dataclass
class ReductionTrace:
    """Moves applied, the measure before each move and after the last one."""

    moves: list = field(default_factory=list)
    measures: list = field(default_factory=list)
    final: PeriodicComplex | None = None
    orbit_map: tuple = ()   # final orbit id -> orbit id in the input

    def __len__(self):
        return len(self.moves)

    def to_dict(self) -> dict:
        return {
            "moves": [m.to_dict() for m in self.moves],
            "measures": [list(m) for m in self.measures],
            "orbit_map": list(self.orbit_map),
            "final": self.final.to_dict() if self.final is not None else None,
        }


def _flip_order(d: int, strategy) -> list:
    if strategy == "first":
        return list(range(d))
    if strategy == "last":
        return list(range(d - 1, -1, -1))
    if callable(strategy):
        return list(strategy(d))
    raise ValueError(f"unknown diagonal strategy {strategy!r}")


def reduce(c: PeriodicComplex, diagonal_strategy="first") -> ReductionTrace:
    """Apply collapses and flips until every orbit is special.

    ``diagonal_strategy`` orders the candidate diagonal indices: ``"first"``
    (default), ``"last"``, or a callable ``d -> iterable of indices``.  The
    first admissible flip in that order is taken.
    """
    c = c.surface()
    rep = validate(c)
    if not rep.ok:
        raise ValueError(f"invalid complex: {rep}")
    trace = ReductionTrace()
    orbit_map = list(range(c.n_orbits))
    fuse = 10 * (c.n_orbits + len(c.edges))
    m = measure(c)
    while m[0] > 0:
        if len(trace.moves) >= fuse:
            raise ReductionError(f"no base case after {fuse} moves")
        trace.measures.append(m)
        w = find_empty_triangle(c)
        if w is not None:
            c, kept, removed = _collapse(c, w)
            trace.moves.append(Collapse(tuple(orbit_map[o] for o in removed),
                                        tuple((orbit_map[o], tuple(s)) for o, s in w)))
            orbit_map = [orbit_map[o] for o in kept]
        else:
            specials = special_orbits(c)
            u = min((o for o in range(c.n_orbits) if o not in specials),
                    key=lambda o: (c.degree(o), o))
            for i in _flip_order(c.degree(u), diagonal_strategy):
                try:
                    c2 = flip(c, u, i)
                except ValueError:
                    continue
                break
            else:
                raise ReductionError(f"no admissible flip at orbit {u}")
            c = c2
            trace.moves.append(Flip(u, i))
        new = measure(c)
        if not new < m:
            raise ReductionError(f"measure did not decrease: {m} -> {new}")
        m = new
    trace.measures.append(m)
    trace.final = c
    trace.orbit_map = tuple(orbit_map)
    return trace
