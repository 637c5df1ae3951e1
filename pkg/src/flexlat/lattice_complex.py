"""Quotient representation of periodic triangulated planes.

A periodic simplicial plane ``K`` with a free action of ``Z^2`` is stored
through its torus quotient: one record per vertex orbit, edges labelled by
the lattice shift between the endpoint lifts, and triangles given by three
(orbit, shift) corners.  Nothing infinite is ever materialised; everything
the rest of the package needs about ``K`` is recovered from these labels.

Conventions
-----------
* An edge ``(u, v, s)`` joins the lift of ``u`` in the base cell to the
  lift of ``v`` translated by ``s``.  ``(u, v, s)`` and ``(v, u, -s)`` are
  the same edge; the canonical form has ``u < v``, or ``u == v`` with ``s``
  lexicographically positive.
* Triangle corners are listed in the orientation of the complex.  A triangle
  is normalised so that its first corner has shift zero and the corner
  tuple is the least among its three rotations.
"""

from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class LatticeVector(NamedTuple):
    """Element ``m*alpha + k*beta`` of the period lattice."""

    m: int
    k: int

    def __add__(self, other):
        return LatticeVector(self.m + other[0], self.k + other[1])

    def __sub__(self, other):
        return LatticeVector(self.m - other[0], self.k - other[1])

    def __neg__(self):
        return LatticeVector(-self.m, -self.k)

    def is_zero(self) -> bool:
        return self.m == 0 and self.k == 0

    def is_positive(self) -> bool:
        return self.m > 0 or (self.m == 0 and self.k > 0)

    def canonical_sign(self) -> "LatticeVector":
        return self if self.is_positive() or self.is_zero() else -self


ZERO = LatticeVector(0, 0)


def is_primitive(v: Sequence[int]) -> bool:
    """True iff ``gcd(|m|, |k|) == 1``; the zero vector is not primitive."""
    return math.gcd(abs(int(v[0])), abs(int(v[1]))) == 1


def det2(u: Sequence[int], v: Sequence[int]) -> int:
    return u[0] * v[1] - u[1] * v[0]


class Edge(NamedTuple):
    u: int
    v: int
    shift: LatticeVector

    @classmethod
    def make(cls, u: int, v: int, shift: Sequence[int]) -> "Edge":
        s = LatticeVector(int(shift[0]), int(shift[1]))
        u, v = int(u), int(v)
        if u > v or (u == v and not s.is_positive() and not s.is_zero()):
            return cls(v, u, -s)
        return cls(u, v, s)

    def is_self_edge(self) -> bool:
        return self.u == self.v

    def as_row(self) -> list[int]:
        return [self.u, self.v, self.shift.m, self.shift.k]


Corner = tuple  # (orbit, LatticeVector)


def _translate(corners, t) -> tuple:
    return tuple((o, LatticeVector(s[0] - t[0], s[1] - t[1])) for o, s in corners)


class Triangle(NamedTuple):
    corners: tuple

    @classmethod
    def make(cls, corners: Iterable) -> "Triangle":
        cs = [(int(o), LatticeVector(int(s[0]), int(s[1]))) for o, s in corners]
        if len(cs) != 3:
            raise ValueError("a triangle has exactly three corners")
        best = None
        for r in range(3):
            rot = cs[r:] + cs[:r]
            cand = _translate(rot, rot[0][1])
            if best is None or cand < best:
                best = cand
        return cls(best)

    @classmethod
    def from_row(cls, row: Sequence[int]) -> "Triangle":
        return cls.make([(row[0], (row[1], row[2])), (row[3], (row[4], row[5])),
                         (row[6], (row[7], row[8]))])

    def as_row(self) -> list[int]:
        return [x for o, s in self.corners for x in (o, s.m, s.k)]

    def oriented_edges(self):
        """Directed sides ``(o_i, o_j, s_j - s_i)`` in corner order."""
        cs = self.corners
        for i in range(3):
            (oa, sa), (ob, sb) = cs[i], cs[(i + 1) % 3]
            yield oa, ob, sb - sa

    def edges(self) -> list[Edge]:
        return [Edge.make(a, b, s) for a, b, s in self.oriented_edges()]

    def reversed(self) -> "Triangle":
        c = self.corners
        return Triangle.make([c[0], c[2], c[1]])

    def is_degenerate(self) -> bool:
        c = self.corners
        return c[0] == c[1] or c[1] == c[2] or c[0] == c[2]


def unordered_key(corners: Iterable) -> tuple:
    """Orientation- and translation-free key of a set of three lifted vertices."""
    cs = [(int(o), LatticeVector(*s)) for o, s in corners]
    return min(tuple(sorted(_translate(cs, anchor[1]))) for anchor in cs)


# ---------------------------------------------------------------------------
# integer lattice helpers


def _ext_gcd(a: int, b: int) -> tuple[int, int, int]:
    """Return ``(g, x, y)`` with ``a*x + b*y = g >= 0``."""
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def lattice_hnf(vectors: Iterable[Sequence[int]]) -> tuple[tuple[int, int], int]:
    """Hermite basis ``(g, h), (0, r)`` of the sublattice spanned by ``vectors``.

    ``g`` and ``r`` are non-negative; ``g * r`` is the index of the sublattice
    in ``Z^2`` (zero when the span has rank below two).
    """
    A = (0, 0)
    r = 0
    for v in vectors:
        x, y = int(v[0]), int(v[1])
        if x == 0:
            r = math.gcd(r, y)
            continue
        g, s, t = _ext_gcd(A[0], x)
        A_new = (g, s * A[1] + t * y)
        # x-free combination; (s, t; x/g, -A0/g) is unimodular
        w_y = (x // g) * A[1] - (A[0] // g) * y
        r = math.gcd(r, w_y)
        A = A_new
    if r:
        A = (A[0], A[1] % r)
    return A, r


def lattice_index(vectors: Iterable[Sequence[int]]) -> int:
    (g, _), r = lattice_hnf(vectors)
    return abs(g * r)


def _as_int_matrix(C) -> tuple[tuple[int, int], tuple[int, int]]:
    M = np.asarray(C)
    if M.shape != (2, 2):
        raise ValueError("change-of-basis matrix must be 2x2")
    if not np.all(np.equal(np.mod(M, 1), 0)):
        raise ValueError("change-of-basis matrix must be integral")
    return ((int(M[0, 0]), int(M[0, 1])), (int(M[1, 0]), int(M[1, 1])))


class Sublattice:
    """The sublattice ``C Z^2`` (columns of ``C`` are the new basis vectors).

    Provides canonical coset representatives and the reduction
    ``s = rep + C t`` used to fold lifted data back into the quotient.
    """

    def __init__(self, C):
        self.C = _as_int_matrix(C)
        (c11, c12), (c21, c22) = self.C
        self.det = c11 * c22 - c12 * c21
        if self.det == 0:
            raise ValueError("singular change-of-basis matrix")
        (self.g, self.h), self.r = lattice_hnf([(c11, c21), (c12, c22)])
        self.reps = [LatticeVector(x, y) for x in range(self.g) for y in range(self.r)]
        self.index = {rep: i for i, rep in enumerate(self.reps)}

    def __len__(self):
        return len(self.reps)

    def reduce(self, s: Sequence[int]) -> tuple[int, LatticeVector]:
        """Split ``s`` into (coset index, coordinates in the new basis)."""
        x, y = int(s[0]), int(s[1])
        q1 = x // self.g
        x, y = x - q1 * self.g, y - q1 * self.h
        q2 = y // self.r
        y -= q2 * self.r
        rep = LatticeVector(x, y)
        dx, dy = int(s[0]) - x, int(s[1]) - y
        (c11, c12), (c21, c22) = self.C
        tm, tk = c22 * dx - c12 * dy, -c21 * dx + c11 * dy
        assert tm % self.det == 0 and tk % self.det == 0
        return self.index[rep], LatticeVector(tm // self.det, tk // self.det)


# ---------------------------------------------------------------------------
# the complex


@dataclass(frozen=True)
class PeriodicComplex:
    """Torus quotient of a periodic simplicial plane.

    Instances are immutable; derived lookup tables are cached lazily.
    ``aux`` holds extra fixed-distance pairs that are not part of the
    surface (they are ignored by the surface checks).
    """

    n_orbits: int
    edges: frozenset
    triangles: frozenset
    aux: frozenset = frozenset()
    labels: tuple | None = field(default=None, compare=False)

    @classmethod
    def build(cls, n_orbits: int, edges: Iterable = (), triangles: Iterable = (),
              aux: Iterable = (), labels=None) -> "PeriodicComplex":
        """Canonicalise raw rows ``[u, v, m, k]`` / 9-int triangle rows."""
        def as_edge(e):
            if isinstance(e, Edge):
                return Edge.make(e.u, e.v, e.shift)
            if len(e) == 3:
                return Edge.make(e[0], e[1], e[2])
            return Edge.make(e[0], e[1], (e[2], e[3]))

        def as_tri(t):
            if isinstance(t, Triangle):
                return Triangle.make(t.corners)
            if len(t) == 9:
                return Triangle.from_row(t)
            return Triangle.make(t)

        return cls(int(n_orbits), frozenset(map(as_edge, edges)),
                   frozenset(map(as_tri, triangles)), frozenset(map(as_edge, aux)),
                   tuple(labels) if labels is not None else None)

    # -- derived tables ------------------------------------------------------

    @cached_property
    def sorted_edges(self) -> tuple:
        return tuple(sorted(self.edges))

    @cached_property
    def sorted_aux(self) -> tuple:
        return tuple(sorted(self.aux))

    @cached_property
    def sorted_triangles(self) -> tuple:
        return tuple(sorted(self.triangles))

    @cached_property
    def constraint_edges(self) -> tuple:
        """Surface edges then aux pairs, each block in canonical order."""
        return self.sorted_edges + self.sorted_aux

    @cached_property
    def constraint_array(self) -> np.ndarray:
        rows = [e.as_row() for e in self.constraint_edges]
        return np.array(rows, dtype=np.int64).reshape(len(rows), 4)

    @cached_property
    def _directed(self) -> frozenset:
        keys = set()
        for e in self.edges:
            keys.add((e.u, e.v, e.shift))
            keys.add((e.v, e.u, -e.shift))
        return frozenset(keys)

    def has_edge(self, u: int, v: int, shift: Sequence[int]) -> bool:
        return (u, v, LatticeVector(*shift)) in self._directed

    @cached_property
    def neighbors(self) -> tuple:
        """Per orbit, the sorted lifts ``(w, s)`` adjacent to its base lift."""
        nb = [[] for _ in range(self.n_orbits)]
        for e in self.edges:
            if 0 <= e.u < self.n_orbits and 0 <= e.v < self.n_orbits:
                nb[e.u].append((e.v, e.shift))
                nb[e.v].append((e.u, -e.shift))
        return tuple(tuple(sorted(x)) for x in nb)

    def degree(self, u: int) -> int:
        return len(self.neighbors[u])

    @cached_property
    def triangle_keys(self) -> frozenset:
        return frozenset(unordered_key(t.corners) for t in self.triangles)

    @cached_property
    def side_table(self) -> dict:
        """Directed side ``(a, b, s)`` -> ``(triangle, corner index of a)``."""
        table = {}
        for t in self.sorted_triangles:
            for i, (a, b, s) in enumerate(t.oriented_edges()):
                table.setdefault((a, b, s), (t, i))
        return table

    def triangle_left_of(self, a: tuple, b: tuple):
        """Lifted triangle containing the directed side ``a -> b``.

        Returns ``(corners, third)`` with corners as lifted ``(orbit, shift)``
        pairs in orientation order starting at ``a``, or ``None``.
        """
        hit = self.side_table.get((a[0], b[0], LatticeVector(*b[1]) - a[1]))
        if hit is None:
            return None
        t, i = hit
        tau = LatticeVector(*a[1]) - t.corners[i][1]
        cs = [(o, s + tau) for o, s in t.corners]
        cs = cs[i:] + cs[:i]
        return tuple(cs), cs[2]

    @cached_property
    def links(self) -> tuple:
        """Cyclic vertex links, or ``None`` for orbits whose link is not a cycle.

        The link of ``u`` is listed as lifts ``(w, s)`` around the base lift
        of ``u`` in orientation order, starting from the least lift.
        """
        succ = [defaultdict(list) for _ in range(self.n_orbits)]
        for t in self.triangles:
            cs = t.corners
            for i in range(3):
                u, su = cs[i]
                if not 0 <= u < self.n_orbits:
                    continue
                (x, sx), (y, sy) = cs[(i + 1) % 3], cs[(i + 2) % 3]
                succ[u][(x, sx - su)].append((y, sy - su))
        out = []
        for u in range(self.n_orbits):
            out.append(_single_cycle(succ[u]))
        return tuple(out)

    def link(self, u: int) -> tuple:
        lk = self.links[u]
        if lk is None:
            raise ValueError(f"link of orbit {u} is not a single cycle")
        return lk

    # -- convenience -----------------------------------------------------------

    def surface(self) -> "PeriodicComplex":
        """Same complex with the aux constraints dropped."""
        if not self.aux:
            return self
        return PeriodicComplex(self.n_orbits, self.edges, self.triangles, frozenset(),
                               self.labels)

    def counts(self) -> tuple[int, int, int]:
        return self.n_orbits, len(self.edges), len(self.triangles)

    def to_dict(self) -> dict:
        d = {
            "version": 1,
            "n_orbits": self.n_orbits,
            "edges": [e.as_row() for e in self.sorted_edges],
            "triangles": [t.as_row() for t in self.sorted_triangles],
            "aux": [e.as_row() for e in self.sorted_aux],
        }
        if self.labels is not None:
            d["labels"] = list(self.labels)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PeriodicComplex":
        if d.get("version") != 1:
            raise ValueError(f"unsupported complex format version {d.get('version')!r}")
        for key in ("n_orbits", "edges", "triangles"):
            if key not in d:
                raise ValueError(f"complex is missing {key!r}")
        rows = [*d["edges"], *d.get("aux", [])]
        if any(len(r) != 4 for r in rows) or any(len(t) != 9 for t in d["triangles"]):
            raise ValueError("malformed edge or triangle row")
        if not all(isinstance(x, int) for r in rows + list(d["triangles"]) for x in r):
            raise ValueError("complex entries must be integers")
        return cls.build(d["n_orbits"], d["edges"], d["triangles"], d.get("aux", []),
                         d.get("labels"))


def _single_cycle(succ: dict):
    if not succ or any(len(v) != 1 for v in succ.values()):
        return None
    nxt = {k: v[0] for k, v in succ.items()}
    if len(set(nxt.values())) != len(nxt) or set(nxt.values()) != set(nxt):
        return None
    start = min(nxt)
    cyc = [start]
    cur = nxt[start]
    while cur != start:
        cyc.append(cur)
        cur = nxt[cur]
    if len(cyc) != len(nxt) or len(cyc) < 3:
        return None
    return tuple(cyc)


# ---------------------------------------------------------------------------
# validation


class Violation(NamedTuple):
    kind: str
    detail: str
    item: object = None

    def __str__(self):
        return f"{self.kind}: {self.detail}"


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> set:
        return {v.kind for v in self.violations}

    def add(self, kind, detail, item=None):
        self.violations.append(Violation(kind, detail, item))

    def __iter__(self):
        return iter(self.violations)

    def __len__(self):
        return len(self.violations)

    def __str__(self):
        return "valid" if self.ok else "; ".join(map(str, self.violations))


def euler_characteristic(c: PeriodicComplex) -> int:
    return c.n_orbits - len(c.edges) + len(c.triangles)


def special_orbits(c: PeriodicComplex) -> frozenset:
    """Orbits joined by a surface edge to another vertex of the same orbit."""
    return frozenset(e.u for e in c.edges if e.u == e.v)


def _check_edge(e: Edge, n: int, rep: ValidationReport, what: str):
    if not (0 <= e.u < n and 0 <= e.v < n):
        rep.add("orbit out of range", f"{what} {e.as_row()}", e)
        return
    if e.u == e.v:
        if e.shift.is_zero():
            rep.add("loop", f"{what} {e.as_row()} joins a vertex to itself", e)
        elif not is_primitive(e.shift):
            rep.add("non-primitive self-edge",
                    f"{what} {e.as_row()} has shift {tuple(e.shift)} (gcd > 1)", e)


def cover_index(c: PeriodicComplex) -> int | None:
    """Index in ``Z^2`` of the image of the quotient's loops under the shift map.

    The universal cover of a torus quotient is realised by the shift labels
    exactly when this index is one.  ``None`` when the 1-skeleton is
    disconnected.
    """
    n = c.n_orbits
    adj = [[] for _ in range(n)]
    for e in c.edges:
        if 0 <= e.u < n and 0 <= e.v < n:
            adj[e.u].append((e.v, e.shift, e))
            adj[e.v].append((e.u, -e.shift, e))
    pot: dict[int, LatticeVector] = {0: ZERO} if n else {}
    tree = set()
    queue = deque([0]) if n else deque()
    while queue:
        x = queue.popleft()
        for y, s, e in adj[x]:
            if y not in pot:
                pot[y] = pot[x] + s
                tree.add(e)
                queue.append(y)
    if len(pot) != n:
        return None
    cycles = [pot[e.u] + e.shift - pot[e.v] for e in c.edges if e not in tree]
    return lattice_index(cycles)


def validate(c: PeriodicComplex) -> ValidationReport:
    """Check the hypotheses on a periodic triangulated plane.

    Returns a report listing every violated invariant; an empty report
    means the complex is a valid quotient of a triangulated plane.
    """
    rep = ValidationReport()
    n = c.n_orbits
    if n < 1:
        rep.add("empty", "complex has no vertex orbits")
        return rep
    for e in c.sorted_edges:
        _check_edge(e, n, rep, "edge")
    for e in c.sorted_aux:
        _check_edge(e, n, rep, "aux constraint")
        if e in c.edges:
            rep.add("aux duplicates edge", f"aux {e.as_row()} is a surface edge", e)

    side_count: dict = defaultdict(list)
    for t in c.sorted_triangles:
        if any(not 0 <= o < n for o, _ in t.corners):
            rep.add("orbit out of range", f"triangle {t.as_row()}", t)
            continue
        if t.is_degenerate():
            rep.add("degenerate triangle", f"triangle {t.as_row()} repeats a vertex", t)
            continue
        for a, b, s in t.oriented_edges():
            e = Edge.make(a, b, s)
            if e not in c.edges:
                rep.add("triangle edge missing",
                        f"triangle {t.as_row()} uses non-edge {e.as_row()}", t)
            forward = (e.u, e.v, e.shift) == (a, b, s)
            side_count[e].append(forward)

    for e in c.sorted_edges:
        sides = side_count.get(e, [])
        if len(sides) != 2:
            rep.add(f"edge in {len(sides)} triangle{'s' if len(sides) != 1 else ''}",
                    f"edge {e.as_row()} lies in {len(sides)} triangles (expected 2)", e)
        elif sides[0] == sides[1]:
            rep.add("inconsistent orientation",
                    f"both triangles at edge {e.as_row()} traverse it the same way", e)

    if not rep.violations:
        for u, lk in enumerate(c.links):
            if lk is None or len(lk) != c.degree(u):
                rep.add("link not a cycle",
                        f"link of orbit {u} is not a single cycle through its neighbours", u)

    chi = euler_characteristic(c)
    if chi != 0:
        rep.add("euler characteristic", f"V - E + F = {chi}, expected 0 for a torus")

    idx = cover_index(c)
    if idx is None:
        rep.add("disconnected", "the quotient 1-skeleton is disconnected")
    elif idx != 1:
        rep.add("cover not a plane",
                f"loop shifts generate a sublattice of index {idx}; the labelled "
                "cover is not simply connected" if idx else
                "loop shifts have rank < 2; the labelled cover is not a plane")
    return rep


# ---------------------------------------------------------------------------
# basis changes


def coset_representatives(C) -> list[LatticeVector]:
    """Canonical representatives of ``Z^2 / C Z^2`` in refinement order."""
    return list(Sublattice(C).reps)


def change_of_basis(c: PeriodicComplex, C) -> PeriodicComplex:
    """Quotient of the same plane by the sublattice spanned by the columns of ``C``.

    Orbit ``i`` of ``c`` splits into ``|det C|`` orbits numbered
    ``i * |det C| + j`` where ``j`` indexes :func:`coset_representatives`.
    With ``|det C| == 1`` this is a plain basis change.
    """
    L = Sublattice(C)
    N = len(L)

    def lift(o, s, rep):
        j, t = L.reduce((rep[0] + s[0], rep[1] + s[1]))
        return o * N + j, t

    edges, tris, aux = [], [], []
    for src, dst in ((c.edges, edges), (c.aux, aux)):
        for e in src:
            for j, rep in enumerate(L.reps):
                (u, t0), (v, t1) = lift(e.u, ZERO, rep), lift(e.v, e.shift, rep)
                dst.append(Edge.make(u, v, t1 - t0))
    for t in c.triangles:
        for rep in L.reps:
            tris.append(Triangle.make([lift(o, s, rep) for o, s in t.corners]))
    labels = None
    if c.labels is not None:
        labels = [f"{c.labels[i]}+{tuple(rep)}" for i in range(c.n_orbits) for rep in L.reps]
    return PeriodicComplex.build(c.n_orbits * N, edges, tris, aux, labels)


# ---------------------------------------------------------------------------
# lifts to the cover


@dataclass(frozen=True)
class LiftPatch:
    """Finite piece of the cover: lifts whose translates lie in a cell range."""

    vertices: tuple
    edges: tuple
    triangles: tuple

    @property
    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(self.edges) + len(self.triangles)

    def orbit_of(self, i: int) -> int:
        return self.vertices[i][0]


def lift_patch(c: PeriodicComplex, cells) -> LiftPatch:
    """Lift ``c`` over the translates ``cells = (m_range, k_range)``.

    Vertices are ``(orbit, translate)`` pairs; a simplex is kept when all of
    its lifted vertices fall inside the range.
    """
    m_range, k_range = cells
    ms, ks = list(m_range), list(k_range)
    inside = set(ms), set(ks)
    verts = [(o, LatticeVector(m, k)) for m in ms for k in ks for o in range(c.n_orbits)]
    index = {v: i for i, v in enumerate(verts)}

    def ok(t):
        return t[0] in inside[0] and t[1] in inside[1]

    edges, tris = [], []
    for m, k in product(ms, ks):
        base = LatticeVector(m, k)
        for e in c.sorted_edges:
            t = base + e.shift
            if ok(t):
                edges.append((index[(e.u, base)], index[(e.v, t)]))
        for tri in c.sorted_triangles:
            lifted = [(o, base + s) for o, s in tri.corners]
            if all(ok(s) for _, s in lifted):
                tris.append(tuple(index[x] for x in lifted))
    return LiftPatch(tuple(verts), tuple(edges), tuple(tris))


# ---------------------------------------------------------------------------
# isomorphism


def _apply_map(c, sigma, delta, orient):
    def tri(t):
        cs = [(sigma[o], s + delta[o]) for o, s in t.corners]
        if orient < 0:
            cs = [cs[0], cs[2], cs[1]]
        return Triangle.make(cs)

    def edge(e):
        return Edge.make(sigma[e.u], sigma[e.v], e.shift + delta[e.v] - delta[e.u])

    return (frozenset(map(edge, c.edges)), frozenset(map(tri, c.triangles)),
            frozenset(map(edge, c.aux)))


def find_isomorphism(c1: PeriodicComplex, c2: PeriodicComplex):
    """Orbit relabelling taking ``c1`` onto ``c2``, or ``None``.

    Allowed moves are a permutation of orbits, a change of the representative
    lift of each orbit, and a global reversal of orientation; the lattice
    basis is kept.  Returns ``(sigma, delta, orientation)``.
    """
    if c1.counts() != c2.counts() or len(c1.aux) != len(c2.aux):
        return None
    if not c1.triangles:
        return None
    t0 = c1.sorted_triangles[0]
    for orient in (1, -1):
        target = c2 if orient > 0 else PeriodicComplex(
            c2.n_orbits, c2.edges, frozenset(t.reversed() for t in c2.triangles), c2.aux)
        for t2 in target.sorted_triangles:
            for r in range(3):
                rot = t2.corners[r:] + t2.corners[:r]
                found = _propagate(c1, target, t0, rot)
                if found is None:
                    continue
                sigma, delta = found
                mapped = _apply_map(c1, sigma, delta, 1)
                if mapped == (target.edges, target.triangles, target.aux):
                    return sigma, delta, orient
    return None


def _propagate(c1, c2, t0, rot):
    sigma: dict = {}
    delta: dict = {}

    def assign(o, s, o2, s2):
        d = LatticeVector(*s2) - s
        if o in sigma:
            return sigma[o] == o2 and delta[o] == d
        if o2 in sigma.values():
            return False
        sigma[o], delta[o] = o2, d
        return True

    for (o, s), (o2, s2) in zip(t0.corners, rot):
        if not assign(o, s, o2, s2):
            return None
    seen = {t0}
    queue = deque([tuple(t0.corners)])
    while queue:
        cs = queue.popleft()
        for i in range(3):
            a, b = cs[i], cs[(i + 1) % 3]
            other = c1.triangle_left_of(b, a)
            if other is None:
                return None
            corners, third = other
            img_b = (sigma[b[0]], b[1] + delta[b[0]])
            img_a = (sigma[a[0]], a[1] + delta[a[0]])
            other2 = c2.triangle_left_of(img_b, img_a)
            if other2 is None:
                return None
            if not assign(third[0], third[1], other2[1][0], other2[1][1]):
                return None
            key = Triangle.make(corners)
            if key not in seen:
                seen.add(key)
                queue.append(corners)
    if len(sigma) != c1.n_orbits:
        return None
    return [sigma[i] for i in range(c1.n_orbits)], [delta[i] for i in range(c1.n_orbits)]


def is_isomorphic(c1: PeriodicComplex, c2: PeriodicComplex) -> bool:
    return find_isomorphism(c1, c2) is not None
