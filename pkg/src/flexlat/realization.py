"""Positions, period vectors, squared edge lengths and the gauge chart."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .lattice_complex import Edge, PeriodicComplex, Sublattice

#: squared lengths keyed by canonical :class:`Edge`
EdgeLengths = dict


class DegenerateLatticeError(ValueError):
    """Period vectors are (numerically) colinear."""


class GramMatrix(NamedTuple):
    g11: float
    g12: float
    g22: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)

    def matrix(self) -> np.ndarray:
        return np.array([[self.g11, self.g12], [self.g12, self.g22]])

    def is_positive_definite(self) -> bool:
        return self.g11 > 0 and self.g11 * self.g22 - self.g12 ** 2 > 0

    def inner(self, lam, mu) -> float:
        """``(lam, mu)`` for integer lattice coordinates."""
        return float(np.asarray(lam, float) @ self.matrix() @ np.asarray(mu, float))

    def transformed(self, C) -> "GramMatrix":
        """Gram matrix of the basis ``(a, b) C``: ``C^T G C``."""
        C = np.asarray(C, dtype=float)
        G = C.T @ self.matrix() @ C
        return GramMatrix(float(G[0, 0]), float(G[0, 1]), float(G[1, 1]))


@dataclass(frozen=True)
class GaugeFrame:
    """Pin one vertex at the origin, ``a`` on the +x axis, ``b`` in the upper xy half-plane."""

    pinned: int = 0


def _colinearity(a, b) -> float:
    return float(np.dot(a, a) * np.dot(b, b) - np.dot(a, b) ** 2)


@dataclass(frozen=True, eq=False)
class Realization:
    """Positions of the orbit representatives plus the two period vectors."""

    positions: np.ndarray
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "positions", np.array(self.positions, dtype=float).reshape(-1, 3))
        object.__setattr__(self, "a", np.array(self.a, dtype=float).reshape(3))
        object.__setattr__(self, "b", np.array(self.b, dtype=float).reshape(3))

    @property
    def n(self) -> int:
        return len(self.positions)

    def lift(self, orbit: int, shift) -> np.ndarray:
        return self.positions[orbit] + shift[0] * self.a + shift[1] * self.b

    def is_nondegenerate(self, rtol: float = 1e-14) -> bool:
        scale = np.dot(self.a, self.a) * np.dot(self.b, self.b)
        return _colinearity(self.a, self.b) > rtol * scale

    def transformed(self, R=None, t=None, scale: float = 1.0) -> "Realization":
        """Image under ``x -> scale * R x + t`` (``t`` does not touch periods)."""
        R = np.eye(3) if R is None else np.asarray(R, float)
        t = np.zeros(3) if t is None else np.asarray(t, float)
        return Realization(scale * self.positions @ R.T + t, scale * R @ self.a, scale * R @ self.b)

    def __eq__(self, other):
        if not isinstance(other, Realization):
            return NotImplemented
        return (np.array_equal(self.positions, other.positions)
                and np.array_equal(self.a, other.a) and np.array_equal(self.b, other.b))

    def to_dict(self) -> dict:
        return {"positions": self.positions.tolist(), "a": self.a.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Realization":
        try:
            return cls(d["positions"], d["a"], d["b"])
        except (KeyError, ValueError, TypeError) as exc:
            raise ValueError(f"malformed realization block: {exc}") from exc


def edge_length_sq(r: Realization, e: Edge) -> float:
    d = r.positions[e.v] + e.shift[0] * r.a + e.shift[1] * r.b - r.positions[e.u]
    return float(d @ d)


def all_edge_lengths(c: PeriodicComplex, r: Realization) -> EdgeLengths:
    """Squared lengths of every surface edge and aux constraint of ``c``."""
    return {e: edge_length_sq(r, e) for e in c.constraint_edges}


def gram(r: Realization) -> GramMatrix:
    if not r.is_nondegenerate():
        raise DegenerateLatticeError("period vectors a, b are colinear")
    return GramMatrix(float(r.a @ r.a), float(r.a @ r.b), float(r.b @ r.b))


def gauge_rotation(a, b) -> np.ndarray:
    """Proper rotation taking ``a`` to +x and ``b`` into the upper xy half-plane."""
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    if _colinearity(a, b) <= 1e-14 * np.dot(a, a) * np.dot(b, b):
        raise DegenerateLatticeError("period vectors a, b are colinear")
    e1 = a / np.linalg.norm(a)
    w = b - (b @ e1) * e1
    e2 = w / np.linalg.norm(w)
    e3 = np.cross(e1, e2)
    return np.vstack([e1, e2, e3])


def apply_gauge(r: Realization, f: GaugeFrame = GaugeFrame()) -> Realization:
    """Rigidly move ``r`` into the gauge chart of ``f``."""
    R = gauge_rotation(r.a, r.b)
    pos = (r.positions - r.positions[f.pinned]) @ R.T
    a = R @ r.a
    b = R @ r.b
    # exact zeros where the frame demands them
    pos[f.pinned] = 0.0
    a[1:] = 0.0
    b[2] = 0.0
    return Realization(pos, a, b)


def residuals(c: PeriodicComplex, r: Realization, target: EdgeLengths) -> np.ndarray:
    """``edge_length_sq - target`` for every constraint, in canonical order."""
    missing = [e for e in c.constraint_edges if e not in target]
    if missing:
        raise KeyError(f"no target length for {missing[0].as_row()}")
    return np.array([edge_length_sq(r, e) - target[e] for e in c.constraint_edges])


def refine_realization(r: Realization, C) -> Realization:
    """Realization of ``change_of_basis(c, C)`` induced by ``r``."""
    L = Sublattice(C)
    pos = [r.positions[i] + rep[0] * r.a + rep[1] * r.b
           for i in range(r.n) for rep in L.reps]
    (c11, c12), (c21, c22) = L.C
    return Realization(pos, c11 * r.a + c21 * r.b, c12 * r.a + c22 * r.b)
