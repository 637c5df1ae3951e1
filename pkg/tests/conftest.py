import math

import numpy as np
import pytest

from flexlat.builders import MiuraParams, miura_ori, star_subdivide, triangulated_plane
from flexlat.realization import Realization
from flexlat.reduction import flip_edge

A = np.array([1.0, 0.0, 0.0])
B = np.array([0.0, 1.0, 0.0])
DIAG12 = [[1, 0], [0, 2]]
DIAG22 = [[2, 0], [0, 2]]
MIURA = MiuraParams(math.pi / 3, 2.0, 2.0, 0.3)

# lines printed by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def plane():
    return triangulated_plane(A, B)


@pytest.fixture
def plane12():
    return triangulated_plane(A, B, DIAG12)


@pytest.fixture
def plane22():
    return triangulated_plane(A, B, DIAG22)


@pytest.fixture
def miura():
    return miura_ori(MIURA)


def random_rotation(rng):
    Q, R = np.linalg.qr(rng.standard_normal((3, 3)))
    Q = Q * np.sign(np.diag(R))
    if np.linalg.det(Q) < 0:
        Q[:, 0] = -Q[:, 0]
    return Q


def lattice_cloud(n: int = 20, h: float = 0.01, centre=(2.0, 0.1, 3.0)):
    """Synthetic 2-D grid of Gram points (negative control)."""
    u, v = np.meshgrid(np.arange(n) * h, np.arange(n) * h, indexing="ij")
    c = np.asarray(centre)
    pts = c + np.stack([u.ravel(), 0.3 * v.ravel(), v.ravel() - 0.5 * u.ravel()], axis=1)
    return pts


def scramble(c, rng, subdivisions=3, flips=6):
    """Random star subdivisions followed by random admissible edge flips."""
    for _ in range(subdivisions):
        t = c.sorted_triangles[rng.integers(len(c.triangles))]
        c = star_subdivide(c, t)
    done = 0
    for _ in range(20 * flips):
        if done == flips:
            break
        e = c.sorted_edges[rng.integers(len(c.edges))]
        try:
            c = flip_edge(c, e)
        except ValueError:
            continue
        done += 1
    return c


def random_base_case(rng):
    """Random all-special plane complex with a perturbed realization."""
    # the sublattice must contain an edge direction, or no orbit is special
    q = int(rng.integers(1, 5))
    x = int(rng.integers(-3, 4))
    e = [(1, 0), (0, 1), (1, -1)][rng.integers(3)]
    f = {(1, 0): (x, q), (0, 1): (-q, x), (1, -1): (x, q - x)}[e]
    C = [[e[0], f[0]], [e[1], f[1]]]
    c, r = triangulated_plane(rng.standard_normal(3), rng.standard_normal(3), C)
    r = Realization(r.positions + 0.3 * rng.standard_normal(r.positions.shape), r.a, r.b)
    return c, r
