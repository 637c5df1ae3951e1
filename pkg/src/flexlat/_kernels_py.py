"""Pure numpy versions of the edge kernels (fallback when the extension is absent)."""

import numpy as np


def _edge_vectors(pos, a, b, edges):
    u, v, m, k = edges.T
    return pos[v] + np.outer(m, a) + np.outer(k, b) - pos[u]


def edge_residuals(pos, a, b, edges, target, out):
    d = _edge_vectors(pos, a, b, edges)
    out[:] = np.einsum("ij,ij->i", d, d) - target


def edge_jacobian(pos, a, b, edges, colmap, out):
    """Fill ``out`` (zeroed, shape E x 3n) with gauge-chart derivatives."""
    if len(edges) == 0:
        return
    d = _edge_vectors(pos, a, b, edges)
    u, v, m, k = edges.T
    rows = np.arange(len(edges))
    moving = u != v
    for ends, sign in ((v, 2.0), (u, -2.0)):
        cols = colmap[ends]
        sel = moving & (cols >= 0)
        for j in range(3):
            np.add.at(out, (rows[sel], cols[sel] + j), sign * d[sel, j])
    ncol = out.shape[1]
    out[:, ncol - 3] = 2.0 * m * d[:, 0]
    out[:, ncol - 2] = 2.0 * k * d[:, 0]
    out[:, ncol - 1] = 2.0 * k * d[:, 1]
