import os
import subprocess
import sys

import numpy as np
import pytest

from flexlat import kernels



def _data(seed, n=5, E=30):
    rng = np.random.default_rng(seed)
    pos = rng.standard_normal((n, 3))
    a, b = rng.standard_normal(3), rng.standard_normal(3)
    edges = np.column_stack([rng.integers(0, n, E), rng.integers(0, n, E),
                             rng.integers(-2, 3, E), rng.integers(-2, 3, E)]).astype(np.int64)
    colmap = np.array([-1] + [3 * i for i in range(n - 1)], dtype=np.int64)
    target = rng.random(E)
    return pos, a, b, np.ascontiguousarray(edges), colmap, target


def _run(backend, data):
    pos, a, b, edges, colmap, target = data
    res = np.empty(len(edges))
    jac = np.zeros((len(edges), 3 * len(pos)))
    backend.edge_residuals(pos, a, b, edges, target, res)
    backend.edge_jacobian(pos, a, b, edges, colmap, jac)
    return res, jac


@pytest.mark.skipif(kernels.compiled_backend is None, reason="extension not built")
@pytest.mark.parametrize("seed", range(10))
def test_backends_agree(seed):
    data = _data(seed)
    r1, j1 = _run(kernels.python_backend, data)
    r2, j2 = _run(kernels.compiled_backend, data)
    np.testing.assert_allclose(r1, r2, rtol=0, atol=1e-13)
    np.testing.assert_allclose(j1, j2, rtol=0, atol=1e-13)


def test_self_edges_do_not_touch_position_columns():
    pos = np.array([[0.0, 0.0, 0.0], [1.0, 2.0, 3.0]])
    a, b = np.array([2.0, 0, 0]), np.array([0.5, 1.0, 0])
    edges = np.array([[1, 1, 1, 0]], dtype=np.int64)
    colmap = np.array([-1, 0], dtype=np.int64)
    for backend in filter(None, (kernels.python_backend, kernels.compiled_backend)):
        jac = np.zeros((1, 6))
        backend.edge_jacobian(pos, a, b, edges, colmap, jac)
        assert np.all(jac[0, :3] == 0)
        assert jac[0, 3] == 2 * 1 * 2.0


def test_pure_fallback_selected_by_environment():
    env = dict(os.environ, FLEXLAT_PURE="1")
    out = subprocess.run([sys.executable, "-c", "import flexlat.kernels as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_benchmark_script_runs():
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    out = subprocess.run([sys.executable, os.path.join(root, "benchmarks", "bench_kernels.py"),
                          "--size", "3", "--repeat", "2"], capture_output=True, text=True,
                         check=True)
    assert "python" in out.stdout
