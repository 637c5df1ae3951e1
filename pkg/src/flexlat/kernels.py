"""Backend selection for the residual/Jacobian kernels.

The compiled extension is used when it imports; setting ``FLEXLAT_PURE=1``
forces the numpy fallback.
"""

import os

from . import _kernels_py as python_backend

compiled_backend = None
if os.environ.get("FLEXLAT_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:
        compiled_backend = None

_active = compiled_backend or python_backend
BACKEND = "compiled" if compiled_backend is not None else "python"

edge_residuals = _active.edge_residuals
edge_jacobian = _active.edge_jacobian
