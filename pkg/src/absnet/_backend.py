"""Kernel backend selection.

The compiled extension is used when importable; set ``ABSNET_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
kernels = _pykernels

if not os.environ.get("ABSNET_PURE_PYTHON"):
    try:
        from . import _ckernels as kernels  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

capacity_matrix = kernels.capacity_matrix
lambda2_gradient_fd = kernels.lambda2_gradient_fd
shortest_path_length = kernels.shortest_path_length
route_demand = kernels.route_demand
