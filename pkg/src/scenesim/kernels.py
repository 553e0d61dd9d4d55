"""Kernel backend selection.

Imports the compiled extension when available, otherwise the pure-Python
fallback.  Override with SCENESIM_BACKEND=python|compiled (``compiled``
raises if the extension is missing rather than silently degrading).
"""

from __future__ import annotations

import os

from . import kernels_py


def _load(name: str):
    if name == "python":
        return kernels_py
    try:
        from . import _kernelsc  # type: ignore[attr-defined]

        return _kernelsc
    except ImportError:
        if name == "compiled":
            raise ImportError(
                "SCENESIM_BACKEND=compiled but scenesim._kernelsc is not built; "
                "run `pip install -e . --no-build-isolation` or "
                "`python setup.py build_ext --inplace`"
            )
        return kernels_py


_impl = _load(os.environ.get("SCENESIM_BACKEND", "auto"))

BACKEND = _impl.BACKEND
fnv1a64 = _impl.fnv1a64
point_in_mesh = _impl.point_in_mesh
segment_in_mesh = _impl.segment_in_mesh
segment_min_gap_discs = _impl.segment_min_gap_discs
point_min_gap_discs = _impl.point_min_gap_discs
pair_contact_time = _impl.pair_contact_time
sweep_conflicts = _impl.sweep_conflicts
pair_min_stats = _impl.pair_min_stats
integrate_steps = _impl.integrate_steps


def get_backend(name: str = "auto"):
    """Module implementing the kernel functions for the named backend."""
    return _load(name)
