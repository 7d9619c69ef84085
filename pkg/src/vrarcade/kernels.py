"""Numeric kernel dispatch.

The compiled extension ``vrarcade._kernels`` is used when it imports;
otherwise the NumPy fallback in ``vrarcade._kernels_py`` is used. Set
``VRARCADE_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

if os.environ.get("VRARCADE_PURE_PYTHON", "") not in ("", "0"):
    from vrarcade import _kernels_py as _impl

    BACKEND = "python"
else:
    try:
        from vrarcade import _kernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        from vrarcade import _kernels_py as _impl

        BACKEND = "python"

wrap_angle = _impl.wrap_angle
nlos_matrix = _impl.nlos_matrix
azimuths = _impl.azimuths
tx_gains = _impl.tx_gains
rx_gains = _impl.rx_gains
sinr_all = _impl.sinr_all
player_sinr = _impl.player_sinr
candidate_sinr = _impl.candidate_sinr

__all__ = [
    "BACKEND",
    "wrap_angle",
    "nlos_matrix",
    "azimuths",
    "tx_gains",
    "rx_gains",
    "sinr_all",
    "player_sinr",
    "candidate_sinr",
]
