"""Hot numeric kernels with a numba backend and a pure-numpy fallback.

The numba implementations are used by default. Set the environment variable
``NFLS_NO_NUMBA=1`` (before import) to force the pure-numpy path; the same
path is selected automatically when numba is not installed. Both backends
implement identical semantics; ``benchmarks/bench_kernels.py`` compares them.
"""

import os

import numpy as np

from . import _numpy

_FORCE_NUMPY = os.environ.get("NFLS_NO_NUMBA", "").strip() not in ("", "0")

if not _FORCE_NUMPY:
    try:
        from . import _numba
    except ImportError:
        _numba = None
else:
    _numba = None

BACKEND = "numpy" if _numba is None else "numba"
_impl = _numpy if _numba is None else _numba


def _as_c(x, dtype):
    return np.ascontiguousarray(x, dtype=dtype)


def projection_power_nearfield(positions, thetas, rs, wavelength, include_amplitude, basis):
    return _impl.projection_power_nearfield(
        _as_c(positions[:, 0], np.float64), _as_c(positions[:, 1], np.float64),
        _as_c(thetas, np.float64), _as_c(rs, np.float64),
        float(wavelength), bool(include_amplitude), _as_c(basis, np.complex128))


def projection_power_phase(mvec, xs, basis):
    return _impl.projection_power_phase(
        _as_c(mvec, np.float64), _as_c(xs, np.float64), _as_c(basis, np.complex128))


def moving_dml_objective(positions, wavelength, thetas, rs, vrs, vths, times, y,
                         include_amplitude=False):
    return _impl.moving_dml_objective(
        _as_c(positions[:, 0], np.float64), _as_c(positions[:, 1], np.float64),
        float(wavelength),
        _as_c(thetas, np.float64), _as_c(rs, np.float64),
        _as_c(vrs, np.float64), _as_c(vths, np.float64),
        _as_c(times, np.float64), _as_c(y, np.complex128), bool(include_amplitude))
