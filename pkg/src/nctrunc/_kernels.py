"""Hot inner loops with two interchangeable backends.

The numba backend compiles sequential loops (compensated summation cannot be
vectorised without losing the error bound).  The numpy backend reaches the
same accuracy by accumulating in extended precision.  Select with the
``NCTRUNC_BACKEND`` environment variable (``numba`` or ``numpy``); the
default is numba when it imports.
"""

import math
import os

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


# ---------------------------------------------------------------- numpy path


def _np_compensated_cumsum(x):
    acc = np.cumsum(np.asarray(x, dtype=np.longdouble))
    return acc.astype(np.float64)


def _np_compensated_sum(x):
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return 0.0
    return float(np.sum(x.astype(np.longdouble)))


def _np_flow_kernel(delta, T):
    # (exp(i T d) - 1) / (i T d) == exp(i T d / 2) * sin(T d / 2) / (T d / 2)
    half = 0.5 * T * np.asarray(delta, dtype=np.float64)
    return np.exp(1j * half) * np.sinc(half / np.pi)


def _np_eigenspace_ends(keys):
    # index of the last mode sharing mode n's eigenvalue, i.e. N(lambda_n) - 1
    return np.searchsorted(keys, keys, side="right") - 1


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def _nb_compensated_cumsum(x):
        out = np.empty(x.shape[0], dtype=np.float64)
        s = 0.0
        c = 0.0
        for i in range(x.shape[0]):
            v = x[i]
            t = s + v
            if abs(s) >= abs(v):
                c += (s - t) + v
            else:
                c += (v - t) + s
            s = t
            out[i] = s + c
        return out

    @njit(cache=True)
    def _nb_compensated_sum(x):
        s = 0.0
        c = 0.0
        for i in range(x.shape[0]):
            v = x[i]
            t = s + v
            if abs(s) >= abs(v):
                c += (s - t) + v
            else:
                c += (v - t) + s
            s = t
        return s + c

    @njit(cache=True)
    def _nb_flow_kernel(delta, T):
        out = np.empty(delta.shape[0], dtype=np.complex128)
        for i in range(delta.shape[0]):
            h = 0.5 * T * delta[i]
            if h == 0.0:
                out[i] = 1.0
            else:
                s = math.sin(h) / h
                out[i] = complex(math.cos(h) * s, math.sin(h) * s)
        return out

    @njit(cache=True)
    def _nb_eigenspace_ends(keys):
        n = keys.shape[0]
        out = np.empty(n, dtype=np.int64)
        end = n - 1
        for i in range(n - 1, -1, -1):
            if i < n - 1 and keys[i] != keys[i + 1]:
                end = i
            out[i] = end
        return out


BACKENDS = ("numba", "numpy") if HAVE_NUMBA else ("numpy",)


def _resolve_backend():
    name = os.environ.get("NCTRUNC_BACKEND", "numba" if HAVE_NUMBA else "numpy")
    name = name.strip().lower()
    if name not in ("numba", "numpy"):
        raise ValueError(f"NCTRUNC_BACKEND must be 'numba' or 'numpy', got {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        return "numpy"
    return name


BACKEND = _resolve_backend()


def get_kernels(backend=None):
    """Return a namespace dict of kernel callables for ``backend``."""
    backend = backend or BACKEND
    if backend == "numba":
        return {
            "compensated_cumsum": lambda x: _nb_compensated_cumsum(
                np.ascontiguousarray(x, dtype=np.float64)
            ),
            "compensated_sum": lambda x: float(
                _nb_compensated_sum(np.ascontiguousarray(x, dtype=np.float64))
            ),
            "flow_kernel": lambda d, T: _nb_flow_kernel(
                np.ascontiguousarray(d, dtype=np.float64), float(T)
            ),
            "eigenspace_ends": lambda k: _nb_eigenspace_ends(
                np.ascontiguousarray(k, dtype=np.float64)
            ),
        }
    return {
        "compensated_cumsum": _np_compensated_cumsum,
        "compensated_sum": _np_compensated_sum,
        "flow_kernel": _np_flow_kernel,
        "eigenspace_ends": lambda k: _np_eigenspace_ends(
            np.asarray(k, dtype=np.float64)
        ),
    }


_active = get_kernels()


def compensated_cumsum(x):
    """Prefix sums of a float64 vector, left to right, compensated."""
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return _active["compensated_cumsum"](x.real) + 1j * _active[
            "compensated_cumsum"
        ](x.imag)
    return _active["compensated_cumsum"](x)


def compensated_sum(x):
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return complex(
            _active["compensated_sum"](x.real), _active["compensated_sum"](x.imag)
        )
    return _active["compensated_sum"](x)


def flow_kernel(delta, T):
    """Closed-form time average of exp(i t delta) over t in [0, T]."""
    delta = np.asarray(delta, dtype=np.float64)
    shape = delta.shape
    return _active["flow_kernel"](delta.ravel(), T).reshape(shape)


def eigenspace_ends(keys):
    """For nondecreasing eigenvalue keys, the last index of each key's run."""
    return _active["eigenspace_ends"](keys)
