"""Hot loops for evaluating the trigonometric CDF approximation.

The approximate CDF is F(x) = 1/2 + 2*Re sum_{k=1}^{K-1} q_k z^k with
z = exp(-i*omega*x); both F and its x-derivative are computed by complex
Horner recurrences (no per-term trig), parallelized over evaluation points.
Falls back to a numpy implementation when numba is unavailable.
"""

from __future__ import annotations

import numpy as np

try:  # pragma: no cover - exercised implicitly
    import numba as _nb

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False


def _cdf_only_py(q, omega, xs, out):
    K = q.shape[0]
    k = np.arange(1, K)
    for j in range(xs.shape[0]):
        z = np.exp(-1j * omega * xs[j] * k)
        out[j] = 0.5 + 2.0 * np.real(np.dot(q[1:], z))
    return out


def _cdf_pair_py(q, omega, xs, f, df):
    K = q.shape[0]
    k = np.arange(1, K)
    kq = q[1:] * k
    for j in range(xs.shape[0]):
        z = np.exp(-1j * omega * xs[j] * k)
        f[j] = 0.5 + 2.0 * np.real(np.dot(q[1:], z))
        df[j] = 2.0 * omega * np.imag(np.dot(kq, z))
    return f, df


if _HAVE_NUMBA:

    @_nb.njit(parallel=True, fastmath=False, cache=True)
    def _cdf_only_nb(qre, qim, omega, xs, out):  # pragma: no cover - jit
        K = qre.shape[0]
        for j in _nb.prange(xs.shape[0]):
            x = xs[j]
            zre = np.cos(omega * x)
            zim = -np.sin(omega * x)
            hre = qre[K - 1]
            him = qim[K - 1]
            for k in range(K - 2, 0, -1):
                t = hre * zre - him * zim + qre[k]
                him = hre * zim + him * zre + qim[k]
                hre = t
            out[j] = 0.5 + 2.0 * (hre * zre - him * zim)
        return out

    @_nb.njit(parallel=True, fastmath=False, cache=True)
    def _cdf_pair_nb(qre, qim, omega, xs, f, df):  # pragma: no cover - jit
        K = qre.shape[0]
        for j in _nb.prange(xs.shape[0]):
            x = xs[j]
            zre = np.cos(omega * x)
            zim = -np.sin(omega * x)
            hre = qre[K - 1]
            him = qim[K - 1]
            dre = (K - 1) * qre[K - 1]
            dim = (K - 1) * qim[K - 1]
            for k in range(K - 2, 0, -1):
                t = hre * zre - him * zim + qre[k]
                him = hre * zim + him * zre + qim[k]
                hre = t
                t = dre * zre - dim * zim + k * qre[k]
                dim = dre * zim + dim * zre + k * qim[k]
                dre = t
            f[j] = 0.5 + 2.0 * (hre * zre - him * zim)
            df[j] = 2.0 * omega * (dre * zim + dim * zre)
        return f, df


def cdf_values(q: np.ndarray, omega: float, xs: np.ndarray) -> np.ndarray:
    """F(xs) for coefficient vector q (q[0] = 1/2 unused beyond the constant)."""
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    out = np.empty(xs.shape[0])
    if q.shape[0] < 2:
        out[:] = 0.5
        return out
    if _HAVE_NUMBA:
        _cdf_only_nb(
            np.ascontiguousarray(q.real), np.ascontiguousarray(q.imag), omega, xs, out
        )
        return out
    return _cdf_only_py(q, omega, xs, out)


def cdf_and_derivative(q: np.ndarray, omega: float, xs: np.ndarray):
    """(F(xs), F'(xs)) in one pass."""
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    f = np.empty(xs.shape[0])
    df = np.empty(xs.shape[0])
    if q.shape[0] < 2:
        f[:] = 0.5
        df[:] = 0.0
        return f, df
    if _HAVE_NUMBA:
        _cdf_pair_nb(
            np.ascontiguousarray(q.real), np.ascontiguousarray(q.imag), omega, xs, f, df
        )
        return f, df
    return _cdf_pair_py(q, omega, xs, f, df)


def set_threads(n: int) -> None:
    """Bound the worker-thread count of the evaluation kernels."""
    if _HAVE_NUMBA:
        _nb.set_num_threads(max(1, int(n)))
