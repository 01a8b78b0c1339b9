"""Overflow-proof scalars and the special-function kernels.

Everything downstream works with natural-log magnitudes plus an explicit
sign, so factorial and Laguerre products of arbitrary length never leave
the representable range of a double.
"""
from __future__ import annotations

import ctypes
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg.cython_lapack
from numba import njit
from scipy.special import gammaln

LOG_MAX_FLOAT = math.log(np.finfo(float).max)

# rescale the Laguerre recurrence whenever a value leaves [1e-150, 1e150]
_RESCALE_HI = 1e150
_RESCALE_LO = 1e-150
_LOG_RESCALE = math.log(_RESCALE_HI)


@dataclass(frozen=True)
class SignedLogScalar:
    """A real number stored as ``sign * exp(logmag)``.

    ``sign`` is -1, 0 or +1. Zero is canonicalised to ``logmag = -inf`` so
    that equality behaves.
    """

    sign: int
    logmag: float

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or +1, got {self.sign!r}")
        if self.sign == 0 and self.logmag != -math.inf:
            object.__setattr__(self, "logmag", -math.inf)

    @classmethod
    def from_real(cls, x: float) -> SignedLogScalar:
        if x == 0:
            return cls(0, -math.inf)
        if not math.isfinite(x):
            raise ValueError(f"cannot represent {x!r}")
        return cls(1 if x > 0 else -1, math.log(abs(x)))

    @classmethod
    def one(cls) -> SignedLogScalar:
        return cls(1, 0.0)

    @classmethod
    def zero(cls) -> SignedLogScalar:
        return cls(0, -math.inf)

    def to_real(self) -> float:
        if self.sign == 0:
            return 0.0
        if self.logmag > LOG_MAX_FLOAT:
            raise OverflowError(
                f"magnitude exp({self.logmag:.6g}) exceeds the double range")
        return self.sign * math.exp(self.logmag)

    def __mul__(self, other: SignedLogScalar) -> SignedLogScalar:
        if not isinstance(other, SignedLogScalar):
            return NotImplemented
        sign = self.sign * other.sign
        if sign == 0:
            return SignedLogScalar.zero()
        return SignedLogScalar(sign, self.logmag + other.logmag)

    def __truediv__(self, other: SignedLogScalar) -> SignedLogScalar:
        if not isinstance(other, SignedLogScalar):
            return NotImplemented
        if other.sign == 0:
            raise ZeroDivisionError("division by a signed-log zero")
        if self.sign == 0:
            return SignedLogScalar.zero()
        return SignedLogScalar(self.sign * other.sign, self.logmag - other.logmag)

    def __pow__(self, p) -> SignedLogScalar:
        if isinstance(p, (int, np.integer)):
            p = int(p)
            if self.sign == 0:
                if p < 0:
                    raise ZeroDivisionError("zero to a negative power")
                return SignedLogScalar.one() if p == 0 else SignedLogScalar.zero()
            sign = self.sign if p % 2 else 1
            return SignedLogScalar(sign, p * self.logmag)
        if self.sign < 0:
            raise ValueError("non-integer power of a negative number")
        if self.sign == 0:
            if p > 0:
                return SignedLogScalar.zero()
            raise ZeroDivisionError("zero to a non-positive real power")
        return SignedLogScalar(1, float(p) * self.logmag)

    def __neg__(self) -> SignedLogScalar:
        return SignedLogScalar(-self.sign, self.logmag)

    def __abs__(self) -> SignedLogScalar:
        return SignedLogScalar(abs(self.sign), self.logmag)

    def sqrt(self) -> SignedLogScalar:
        return self ** 0.5


def log_factorial(n: int) -> float:
    """ln(n!), exact below 21 and via lgamma above."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n <= 20:
        return math.log(math.factorial(n))
    return math.lgamma(n + 1.0)


def log_factorial_array(n) -> np.ndarray:
    return gammaln(np.asarray(n, dtype=float) + 1.0)


@njit(cache=True)
def _laguerre_run(n_max, m, x):
    vals = np.empty(n_max + 1)
    scales = np.zeros(n_max + 1)
    vals[0] = 1.0
    if n_max == 0:
        return vals, scales
    prev = 1.0
    cur = 1.0 + m - x
    scale = 0.0
    vals[1] = cur
    for n in range(1, n_max):
        nxt = ((2 * n + 1 + m - x) * cur - (n + m) * prev) / (n + 1)
        prev = cur
        cur = nxt
        big = max(abs(prev), abs(cur))
        if big > _RESCALE_HI:
            prev /= _RESCALE_HI
            cur /= _RESCALE_HI
            scale += _LOG_RESCALE
        elif big < _RESCALE_LO and big > 0.0:
            prev *= _RESCALE_HI
            cur *= _RESCALE_HI
            scale -= _LOG_RESCALE
        vals[n + 1] = cur
        scales[n + 1] = scale
    return vals, scales


@lru_cache(maxsize=256)
def _laguerre_cached(n_max: int, m: int, x: float):
    vals, scales = _laguerre_run(n_max, m, x)
    sign = np.sign(vals).astype(np.int8)
    with np.errstate(divide="ignore"):
        logmag = np.log(np.abs(vals)) + scales
    sign.flags.writeable = False
    logmag.flags.writeable = False
    return sign, logmag


def laguerre_sequence(n_max: int, m: int, x: float) -> tuple[np.ndarray, np.ndarray]:
    """Signs and log-magnitudes of L_n^m(x) for n = 0..n_max.

    Uses the three-term recurrence in n with running rescaling. The
    returned arrays are read-only and shared between callers.
    """
    if n_max < 0 or m < 0:
        raise ValueError("n_max and m must be non-negative")
    if x < 0:
        raise ValueError("x must be non-negative")
    # cache on a power-of-two length so growing requests reuse work
    size = 1 << max(int(n_max), 1).bit_length()
    sign, logmag = _laguerre_cached(size, int(m), float(x))
    return sign[: n_max + 1], logmag[: n_max + 1]


def laguerre(n: int, m: int, x: float) -> SignedLogScalar:
    """Generalized Laguerre polynomial L_n^m(x) as a signed-log value."""
    if n < 0 or m < 0:
        raise ValueError("n and m must be non-negative")
    if n <= 64:
        vals, scales = _laguerre_run(int(n), int(m), float(x))
        v, s = vals[n], scales[n]
        if v == 0.0:
            return SignedLogScalar.zero()
        return SignedLogScalar(1 if v > 0 else -1, math.log(abs(v)) + s)
    sign, logmag = laguerre_sequence(n, m, x)
    if sign[n] == 0:
        return SignedLogScalar.zero()
    return SignedLogScalar(int(sign[n]), float(logmag[n]))


def logsumexp_signed(logmag: np.ndarray, sign: np.ndarray) -> SignedLogScalar:
    """Sum of ``sign * exp(logmag)`` without leaving the log domain."""
    logmag = np.asarray(logmag, dtype=float)
    mask = np.asarray(sign) != 0
    if not mask.any():
        return SignedLogScalar.zero()
    top = logmag[mask].max()
    total = float(np.sum(np.asarray(sign)[mask] * np.exp(logmag[mask] - top)))
    if total == 0.0:
        return SignedLogScalar.zero()
    return SignedLogScalar(1 if total > 0 else -1, top + math.log(abs(total)))


@lru_cache(maxsize=1)
def _dbdsqr():
    """LAPACK dbdsqr from scipy's exported Cython LAPACK table."""
    capsule = scipy.linalg.cython_lapack.__pyx_capi__["dbdsqr"]
    api = ctypes.pythonapi
    api.PyCapsule_GetName.restype = ctypes.c_char_p
    api.PyCapsule_GetName.argtypes = [ctypes.py_object]
    api.PyCapsule_GetPointer.restype = ctypes.c_void_p
    api.PyCapsule_GetPointer.argtypes = [ctypes.py_object, ctypes.c_char_p]
    ptr = api.PyCapsule_GetPointer(capsule, api.PyCapsule_GetName(capsule))
    pi, pd = ctypes.POINTER(ctypes.c_int), ctypes.POINTER(ctypes.c_double)
    proto = ctypes.CFUNCTYPE(None, ctypes.c_char_p, pi, pi, pi, pi,
                             pd, pd, pd, pi, pd, pi, pd, pi, pd, pi)
    return proto(ptr)


def bidiagonal_svd(diag, superdiag) -> tuple[np.ndarray, np.ndarray]:
    """SVD of a real upper-bidiagonal matrix: (s descending, Vt).

    Uses the zero-shift QR of LAPACK dbdsqr, which resolves every singular
    value to high relative accuracy, so singular values far below
    eps * ||B|| still come out right. A dense SVD cannot do that.
    """
    d = np.array(diag, dtype=float)
    e = np.array(superdiag, dtype=float)
    n = d.size
    if n == 0 or e.size != max(n - 1, 0):
        raise ValueError("need n diagonal and n-1 superdiagonal entries")
    e = np.append(e, 0.0)
    vt = np.asfortranarray(np.eye(n))
    work = np.zeros(4 * n)
    dummy = np.zeros(1)
    ints = [ctypes.c_int(v) for v in (n, n, 0, 0, n, 1, 1, 0)]
    N, ncvt, nru, ncc, ldvt, ldu, ldc, info = ints
    ptr = lambda a: a.ctypes.data_as(ctypes.POINTER(ctypes.c_double))
    ref = ctypes.byref
    _dbdsqr()(b"U", ref(N), ref(ncvt), ref(nru), ref(ncc), ptr(d), ptr(e), ptr(vt),
              ref(ldvt), ptr(dummy), ref(ldu), ptr(dummy), ref(ldc), ptr(work), ref(info))
    if info.value != 0:
        raise np.linalg.LinAlgError(f"dbdsqr failed to converge (info={info.value})")
    return d, np.ascontiguousarray(vt)
