"""Nonlinearity functions, state specifications and the log-domain series terms.

The unnormalized Fock amplitude of |xi; Kj, f> at lattice site n = mK + j is

    g(m) = xi**m / ( sqrt((mK+j)!) * F(mK+j) ),   F(l) = f(l) f(l-K) ... (factors >= K)

and every consumer (state builder, existence test, moments) works from
``log|g(m)|**2 = 2 m log|xi| + base(m)`` where ``base`` does not depend on xi.
``base`` is therefore computed once per (f, K, j) and cached.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .numerics import SignedLogScalar, laguerre_sequence, log_factorial_array

KINDS = ("identity", "trapped_ion", "tabulated", "branch")

# upper bound on lattice terms examined by the convergence machinery
MAX_TERMS = 1 << 20


@dataclass(frozen=True)
class Nonlinearity:
    """The operator function f(n) in a**K f(n).

    ``branch`` is the K = 1 nonlinearity induced by an order-K nonlinearity
    ``base``: f'(n) = F(n) / F(n-1), with F the descending-by-K product of
    ``base``. It is what makes the K-branch decomposition exact.
    """

    kind: str
    eta: float = 0.0
    K: int = 1
    table: tuple[float, ...] = ()
    base: Nonlinearity | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.K < 1:
            raise ValueError("K must be a positive integer")
        if self.kind == "trapped_ion" and not self.eta >= 0:
            raise ValueError("eta must be non-negative")
        if self.kind == "tabulated":
            object.__setattr__(self, "table", tuple(float(v) for v in self.table))
            if not self.table:
                raise ValueError("tabulated nonlinearity needs at least one value")
        if self.kind == "branch" and self.base is None:
            raise ValueError("branch nonlinearity needs a base")

    @classmethod
    def identity(cls) -> Nonlinearity:
        return cls("identity")

    @classmethod
    def trapped_ion(cls, eta: float, K: int) -> Nonlinearity:
        return cls("trapped_ion", eta=float(eta), K=int(K))

    @classmethod
    def tabulated(cls, values) -> Nonlinearity:
        return cls("tabulated", table=tuple(values))

    @classmethod
    def branch_of(cls, f: Nonlinearity, K: int) -> Nonlinearity:
        if K == 1 or f.kind == "identity":
            return f
        return cls("branch", K=int(K), base=f)

    def __str__(self):
        if self.kind == "trapped_ion":
            return f"trapped_ion(eta={self.eta:g}, K={self.K})"
        if self.kind == "branch":
            return f"branch({self.base}, K={self.K})"
        if self.kind == "tabulated":
            return f"tabulated[{len(self.table)}]"
        return self.kind


@dataclass(frozen=True)
class StateSpec:
    """Full description of one state |xi; Kj, f>."""

    K: int
    j: int
    xi: complex
    f: Nonlinearity = field(default_factory=Nonlinearity.identity)

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("K must be a positive integer")
        if int(self.j) != self.j or not 0 <= self.j < self.K:
            raise ValueError(f"j must satisfy 0 <= j < K, got j={self.j}, K={self.K}")
        object.__setattr__(self, "K", int(self.K))
        object.__setattr__(self, "j", int(self.j))
        object.__setattr__(self, "xi", complex(self.xi))
        if not (math.isfinite(self.xi.real) and math.isfinite(self.xi.imag)):
            raise ValueError("xi must be finite")

    def with_xi(self, xi: complex) -> StateSpec:
        return StateSpec(self.K, self.j, xi, self.f)


# -- f values ---------------------------------------------------------------

def _freeze(*arrays):
    for a in arrays:
        a.flags.writeable = False
    return arrays


@lru_cache(maxsize=128)
def _log_f_cached(f: Nonlinearity, size: int):
    """(sign, log|f|, log|Laguerre| floor) for l = 0..size-1."""
    sign = np.ones(size, dtype=np.int8)
    logabs = np.zeros(size)
    lag_floor = np.full(size, np.inf)
    if f.kind == "identity":
        pass
    elif f.kind == "tabulated":
        if size > len(f.table):
            raise IndexError(
                f"tabulated nonlinearity has {len(f.table)} values, {size} requested")
        vals = np.asarray(f.table[:size])
        sign = np.sign(vals).astype(np.int8)
        with np.errstate(divide="ignore"):
            logabs = np.log(np.abs(vals))
    elif f.kind == "trapped_ion":
        K, x = f.K, f.eta ** 2
        nh = size - K
        if nh > 0:
            sK, lK = laguerre_sequence(nh - 1, K, x)
            s0, l0 = laguerre_sequence(nh - 1, 0, x)
            n = np.arange(nh)
            with np.errstate(invalid="ignore"):
                logabs[K:] = (log_factorial_array(n) - log_factorial_array(n + K)
                              + lK - l0)
            sign[K:] = sK * s0
            # L^0 = 0 makes f infinite: sign stays that of L^K
            inf_mask = s0 == 0
            sign[K:][inf_mask] = sK[inf_mask]
            logabs[K:][inf_mask & (sK != 0)] = np.inf
            zero_mask = sK == 0
            logabs[K:][zero_mask] = -np.inf
            lag_floor[K:] = np.minimum(lK, l0)
    elif f.kind == "branch":
        Fs, Fl, floor = _log_superfactorial_cached(f.base, f.K, size)
        sign[1:] = Fs[1:] * Fs[:-1]
        with np.errstate(invalid="ignore"):
            logabs[1:] = Fl[1:] - Fl[:-1]
        lag_floor = floor.copy()
    return _freeze(sign, logabs, lag_floor)


def _pow2(n: int) -> int:
    return 1 << max(int(n) - 1, 1).bit_length()


def log_f_values(f: Nonlinearity, l_max: int):
    """Signs and log|f(l)| for l = 0..l_max (read-only arrays)."""
    if f.kind == "tabulated":
        if l_max >= len(f.table):
            raise IndexError(f"f({l_max}) is outside the table of {len(f.table)} values")
        sign, logabs, floor = _log_f_cached(f, len(f.table))
    else:
        sign, logabs, floor = _log_f_cached(f, _pow2(l_max + 1))
    return sign[: l_max + 1], logabs[: l_max + 1], floor[: l_max + 1]


@lru_cache(maxsize=128)
def _log_superfactorial_cached(f: Nonlinearity, K: int, size: int):
    """Descending-by-K products F(l) for l = 0..size-1, plus a running floor of
    the smallest log|Laguerre| value entering each product."""
    fs, fl, ffloor = log_f_values(f, size - 1)
    sign = np.ones(size, dtype=np.int8)
    logabs = np.zeros(size)
    floor = np.full(size, np.inf)
    for r in range(K):
        idx = np.arange(r + K, size, K)
        if idx.size == 0:
            continue
        with np.errstate(invalid="ignore"):
            logabs[idx] = np.cumsum(fl[idx])
        sign[idx] = np.cumprod(fs[idx])
        floor[idx] = np.minimum.accumulate(ffloor[idx])
    return _freeze(sign, logabs, floor)


def f_value(f: Nonlinearity, l: int) -> SignedLogScalar:
    """f(l) as a signed-log value; f(l) = 1 below the sideband order K."""
    if l < 0:
        raise ValueError("l must be non-negative")
    if f.kind == "tabulated" and l >= len(f.table):
        raise IndexError(f"f({l}) is outside the table of {len(f.table)} values")
    sign, logabs, _ = log_f_values(f, l)
    s, v = int(sign[l]), float(logabs[l])
    if s == 0:
        return SignedLogScalar.zero()
    if math.isinf(v) and v > 0:
        raise OverflowError(f"f({l}) is infinite (Laguerre denominator vanishes)")
    return SignedLogScalar(s, v)


def f_superfactorial(f: Nonlinearity, l: int, K: int) -> SignedLogScalar:
    """f(l) f(l-K) f(l-2K) ... over factors with index >= K; 1 when l < K."""
    if l < 0:
        raise ValueError("l must be non-negative")
    if l < K:
        return SignedLogScalar.one()
    out = SignedLogScalar.one()
    for idx in range(l, K - 1, -K):
        out = out * f_value(f, idx)
    return out


# -- lattice series ---------------------------------------------------------

@dataclass(frozen=True)
class LatticeTerms:
    """xi-independent part of log|g(m)|**2 for m = 0..len-1.

    ``base[m] = -ln((mK+j)!) - 2 ln|F(mK+j)|``; ``sign[m]`` is the sign of F;
    ``lag_floor[m]`` is the smallest log|Laguerre| seen up to that term.
    """

    base: np.ndarray
    sign: np.ndarray
    lag_floor: np.ndarray
    K: int
    j: int

    def __len__(self):
        return len(self.base)


def default_terms(f: Nonlinearity, K: int) -> int:
    """Term budget for the convergence test.

    For the trapped-ion nonlinearity the asymptotic regime starts at
    n * eta**2 >> 1, so the budget scales with 1 / (K eta**2).
    """
    if f.kind == "trapped_ion" and f.eta > 0:
        want = 32768.0 / (K * f.eta ** 2)
        return int(min(max(_pow2(math.ceil(want)), 4096), 1 << 17))
    if f.kind == "branch":
        return min(default_terms(f.base, f.K) * f.K, MAX_TERMS)
    return 4096


def available_terms(f: Nonlinearity, K: int, j: int) -> int:
    """Number of lattice terms computable for f (unbounded kinds: MAX_TERMS)."""
    if f.kind == "tabulated":
        return max((len(f.table) - 1 - j) // K + 1, 0)
    if f.kind == "branch":
        return available_terms(f.base, f.K, 0) * f.K if f.base.kind == "tabulated" else MAX_TERMS
    return MAX_TERMS


@lru_cache(maxsize=64)
def _lattice_cached(f: Nonlinearity, K: int, j: int, M: int) -> LatticeTerms:
    l_max = (M - 1) * K + j
    Fs, Fl, floor = _log_superfactorial_cached(f, K, _pow2(l_max + 1)) \
        if f.kind != "tabulated" else _log_superfactorial_cached(f, K, len(f.table))
    idx = np.arange(M) * K + j
    with np.errstate(invalid="ignore"):
        base = -log_factorial_array(idx) - 2.0 * Fl[idx]
    sign = Fs[idx].copy()
    lag_floor = floor[idx].copy()
    return LatticeTerms(*_freeze(base, sign, lag_floor), K=K, j=j)


def lattice_terms(f: Nonlinearity, K: int, j: int, M: int) -> LatticeTerms:
    """Cached xi-independent series terms, at most M of them."""
    M = min(int(M), available_terms(f, K, j))
    if M <= 0:
        raise IndexError("no lattice terms available for this nonlinearity")
    if f.kind == "tabulated":
        return _lattice_cached(f, K, j, M)
    size = min(_pow2(M), MAX_TERMS)
    full = _lattice_cached(f, K, j, size)
    if size == M:
        return full
    return LatticeTerms(full.base[:M], full.sign[:M], full.lag_floor[:M], K, j)

