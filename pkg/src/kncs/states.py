"""Construction of |xi; Kj, f> in a truncated Fock basis."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DivergentSeries, Indeterminate, NonexistentState
from .existence import classify
from .model import (MAX_TERMS, Nonlinearity, StateSpec, default_terms,
                    f_superfactorial, lattice_terms, log_f_values)
from .numerics import SignedLogScalar, log_factorial, log_factorial_array

DEFAULT_TOL = 1e-12
# the computed terms must end this far (in nats) below the truncation target
_TAIL_MARGIN = 30.0

__all__ = [
    "FockVector", "Nonlinearity", "StateSpec", "build_state", "closed_form_overlap",
    "decompose", "eigen_residual", "g_coefficient", "normalization", "overlap",
    "recompose", "branch_specs",
]


@dataclass(frozen=True, eq=False)
class FockVector:
    """Truncated amplitudes c_0..c_N.

    ``tail_bound`` bounds the probability mass beyond the cutoff.
    ``min_abs_laguerre`` is the smallest |L_n^m(eta**2)| that entered the
    build (``inf`` when no Laguerre value was involved).
    """

    amplitudes: np.ndarray
    tail_bound: float = 0.0
    min_abs_laguerre: float = math.inf
    n_terms: int = 0

    def __post_init__(self):
        a = np.array(self.amplitudes, dtype=complex)
        a.flags.writeable = False
        object.__setattr__(self, "amplitudes", a)

    @property
    def cutoff(self) -> int:
        return len(self.amplitudes) - 1

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.probabilities)))

    @classmethod
    def from_amplitudes(cls, amplitudes, tail_bound: float = 0.0) -> FockVector:
        return cls(np.asarray(amplitudes, dtype=complex), tail_bound=tail_bound,
                   n_terms=int(np.count_nonzero(amplitudes)))


@dataclass(frozen=True)
class _Series:
    """Normalized log|g(m)|**2 for m = 0..N with the signs of F."""

    spec: StateSpec
    logp: np.ndarray
    sign: np.ndarray
    tail: float
    lag_floor: float

    @property
    def N(self) -> int:
        return len(self.logp) - 1

    def sites(self) -> np.ndarray:
        return np.arange(len(self.logp)) * self.spec.K + self.spec.j


def _series(spec: StateSpec, tol: float, n_max: int | None = None) -> _Series:
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    return _series_cached(spec, float(tol), None if n_max is None else int(n_max))


@lru_cache(maxsize=512)
def _series_cached(spec: StateSpec, tol: float, n_max: int | None) -> _Series:
    verdict = classify(spec, n_max)
    if not verdict.exists:
        raise NonexistentState(f"{spec}: {verdict.diagnostic}")
    target = 2.0 * math.log(tol)
    if spec.xi == 0:
        lt = lattice_terms(spec.f, spec.K, spec.j, 1)
        return _Series(spec, np.zeros(1), np.ones(1, dtype=np.int8), 0.0,
                       float(lt.lag_floor[0]))
    lx = 2.0 * math.log(abs(spec.xi))
    M = default_terms(spec.f, spec.K) if n_max is None else int(n_max)
    while True:
        lt = lattice_terms(spec.f, spec.K, spec.j, M)
        T = np.arange(len(lt)) * lx + lt.base
        if np.isposinf(T).any():
            raise NonexistentState(f"{spec}: infinite coefficient")
        logZ = float(np.logaddexp.reduce(T))
        if T[-1] - logZ < target - _TAIL_MARGIN:
            break
        if len(lt) < M or M >= MAX_TERMS:
            raise Indeterminate(
                f"{spec}: series not below tol={tol:g} within {len(lt)} terms")
        M *= 2
    suffix = np.logaddexp.accumulate(T[::-1])[::-1] - logZ
    after = np.append(suffix[1:], -np.inf)
    N = int(np.argmax(after <= target))
    beyond = 0.0
    s = verdict.slope
    if math.isfinite(s) and s < 0 and math.isfinite(T[-1]):
        beyond = math.exp(T[-1] - logZ + s) / -math.expm1(s)
    tail = float(np.exp(after[N])) + beyond
    logp = T[: N + 1] - logZ
    sign = np.array(lt.sign[: N + 1])
    logp.flags.writeable = False
    sign.flags.writeable = False
    return _Series(spec, logp, sign, tail, float(lt.lag_floor[N]))


def _phases(spec: StateSpec, m: np.ndarray) -> np.ndarray:
    theta = cmath.phase(spec.xi)
    return np.exp(1j * theta * m)


def build_state(spec: StateSpec, tol: float = DEFAULT_TOL,
                n_max: int | None = None) -> FockVector:
    """Normalized amplitudes of |xi; Kj, f>, truncated where the neglected
    probability mass drops below tol**2 (so the neglected amplitude norm is
    below tol)."""
    ser = _series(spec, tol, n_max)
    sites = ser.sites()
    m = np.arange(len(ser.logp))
    amp = np.zeros(sites[-1] + 1, dtype=complex)
    amp[sites] = np.exp(0.5 * ser.logp) * ser.sign * _phases(spec, m)
    return FockVector(amp, tail_bound=ser.tail,
                      min_abs_laguerre=math.exp(ser.lag_floor),
                      n_terms=len(ser.logp))


def _principal_arg(z: complex) -> float:
    a = cmath.phase(z)
    return a + 2 * math.pi if a < 0 else a


def principal_root(xi: complex, K: int) -> complex:
    """K-th root of xi with argument in [0, 2 pi / K)."""
    if xi == 0:
        return 0j
    return abs(xi) ** (1.0 / K) * cmath.exp(1j * _principal_arg(xi) / K)


def g_coefficient(spec: StateSpec, n: int, l: int = 0) -> tuple[SignedLogScalar, float]:
    """g_Kj(n, l) = xi**(n + l/K) / (sqrt((nK+j+l)!) F(nK+j+l)).

    Returns ``(value, phase)``: the real signed-log factor and the phase of
    xi**(n + l/K) on the principal branch, so that
    ``g = value.to_real() * exp(1j * phase)``.
    """
    if n < 0 or l < 0:
        raise ValueError("n and l must be non-negative")
    K, j = spec.K, spec.j
    site = n * K + j + l
    F = f_superfactorial(spec.f, site, K)
    power = n + l / K
    if spec.xi == 0:
        mag = SignedLogScalar.one() if power == 0 else SignedLogScalar.zero()
    else:
        mag = SignedLogScalar(1, power * math.log(abs(spec.xi)))
    root_fact = SignedLogScalar(1, 0.5 * log_factorial(site))
    value = mag / root_fact / F
    return value, power * _principal_arg(spec.xi)


def normalization(spec: StateSpec, z: complex, tol: float = 1e-16) -> complex:
    """c_Kj(z) = (sum_m z**m / ((mK+j)! |F(mK+j)|**2))**(-1/2), principal root.

    Real positive for real positive z. Raises DivergentSeries outside the
    disk of convergence.
    """
    z = complex(z)
    if z == 0:
        return complex(1.0 / math.exp(0.5 * lattice_terms(spec.f, spec.K, spec.j, 1).base[0]))
    probe = spec.with_xi(math.sqrt(abs(z)))
    verdict = classify(probe)
    if not verdict.exists:
        raise DivergentSeries(f"|z|={abs(z):g} is outside the disk of convergence "
                              f"({verdict.diagnostic})")
    lz = math.log(abs(z))
    M = default_terms(spec.f, spec.K)
    lt = lattice_terms(spec.f, spec.K, spec.j, M)
    T = np.arange(len(lt)) * lz + lt.base
    top = float(T.max())
    keep = T - top > math.log(tol) - _TAIL_MARGIN
    last = int(np.nonzero(keep)[0][-1]) + 1
    m = np.arange(last)
    rel = np.exp(T[:last] - top) * np.exp(1j * cmath.phase(z) * m)
    s = complex(np.sum(rel))
    if s == 0:
        raise DivergentSeries("normalization sum vanishes")
    return cmath.exp(-0.5 * top) * s ** -0.5


def _check_compatible(a: StateSpec, b: StateSpec):
    if a.K != b.K or a.f != b.f:
        raise ValueError("overlap needs states with the same K and nonlinearity")


def overlap(a: StateSpec, b: StateSpec, tol: float = DEFAULT_TOL) -> complex:
    """<a|b> by direct summation over the truncated amplitudes."""
    _check_compatible(a, b)
    if a.j != b.j:
        return 0j
    va, vb = build_state(a, tol).amplitudes, build_state(b, tol).amplitudes
    n = min(len(va), len(vb))
    return complex(np.vdot(va[:n], vb[:n]))


def closed_form_overlap(a: StateSpec, b: StateSpec) -> complex:
    """c(|xi_a|^2) c(|xi_b|^2) / c(conj(xi_a) xi_b)^2, equal to <a|b>."""
    _check_compatible(a, b)
    if a.j != b.j:
        return 0j
    ca = normalization(a, abs(a.xi) ** 2)
    cb = normalization(b, abs(b.xi) ** 2)
    cab = normalization(a, a.xi.conjugate() * b.xi)
    return ca * cb / cab ** 2


def branch_specs(spec: StateSpec) -> list[StateSpec]:
    """The K single-quantum states |xi_j'; 10, f'> of the decomposition."""
    fb = Nonlinearity.branch_of(spec.f, spec.K)
    r = principal_root(spec.xi, spec.K)
    return [StateSpec(1, 0, r * cmath.exp(2j * math.pi * jp / spec.K), fb)
            for jp in range(spec.K)]


def decompose(spec: StateSpec) -> list[tuple[complex, complex]]:
    """Branch eigenvalues xi_j' and weights zeta_jj' with
    |xi; Kj, f> = sum_j' zeta_jj' |xi_j'; 10, f'>.

    f' is the K = 1 nonlinearity whose running product matches the
    descending-by-K product of f; for f = 1 it is f itself.
    """
    K, j = spec.K, spec.j
    branches = branch_specs(spec)
    r = principal_root(spec.xi, K)
    if r == 0:
        if j:
            raise ValueError("xi = 0 states with j > 0 have no branch decomposition")
        return [(b.xi, complex(1.0 / K)) for b in branches]
    c_kj = normalization(spec, abs(spec.xi) ** 2)
    c_10 = normalization(branches[0], abs(r) ** 2)
    pre = r ** (-j) / K * c_kj / c_10
    return [(b.xi, pre * cmath.exp(-2j * math.pi * j * jp / K))
            for jp, b in enumerate(branches)]


def recompose(spec: StateSpec, tol: float = DEFAULT_TOL) -> np.ndarray:
    """sum_j' zeta_jj' |xi_j'; 10, f'> as an amplitude array."""
    parts = [(zeta, build_state(b, tol).amplitudes)
             for b, (_, zeta) in zip(branch_specs(spec), decompose(spec))]
    size = max(len(v) for _, v in parts)
    out = np.zeros(size, dtype=complex)
    for zeta, v in parts:
        out[: len(v)] += zeta * v
    return out


def eigen_residual(v: FockVector, spec: StateSpec) -> float:
    """||a**K f(n) v - xi v|| on the truncated basis."""
    c = np.asarray(v.amplitudes)
    N, K = len(c) - 1, spec.K
    image = np.zeros_like(c)
    if N >= K:
        n = np.arange(N - K + 1)
        fs, fl, _ = log_f_values(spec.f, N)
        with np.errstate(divide="ignore", invalid="ignore"):
            logw = 0.5 * (log_factorial_array(n + K) - log_factorial_array(n)) + fl[n + K]
            w = fs[n + K] * np.exp(logw)
        src = c[K:]
        image[: N - K + 1] = np.where(src != 0, w * src, 0)
    return float(np.linalg.norm(image - spec.xi * c))
