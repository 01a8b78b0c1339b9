"""Photon statistics of |xi; Kj, f>: number distribution, moments, Mandel
parameter, quadrature squeezing and the coherent-start mixed distribution.

Moments are computed from the series terms directly (g-function sums); the
``*_from_amplitudes`` functions give an independent route through the built
Fock vector.
"""
from __future__ import annotations

import cmath
import math
from concurrent.futures import Executor
from dataclasses import dataclass
from functools import partial

import numpy as np

from .errors import ZeroMeanOccupation
from .model import Nonlinearity, StateSpec
from .numerics import log_factorial_array
from .states import DEFAULT_TOL, FockVector, _series, build_state


@dataclass(frozen=True)
class StatisticsReport:
    mean_n: float
    mean_n2: float
    mandel: float
    squeeze_S: float
    variance_x: float


@dataclass(frozen=True)
class MixedSpec:
    """Steady state reached from an initial coherent state |alpha>."""

    K: int
    alpha_mag: float
    xi: complex
    f: Nonlinearity

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be positive")
        if self.alpha_mag < 0:
            raise ValueError("alpha_mag must be non-negative")

    def component(self, j: int) -> StateSpec:
        return StateSpec(self.K, j, self.xi, self.f)


def number_distribution(spec: StateSpec, tol: float = DEFAULT_TOL):
    """(n, P(n)) for n = 0..cutoff; P vanishes off the lattice n = mK + j."""
    v = build_state(spec, tol)
    return np.arange(v.cutoff + 1), v.probabilities


def moment_n(spec: StateSpec, l: int, tol: float = DEFAULT_TOL) -> float:
    """<n**l> as the weighted sum of (mK+j)**l."""
    if l < 0:
        raise ValueError("l must be non-negative")
    ser = _series(spec, tol)
    w = np.exp(ser.logp)
    return float(np.sum(ser.sites().astype(float) ** l * w) / np.sum(w))


def moment_a(spec: StateSpec, l: int, tol: float = DEFAULT_TOL) -> complex:
    """<a**l>; exactly zero unless K divides l."""
    if l < 0:
        raise ValueError("l must be non-negative")
    if l % spec.K:
        return 0j
    if l == 0:
        return 1 + 0j
    p = l // spec.K
    ser = _series(spec, tol)
    if spec.xi == 0 or p > ser.N:
        return 0j
    k = ser.sites()[: ser.N + 1 - p]
    lo, hi = ser.logp[: ser.N + 1 - p], ser.logp[p:]
    logw = 0.5 * (log_factorial_array(k + l) - log_factorial_array(k)) + 0.5 * (lo + hi)
    sign = ser.sign[: ser.N + 1 - p].astype(float) * ser.sign[p:]
    total = float(np.sum(sign * np.exp(logw))) / float(np.sum(np.exp(ser.logp)))
    # conj(xi**m) xi**(m+p) = |xi|**(2m) xi**p; the magnitudes are already in logw
    return total * cmath.exp(1j * p * cmath.phase(spec.xi))


def _report(mean_n, mean_n2, a1, a2) -> StatisticsReport:
    if mean_n == 0:
        raise ZeroMeanOccupation("<n> = 0: the Mandel parameter is undefined")
    mandel = mean_n2 / mean_n - mean_n
    S = mean_n + a2.real - 2.0 * a1.real ** 2
    return StatisticsReport(mean_n, mean_n2, mandel, S, 1.0 + 2.0 * S)


def statistics(spec: StateSpec, tol: float = DEFAULT_TOL) -> StatisticsReport:
    return _report(moment_n(spec, 1, tol), moment_n(spec, 2, tol),
                   moment_a(spec, 1, tol), moment_a(spec, 2, tol))


def mandel(spec: StateSpec, tol: float = DEFAULT_TOL) -> float:
    """M = <n^2>/<n> - <n>; below 1 means sub-Poissonian."""
    mean = moment_n(spec, 1, tol)
    if mean == 0:
        raise ZeroMeanOccupation("<n> = 0: the Mandel parameter is undefined")
    return moment_n(spec, 2, tol) / mean - mean


def squeezing(spec: StateSpec, tol: float = DEFAULT_TOL) -> float:
    """S = <n> + Re<a^2> - 2 Re^2<a>; the x quadrature is squeezed when S < 0."""
    return (moment_n(spec, 1, tol) + moment_a(spec, 2, tol).real
            - 2.0 * moment_a(spec, 1, tol).real ** 2)


def statistics_from_amplitudes(v: FockVector) -> StatisticsReport:
    """The same report computed from Fock amplitudes."""
    c = np.asarray(v.amplitudes)
    n = np.arange(len(c), dtype=float)
    p = np.abs(c) ** 2
    p = p / p.sum()
    mean = float(np.dot(n, p))
    var = float(np.dot((n - mean) ** 2, p))
    a1 = complex(np.vdot(c[:-1], c[1:] * np.sqrt(n[1:]))) if len(c) > 1 else 0j
    a2 = (complex(np.vdot(c[:-2], c[2:] * np.sqrt(n[1:-1] * n[2:])))
          if len(c) > 2 else 0j)
    if mean == 0:
        raise ZeroMeanOccupation("<n> = 0: the Mandel parameter is undefined")
    mean2 = var + mean ** 2
    S = mean + a2.real - 2.0 * a1.real ** 2
    return StatisticsReport(mean, mean2, var / mean, S, 1.0 + 2.0 * S)


def mixed_weights(mix: MixedSpec) -> np.ndarray:
    """beta_Kj = exp(-|alpha|^2/2) sqrt(sum_m |alpha|^(2(mK+j)) / (mK+j)!)."""
    K, a = mix.K, float(mix.alpha_mag)
    if a == 0:
        out = np.zeros(K)
        out[0] = 1.0
        return out
    a2 = a * a
    n_top = int(a2 + 12.0 * a + 60.0 + K)
    n = np.arange(n_top + 1)
    logp = 2.0 * n * math.log(a) - a2 - log_factorial_array(n)
    beta2 = np.array([np.exp(np.logaddexp.reduce(logp[r::K])) for r in range(K)])
    return np.sqrt(beta2)


def mixed_distribution(mix: MixedSpec, tol: float = DEFAULT_TOL,
                       equal_weights: bool = False):
    """(n, P_mix(n)) with P_mix(n) = beta_{K,r}^2 P_{K,r}(n), r = n mod K.

    Parity lattices of different j are disjoint, so the coherent sum
    (sum_j beta_j sqrt(P_j))^2 has no cross terms. ``equal_weights`` uses
    beta^2 = 1/K for every component.
    """
    K = mix.K
    beta2 = np.full(K, 1.0 / K) if equal_weights else mixed_weights(mix) ** 2
    comps = [build_state(mix.component(j), tol).probabilities for j in range(K)]
    size = max(len(p) for p in comps)
    out = np.zeros(size)
    for j, p in enumerate(comps):
        out[j: len(p): K] = beta2[j] * p[j::K]
    return np.arange(size), out


def sweep_grid(xi_max: float, points: int = 256) -> np.ndarray:
    """``points`` uniform |xi| values on (0, xi_max]."""
    if xi_max <= 0 or points < 1:
        raise ValueError("xi_max must be positive and points at least 1")
    return xi_max * np.arange(1, points + 1) / points


def _sweep_point(spec: StateSpec, tol: float, mag: float) -> StatisticsReport:
    return statistics(spec.with_xi(mag * cmath.exp(1j * cmath.phase(spec.xi))), tol)


def statistics_sweep(spec: StateSpec, grid, tol: float = DEFAULT_TOL,
                     executor: Executor | None = None) -> list[StatisticsReport]:
    """Statistics along |xi| in ``grid`` at the phase of ``spec.xi``.

    Results follow the grid order whatever the executor's completion order.
    """
    work = partial(_sweep_point, spec if spec.xi != 0 else spec.with_xi(1.0), tol)
    mapper = executor.map if executor is not None else map
    return list(mapper(work, [float(g) for g in grid]))
