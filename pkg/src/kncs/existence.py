"""Existence of a state: convergence of its normalization series.

The series terms are t(m) = |xi|**(2m) * exp(base(m)). With the trapped-ion
nonlinearity the log-terms wander by O(sqrt(m)) around a linear trend (the
"tortuous" Laguerre zero structure), so a local ratio test misfires in both
directions. Instead the test fits the linear trend of log t(m) over the
second half of a long run of terms: the series converges when the slope is
negative and diverges when it is positive. The slope is linear in log|xi|,
which makes the verdict monotone in |xi| and lets the xi-independent part be
cached per (f, K, j).
"""
from __future__ import annotations

import math
from concurrent.futures import Executor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import BracketFailure, Indeterminate
from .model import LatticeTerms, Nonlinearity, StateSpec, default_terms, lattice_terms

DEFAULT_WINDOW = 16
# a trend is only trusted when it moves the log-terms by more than this many
# multiples of the scatter around it, over the fitted range
TREND_MARGIN = 2.0
CEILING = 1e6


@dataclass(frozen=True)
class ExistenceVerdict:
    exists: bool
    terms_examined: int
    last_ratio: float
    diagnostic: str
    slope: float = math.nan


@dataclass(frozen=True)
class PhaseCurve:
    K: int
    points: list[tuple[float, float]]
    tolerance: float
    j: int = 0
    gaps: list[tuple[float, str]] = field(default_factory=list)


@dataclass(frozen=True)
class _Trend:
    slope: float          # d base / dm over the fitted half
    scatter: float        # rms residual around the fitted line
    span: int             # number of m values in the fit
    terminates: bool      # finitely many terms, or an entire series
    blows_up: bool        # F vanishes somewhere: a term is infinite
    M: int


@lru_cache(maxsize=256)
def _trend(f: Nonlinearity, K: int, j: int, M: int) -> _Trend:
    if f.kind == "identity" or (f.kind == "trapped_ion" and f.eta == 0):
        # factorial decay: entire in xi
        return _Trend(-math.inf, 0.0, 0, True, False, M)
    lt = lattice_terms(f, K, j, M)
    base = lt.base
    M = len(base)
    if np.isposinf(base).any() or np.isnan(base).any():
        return _Trend(math.nan, math.nan, 0, False, True, M)
    if np.isneginf(base).any():
        return _Trend(-math.inf, 0.0, 0, True, False, M)
    lo = M // 2
    m = np.arange(lo, M, dtype=float)
    y = base[lo:]
    if m.size < 2:
        return _Trend(math.nan, math.nan, int(m.size), False, False, M)
    mc = m - m.mean()
    slope = float(np.dot(mc, y - y.mean()) / np.dot(mc, mc))
    resid = y - y.mean() - slope * mc
    scatter = float(np.sqrt(np.mean(resid ** 2)))
    return _Trend(slope, scatter, int(m.size), False, False, M)


@lru_cache(maxsize=256)
def _common_trend(f: Nonlinearity, K: int, j: int, M: int) -> _Trend:
    """Trend of chain j, with the slope averaged over every residue chain.

    The trapped-ion rate is the same on every chain n = mK + r, and the
    Laguerre oscillations sample differently on each, so the mean slope
    has less bias than any single one. Chains with a singular structure
    keep their own verdict.
    """
    own = _trend(f, K, j, M)
    if f.kind != "trapped_ion" or K == 1 or own.terminates or own.blows_up:
        return own
    chains = [own if r == j else _trend(f, K, r, M) for r in range(K)]
    if any(c.terminates or c.blows_up or c.span != own.span for c in chains):
        return own
    slope = float(np.mean([c.slope for c in chains]))
    scatter = float(np.mean([c.scatter for c in chains]))
    return _Trend(slope, scatter, own.span, False, False, own.M)


def _budget(spec: StateSpec, n_max: int | None) -> int:
    return int(n_max) if n_max is not None else default_terms(spec.f, spec.K)


def _log_xi2(xi_mag: float) -> float:
    return 2.0 * math.log(xi_mag) if xi_mag > 0 else -math.inf


def growth_rate(spec: StateSpec, n_max: int | None = None) -> float:
    """Fitted per-term slope of log t(m); negative means convergent."""
    tr = _common_trend(spec.f, spec.K, spec.j, _budget(spec, n_max))
    if tr.blows_up:
        return math.inf
    if tr.terminates or spec.xi == 0:
        return -math.inf
    return _log_xi2(abs(spec.xi)) + tr.slope


def classify(spec: StateSpec, n_max: int | None = None,
             window: int = DEFAULT_WINDOW) -> ExistenceVerdict:
    """Decide whether the normalization series of ``spec`` converges.

    ``window`` sets the trailing stretch over which ``last_ratio`` (the
    geometric-mean term ratio) is reported. Raises Indeterminate when the
    fitted trend is smaller than the scatter of the terms around it.
    """
    M = _budget(spec, n_max)
    if M < 10 * window:
        raise ValueError(f"n_max={M} must be at least 10 * window={10 * window}")
    lt = lattice_terms(spec.f, spec.K, spec.j, M)
    M = len(lt)
    if M < 10 * window:
        raise Indeterminate(
            f"only {M} terms are available for {spec.f}; need {10 * window}")
    tr = _common_trend(spec.f, spec.K, spec.j, M)
    lx = _log_xi2(abs(spec.xi))
    last_ratio = _last_ratio(lt, lx, window)
    if tr.blows_up:
        return ExistenceVerdict(False, M, last_ratio,
                                "f vanishes at a lattice site: infinite coefficient")
    if tr.terminates:
        return ExistenceVerdict(True, M, last_ratio,
                                "series terminates or is entire in xi", -math.inf)
    if spec.xi == 0:
        return ExistenceVerdict(True, M, last_ratio, "xi = 0: single-term series",
                                -math.inf)
    slope = lx + tr.slope
    drift = slope * tr.span
    if abs(drift) <= TREND_MARGIN * tr.scatter:
        raise Indeterminate(
            f"trend {slope:.3e}/term over {tr.span} terms is within the scatter "
            f"{tr.scatter:.3g}; raise n_max")
    if slope < 0:
        return ExistenceVerdict(True, M, last_ratio,
                                f"log-terms decay at {slope:.4g} per term", slope)
    return ExistenceVerdict(False, M, last_ratio,
                            f"log-terms grow at {slope:.4g} per term", slope)


def _last_ratio(lt: LatticeTerms, lx: float, window: int) -> float:
    b = lt.base
    if len(b) <= window or not math.isfinite(lx):
        return 0.0 if lx == -math.inf else math.nan
    with np.errstate(invalid="ignore"):
        step = (b[-1] - b[-1 - window]) / window + lx
    return float(np.exp(step)) if np.isfinite(step) else math.nan


def exists(spec: StateSpec, n_max: int | None = None) -> bool:
    """Binary verdict used by bisection: sign of the fitted growth rate."""
    return growth_rate(spec, n_max) < 0


def critical_xi(K: int, j: int, eta: float, tol: float = 1e-3,
                n_max: int | None = None, ceiling: float = CEILING) -> float:
    """|xi| above which |xi; Kj, f_trapped_ion(eta)> stops existing.

    Brackets by doubling from ``tol`` and bisects until the bracket is
    narrower than ``tol``.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    if tol <= 0:
        raise ValueError("tol must be positive")
    spec = StateSpec(K, j, tol, Nonlinearity.trapped_ion(eta, K))
    lo = tol
    if not exists(spec.with_xi(lo), n_max):
        return 0.5 * lo
    hi = 2.0 * lo
    while exists(spec.with_xi(hi), n_max):
        lo, hi = hi, 2.0 * hi
        if hi > ceiling:
            raise BracketFailure(
                f"state exists up to |xi|={lo:g} (K={K}, j={j}, eta={eta:g})")
    while hi - lo >= tol:
        mid = 0.5 * (lo + hi)
        if exists(spec.with_xi(mid), n_max):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _critical_point(args):
    K, j, eta, tol, n_max = args
    try:
        return eta, critical_xi(K, j, eta, tol, n_max), None
    except BracketFailure as exc:
        return eta, math.nan, str(exc)


def phase_diagram(K: int, eta_grid, tol: float = 1e-3, j: int = 0,
                  n_max: int | None = None,
                  executor: Executor | None = None) -> PhaseCurve:
    """Critical |xi| along a grid of eta values; failed points become gaps."""
    etas = [float(e) for e in eta_grid]
    if any(e <= 0 for e in etas):
        raise ValueError("eta grid values must be positive")
    jobs = [(K, j, e, tol, n_max) for e in sorted(etas)]
    mapper = executor.map if executor is not None else map
    points, gaps = [], []
    for eta, xc, err in mapper(_critical_point, jobs):
        if err is None:
            points.append((eta, xc))
        else:
            gaps.append((eta, err))
    return PhaseCurve(K=K, points=points, tolerance=tol, j=j, gaps=gaps)
