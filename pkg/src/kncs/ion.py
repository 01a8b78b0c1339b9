"""Trapped-ion dark states from the laser-coupling recurrence.

A vibrational state sum_l C_l |l> is dark when, for every l,

    sum_red  (i eta)^|n_p| W_p e^{-i phi_p} sqrt(l!/(l+|n_p|)!) L_l^|n_p|(eta^2) C_{l+|n_p|}
  + sum_blue theta(l-n_q) (i eta)^n_q W_q e^{-i phi_q} sqrt((l-n_q)!/l!) L_{l-n_q}^n_q(eta^2) C_{l-n_q}
  + W_0 e^{-i phi_0} L_l^0(eta^2) C_l = 0.

Couplings only connect levels that differ by a detuning index, so the
truncated system splits into independent blocks by residue modulo the gcd of
the detunings; each block is solved on its own and yields one dark
direction, the right singular vector of its smallest singular value.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.linalg

from .errors import DegenerateNullspace
from .model import Nonlinearity, StateSpec
from .numerics import (bidiagonal_svd, laguerre, laguerre_sequence, log_factorial,
                       log_factorial_array)
from .states import DEFAULT_TOL, FockVector, build_state

MIN_DIM = 200
DEGENERACY_RTOL = 1e-8
# amplitudes below this fraction of the largest are ignored when fixing the phase
_PHASE_FLOOR = 1e-12


@dataclass(frozen=True)
class Laser:
    detuning: int
    rabi: float
    phase: float = 0.0

    def __post_init__(self):
        if int(self.detuning) != self.detuning:
            raise ValueError("detuning index must be an integer")
        object.__setattr__(self, "detuning", int(self.detuning))
        if not (math.isfinite(self.rabi) and self.rabi >= 0):
            raise ValueError("Rabi amplitude must be finite and non-negative")
        if not math.isfinite(self.phase):
            raise ValueError("phase must be finite")


@dataclass(frozen=True)
class LaserConfig:
    """Lamb-Dicke parameter plus the driving lasers.

    Negative detuning indices are red sidebands, positive ones blue, zero is
    the single resonant laser.
    """

    eta: float
    lasers: tuple[Laser, ...]

    def __post_init__(self):
        lasers = tuple(l if isinstance(l, Laser) else Laser(*l) for l in self.lasers)
        object.__setattr__(self, "lasers", lasers)
        if not (math.isfinite(self.eta) and self.eta > 0):
            raise ValueError("eta must be positive")
        if len(lasers) < 2:
            raise ValueError("a dark state needs at least two driving lasers")
        if sum(1 for l in lasers if l.detuning == 0) != 1:
            raise ValueError("exactly one resonant laser (detuning 0) is required")

    @classmethod
    def for_kncs(cls, K: int, eta: float, xi: complex) -> LaserConfig:
        """One red laser at -K plus the resonant laser, tuned so that the dark
        state is |xi; Kj, f> with the trapped-ion f."""
        if K < 1:
            raise ValueError("K must be positive")
        xi = complex(xi)
        phi = cmath.phase(-xi * 1j ** K) if xi != 0 else 0.0
        return cls(eta, (Laser(0, abs(xi) * eta ** K, 0.0), Laser(-K, 1.0, phi)))

    @property
    def resonant(self) -> Laser:
        return next(l for l in self.lasers if l.detuning == 0)

    @property
    def sidebands(self) -> tuple[Laser, ...]:
        return tuple(l for l in self.lasers if l.detuning != 0)

    @property
    def period(self) -> int:
        """gcd of the detuning indices: levels couple only within a residue class."""
        return reduce(math.gcd, (abs(l.detuning) for l in self.sidebands))


@dataclass(frozen=True)
class DarkStateResult:
    vector: FockVector
    residual: float
    dim: int
    residue: int = 0
    truncated: bool = False
    singular_gap: float = math.inf


def xi_from_lasers(omega0: float, omega1: float, phi: float, eta: float, K: int) -> complex:
    """xi = -e^{i phi} W_0 / ((i eta)^K W_1)."""
    if omega1 <= 0 or eta <= 0:
        raise ValueError("omega1 and eta must be positive")
    if omega0 == 0:
        return 0j
    return -cmath.exp(1j * phi) * omega0 / ((1j * eta) ** K * omega1)


def _entry(laser: Laser, eta: float, lag, log_fact_ratio: float) -> complex:
    """(i eta)^d W e^{-i phi} sqrt(ratio) L for one coupling, via signed logs."""
    d = abs(laser.detuning)
    if laser.rabi == 0 or lag.sign == 0:
        return 0j
    logmag = d * math.log(eta) + math.log(laser.rabi) + 0.5 * log_fact_ratio + lag.logmag
    return lag.sign * math.exp(logmag) * 1j ** d * cmath.exp(-1j * laser.phase)


def dark_system_row(config: LaserConfig, l: int, dim: int):
    """Row l of the truncated system as (columns, values, truncated).

    Couplings to columns >= dim are dropped and reported through
    ``truncated``.
    """
    if not 0 <= l < dim:
        raise ValueError("row index must satisfy 0 <= l < dim")
    x = config.eta ** 2
    entries: dict[int, complex] = {}
    truncated = False
    for laser in config.lasers:
        d = laser.detuning
        if d == 0:
            col = l
            val = _entry(laser, config.eta, laguerre(l, 0, x), 0.0)
        elif d < 0:
            col = l - d
            val = _entry(laser, config.eta, laguerre(l, -d, x),
                         log_factorial(l) - log_factorial(col))
        else:
            col = l - d
            if col < 0:
                continue
            val = _entry(laser, config.eta, laguerre(col, d, x),
                         log_factorial(col) - log_factorial(l))
        if col >= dim:
            truncated = True
            continue
        entries[col] = entries.get(col, 0j) + val
    cols = sorted(entries)
    return np.array(cols, dtype=int), np.array([entries[c] for c in cols], dtype=complex), truncated


def _band(config: LaserConfig, laser: Laser, dim: int):
    """Rows, columns and values of one laser's couplings inside the dim x dim box."""
    d, x = laser.detuning, config.eta ** 2
    l = np.arange(dim)
    if d <= 0:
        m = -d
        rows, cols = l, l + m
        s, lg = laguerre_sequence(dim - 1, m, x)
        ratio = log_factorial_array(rows) - log_factorial_array(cols)
    else:
        rows = l[d:]
        cols = rows - d
        s, lg = laguerre_sequence(max(dim - 1 - d, 0), d, x)
        s, lg = s[: rows.size], lg[: rows.size]
        ratio = log_factorial_array(cols) - log_factorial_array(rows)
    keep = cols < dim
    if laser.rabi == 0:
        return rows[keep], cols[keep], np.zeros(int(keep.sum()), dtype=complex)
    m = abs(d)
    with np.errstate(divide="ignore", over="ignore"):
        mag = np.exp(m * math.log(config.eta) + math.log(laser.rabi) + 0.5 * ratio + lg)
    if not np.isfinite(mag[keep]).all():
        raise OverflowError("coupling coefficient exceeds the double range")
    vals = s * mag * (1j ** m * cmath.exp(-1j * laser.phase))
    return rows[keep], cols[keep], vals[keep]


def dark_system(config: LaserConfig, dim: int) -> np.ndarray:
    """The dense dim x dim truncated system (row l as in dark_system_row)."""
    if dim < 1:
        raise ValueError("dim must be positive")
    M = np.zeros((dim, dim), dtype=complex)
    for laser in config.lasers:
        r, c, v = _band(config, laser, dim)
        np.add.at(M, (r, c), v)
    return M


def _fix_phase(v: np.ndarray) -> np.ndarray:
    a = np.abs(v)
    first = int(np.argmax(a > _PHASE_FLOOR * a.max()))
    return v * (abs(v[first]) / v[first])


def _is_upper_bidiagonal(block: np.ndarray) -> bool:
    return not (np.triu(block, 2).any() or np.tril(block, -1).any())


def _realify(block: np.ndarray):
    """Diagonal unitaries D1, D2 with D1 B D2 real non-negative (B bidiagonal)."""
    a, b = np.diag(block).copy(), np.diag(block, 1).copy()
    n = a.size
    d1 = np.ones(n, dtype=complex)
    d2 = np.ones(n, dtype=complex)
    unit = lambda z: np.conj(z) / abs(z) if z != 0 else 1.0
    for i in range(n):
        d1[i] = unit(a[i] * d2[i])
        if i + 1 < n:
            d2[i + 1] = unit(b[i] * d1[i])
    return np.abs(a), np.abs(b), d2


def _min_direction(block: np.ndarray):
    """(v, sigma_min, sigma_next) for the smallest singular value of block.

    Bidiagonal blocks (a single sideband) go through the relative-accuracy
    bidiagonal SVD: their smallest singular values sit far below
    eps * ||block||, where a dense SVD returns noise. Other blocks use a
    dense SVD and are rejected when the two smallest values are both below
    its resolution.
    """
    n = block.shape[0]
    if n > 1 and _is_upper_bidiagonal(block):
        a, b, d2 = _realify(block)
        sv, vt = bidiagonal_svd(a, b)
        v = vt[-1] * d2
        floor = 0.0
    else:
        _, sv, vh = scipy.linalg.svd(block)
        v = vh[-1].conj()
        floor = n * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    if sv.size == 1:
        return v, float(sv[-1]), math.inf
    lo, nxt = float(sv[-1]), float(sv[-2])
    if nxt - lo <= DEGENERACY_RTOL * nxt or nxt <= floor:
        raise DegenerateNullspace(
            f"smallest singular values {lo:.3e} and {nxt:.3e} are not separated; "
            f"change dim or the lasers")
    return v, lo, nxt


def _solve(config: LaserConfig, M: np.ndarray, r: int) -> DarkStateResult:
    dim = M.shape[0]
    idx = np.arange(r, dim, config.period)
    v, _, nxt = _min_direction(M[np.ix_(idx, idx)])
    full = np.zeros(dim, dtype=complex)
    full[idx] = _fix_phase(v)
    truncated = any(l.detuning < 0 and l.rabi > 0 for l in config.lasers)
    return DarkStateResult(FockVector(full, n_terms=idx.size),
                           float(np.linalg.norm(M @ full)), dim, residue=r,
                           truncated=truncated, singular_gap=nxt)


def dark_states(config: LaserConfig, dim: int) -> list[DarkStateResult]:
    """The minimum-singular direction of every residue block, by residue."""
    if dim < 1:
        raise ValueError("dim must be positive")
    M = dark_system(config, dim)
    return [_solve(config, M, r) for r in range(min(config.period, dim))]


def dark_state(config: LaserConfig, dim: int, j: int = 0) -> DarkStateResult:
    """Dark direction supported on levels n = j (mod gcd of the detunings)."""
    g = config.period
    if not 0 <= j < min(g, dim):
        raise ValueError(f"residue j={j} must satisfy 0 <= j < {min(g, dim)}")
    return _solve(config, dark_system(config, dim), j)


def default_dim(spec: StateSpec, tol: float = DEFAULT_TOL) -> int:
    """Smallest power of two >= 2x the closed-form cutoff, at least MIN_DIM."""
    n = 2 * (build_state(spec, tol).cutoff + 1)
    return max(MIN_DIM, 1 << (n - 1).bit_length())


def kncs_spec(config: LaserConfig, j: int = 0) -> StateSpec:
    """The closed-form state realized by a single-red-sideband configuration."""
    side = config.sidebands
    if len(side) != 1 or side[0].detuning >= 0:
        raise ValueError("closed form needs exactly one red sideband and no blue ones")
    K = -side[0].detuning
    phi = side[0].phase - config.resonant.phase
    xi = xi_from_lasers(config.resonant.rabi, side[0].rabi, phi, config.eta, K)
    return StateSpec(K, j, xi, Nonlinearity.trapped_ion(config.eta, K))


def cross_validate(spec: StateSpec, dim: int | None = None,
                   tol: float = DEFAULT_TOL) -> tuple[complex, DarkStateResult]:
    """<dark | closed form> for the laser setup that realizes ``spec``."""
    if spec.f.kind != "trapped_ion" or spec.f.K != spec.K or spec.f.eta <= 0:
        raise ValueError("cross-validation needs the trapped-ion nonlinearity of order K")
    config = LaserConfig.for_kncs(spec.K, spec.f.eta, spec.xi)
    dim = default_dim(spec, tol) if dim is None else int(dim)
    res = dark_state(config, dim, spec.j)
    ref = build_state(spec, tol).amplitudes
    n = min(len(ref), dim)
    return complex(np.vdot(res.vector.amplitudes[:n], ref[:n])), res
