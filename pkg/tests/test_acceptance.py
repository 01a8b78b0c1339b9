"""Acceptance criteria, one test (or parametrized family) per criterion.

The terminal summary prints one PASS/FAIL line per criterion.
"""
import cmath
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.special import roots_legendre

from kncs.errors import NonexistentState
from kncs.existence import classify, critical_xi, phase_diagram
from kncs.ion import cross_validate
from kncs.model import Nonlinearity, StateSpec, f_value
from kncs.numerics import log_factorial
from kncs.observables import (MixedSpec, mixed_distribution, mixed_weights, moment_a,
                              number_distribution, statistics, statistics_sweep, sweep_grid)
from kncs.states import (build_state, closed_form_overlap, eigen_residual, overlap,
                         recompose)

pytestmark = pytest.mark.acceptance

GOLDEN = Path(__file__).parent / "golden"
ETAS = (0.05, 0.1, 0.2, 0.3, 0.5)
ion = Nonlinearity.trapped_ion
ident = Nonlinearity.identity()


def random_specs(count, seed, max_K=6):
    """Seeded specs well inside the existence domain."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        K = int(rng.integers(1, max_K + 1))
        j = int(rng.integers(0, K))
        if rng.random() < 0.2:
            f, limit = ident, 20.0
        else:
            eta = float(rng.choice(ETAS))
            f, limit = ion(eta, K), min(0.5 * eta ** -K, 20.0)
        mag = limit * rng.random()
        out.append(StateSpec(K, j, mag * cmath.exp(2j * math.pi * rng.random()), f))
    return out


def sign_changes(x, level):
    s = np.sign(np.asarray(x) - level)
    s = s[s != 0]
    return int(np.count_nonzero(s[1:] != s[:-1]))


@pytest.mark.criterion(1, "coherent-state limit")
@pytest.mark.parametrize("xi", [0.5, 1.0, 2 + 1j])
def test_coherent_limit(xi):
    t0 = time.perf_counter()
    spec = StateSpec(1, 0, xi)
    n, p = number_distribution(spec)
    z = abs(xi) ** 2
    ref = np.array([math.exp(-z + k * math.log(z) - log_factorial(k)) for k in range(41)])
    got = np.zeros(41)
    got[:min(41, len(p))] = p[:41]
    assert np.max(np.abs(got - ref)) <= 1e-12
    r = statistics(spec)
    assert abs(r.mandel - 1) <= 1e-9
    assert abs(r.squeeze_S) <= 1e-9
    assert time.perf_counter() - t0 < 1.0


@pytest.mark.criterion(2, "parity lattice support")
def test_parity():
    for spec in random_specs(500, seed=2):
        v = build_state(spec).amplitudes
        off = np.ones(len(v), dtype=bool)
        off[spec.j::spec.K] = False
        assert np.all(v[off] == 0), spec
        for l in range(1, 2 * spec.K + 1):
            if l % spec.K:
                assert moment_a(spec, l) == 0, (spec, l)


@pytest.mark.criterion(3, "eigenvector residual")
def test_eigen_residual():
    checked = 0
    for spec in random_specs(200, seed=3):
        try:
            v = build_state(spec, tol=1e-14)
        except NonexistentState:
            continue
        assert eigen_residual(v, spec) <= 1e-8 * (1 + abs(spec.xi)), spec
        checked += 1
    assert checked == 200


@pytest.mark.criterion(4, "recurrence at every occupied index")
def test_recurrence():
    for spec in random_specs(200, seed=4):
        v = build_state(spec, tol=1e-14).amplitudes
        K, xi = spec.K, spec.xi
        for n in range(spec.j, len(v) - K, K):
            lhs = v[n + K] * math.exp(0.5 * (log_factorial(n + K) - log_factorial(n)))
            lhs *= f_value(spec.f, n + K).to_real()
            rhs = xi * v[n]
            assert abs(lhs - rhs) <= 1e-10 * abs(rhs), (spec, n)


@pytest.mark.criterion(5, "decomposition round trip")
def test_decomposition():
    t0 = time.perf_counter()
    cases = []
    for K in range(1, 6):
        for j in range(K):
            cases.append(StateSpec(K, j, 5.0 * cmath.exp(0.7j * (j + 1)), ident))
            eta = 0.3
            half = 0.5 * critical_xi(K, j, eta)
            cases.append(StateSpec(K, j, half * cmath.exp(0.4j * (j + 1)), ion(eta, K)))
    for spec in cases:
        direct = build_state(spec).amplitudes
        back = recompose(spec)
        n = max(len(direct), len(back))
        err = np.max(np.abs(np.pad(direct, (0, n - len(direct)))
                            - np.pad(back, (0, n - len(back)))))
        assert err <= 1e-9, (spec, err)
    assert time.perf_counter() - t0 < 5.0


@pytest.mark.criterion(6, "overlap identity and orthogonality")
def test_overlap():
    rng = np.random.default_rng(6)
    for _ in range(40):
        K = int(rng.integers(1, 5))
        j = int(rng.integers(0, K))
        eta = float(rng.choice(ETAS[2:]))
        f = ion(eta, K)
        lim = 0.5 * eta ** -K
        a = StateSpec(K, j, lim * rng.random() * cmath.exp(2j * math.pi * rng.random()), f)
        b = StateSpec(K, j, lim * rng.random() * cmath.exp(2j * math.pi * rng.random()), f)
        direct, closed = overlap(a, b), closed_form_overlap(a, b)
        assert abs(direct - closed) <= 1e-9 * abs(closed), (a, b)
        if K > 1:
            c = StateSpec(K, (j + 1) % K, b.xi, f)
            assert overlap(a, c) == 0
            assert closed_form_overlap(a, c) == 0


@pytest.mark.criterion(7, "existence classification and phase diagram")
def test_existence_and_phase_diagram():
    f = ion(0.5, 1)
    assert classify(StateSpec(1, 0, 1.2, f)).exists
    assert not classify(StateSpec(1, 0, 3.2, f)).exists
    tol = 1e-3
    assert abs(critical_xi(2, 0, 0.5, tol) - critical_xi(2, 1, 0.5, tol)) <= 2 * tol
    grid = np.linspace(0.1, 1.0, 20)
    t0 = time.perf_counter()
    curves = {K: phase_diagram(K, grid, tol) for K in (1, 2, 3)}
    assert time.perf_counter() - t0 < 60.0
    GOLDEN.mkdir(exist_ok=True)
    for K, curve in curves.items():
        assert len(curve.points) + len(curve.gaps) == 20
        doc = {"K": K, "tolerance": tol, "points": curve.points,
               "gaps": [e for e, _ in curve.gaps]}
        path = GOLDEN / f"phase_K{K}.json"
        if not path.exists():
            path.write_text(json.dumps(doc, indent=1) + "\n")
            continue
        gold = json.loads(path.read_text())
        assert gold["gaps"] == pytest.approx(doc["gaps"], abs=1e-12)
        assert len(gold["points"]) == len(doc["points"])
        for (e0, x0), (e1, x1) in zip(gold["points"], doc["points"]):
            assert e0 == pytest.approx(e1, abs=1e-12)
            assert abs(x0 - x1) <= 2 * tol


def local_maxima(p):
    padded = np.concatenate(([-np.inf], p, [-np.inf]))
    return int(np.sum((padded[1:-1] > padded[:-2]) & (padded[1:-1] > padded[2:])))


@pytest.mark.criterion(8, "two-peaked number distribution")
@pytest.mark.parametrize("mag", [1.5, 1.8])
def test_two_peaks(mag):
    n, p = number_distribution(StateSpec(1, 0, mag, ion(0.5, 1)))
    assert local_maxima(p) >= 2


@pytest.mark.criterion(9, "K=1 antibunching")
def test_k1_antibunching():
    spec = StateSpec(1, 0, 1.0, ion(0.05, 1))
    xi_max = 15.0
    assert xi_max < critical_xi(1, 0, 0.05)
    m = np.array([r.mandel for r in statistics_sweep(spec, sweep_grid(xi_max))])
    assert np.all(m < 1)
    assert np.all(np.diff(m) < 0)


@pytest.mark.criterion(10, "K=2 squeezing and Mandel transitions")
def test_k2_behaviour():
    eta, xi_max = 0.05, 20.0
    assert xi_max < critical_xi(2, 0, eta)
    grid = sweep_grid(xi_max)
    even = statistics_sweep(StateSpec(2, 0, -1.0, ion(eta, 2)), grid)
    S = np.array([r.squeeze_S for r in even])
    M = np.array([r.mandel for r in even])
    assert S[0] < 0
    first_nonneg = int(np.argmax(S >= 0))
    assert first_nonneg > 0 and np.all(S[first_nonneg:] >= 0)
    assert sign_changes(M, 1.0) == 1
    for phase in (math.pi, 0.0):
        odd = statistics_sweep(StateSpec(2, 1, cmath.exp(1j * phase), ion(eta, 2)), grid)
        assert all(r.squeeze_S > 0 for r in odd)
        assert all(r.mandel < 1 for r in odd)


@pytest.mark.criterion(11, "K=3 double Mandel crossing")
def test_k3_double_crossing():
    eta, xi_max = 0.05, 10.0
    assert xi_max < critical_xi(3, 1, eta)
    reports = statistics_sweep(StateSpec(3, 1, 1.0, ion(eta, 3)), sweep_grid(xi_max))
    assert sign_changes([r.mandel for r in reports], 1.0) == 2


@pytest.mark.criterion(12, "dark-state oracle equivalence")
def test_dark_state_oracle():
    t0 = time.perf_counter()
    for K in (1, 2, 3, 4):
        for eta in (0.05, 0.3, 0.5):
            for j in range(K):
                half = 0.5 * critical_xi(K, j, eta)
                spec = StateSpec(K, j, half * cmath.exp(0.3j), ion(eta, K))
                ov, res = cross_validate(spec)
                assert res.dim >= 200
                assert abs(ov) >= 1 - 1e-7, (spec, ov)
                assert res.residual <= 1e-7, (spec, res.residual)
    assert time.perf_counter() - t0 < 30.0


@pytest.mark.criterion(13, "mixed-state distribution")
def test_mixed_state():
    for K in range(1, 9):
        for a in (0.0, 0.3, 1.0, 6.0, 8.0, 20.0):
            b = mixed_weights(MixedSpec(K, a, 1.0, ident))
            assert abs(np.sum(b ** 2) - 1) <= 1e-12
    K, f, xi = 6, ion(0.05, 6), 100.0
    m6, m8 = MixedSpec(K, 6.0, xi, f), MixedSpec(K, 8.0, xi, f)
    _, p6 = mixed_distribution(m6)
    _, p8 = mixed_distribution(m8)
    dev6 = np.abs(mixed_weights(m6) ** 2 - 1 / K)
    dev8 = np.abs(mixed_weights(m8) ** 2 - 1 / K)
    size = max(len(p6), len(p8))
    p6, p8 = np.pad(p6, (0, size - len(p6))), np.pad(p8, (0, size - len(p8)))
    comp = np.zeros(size)
    for r in range(K):
        pr = build_state(m6.component(r)).probabilities
        comp[r:len(pr):K] = pr[r::K]
    n = np.arange(size)
    bound = (dev6[n % K] + dev8[n % K]) * comp + np.finfo(float).eps
    assert np.all(np.abs(p6 - p8) <= bound)
    _, pe = mixed_distribution(m6, equal_weights=True)
    assert len(pe) == size
    assert np.array_equal(pe, (1 / K) * comp)


@pytest.mark.criterion(14, "resolution of unity for coherent states")
def test_resolution_of_unity():
    levels, R = 9, 6.0
    x, w = roots_legendre(80)
    radii = 0.5 * R * (x + 1)
    wr = 0.5 * R * w
    n_ang = 64
    angles = 2 * math.pi * np.arange(n_ang) / n_ang
    acc = np.zeros((levels, levels), dtype=complex)
    for r, weight in zip(radii, wr):
        for th in angles:
            c = build_state(StateSpec(1, 0, r * cmath.exp(1j * th))).amplitudes
            c = np.pad(c, (0, max(0, levels - len(c))))[:levels]
            acc += weight * r * (2 * math.pi / n_ang) * np.outer(c, c.conj())
    acc /= math.pi
    assert np.max(np.abs(np.diag(acc) - 1)) <= 1e-4
    off = acc - np.diag(np.diag(acc))
    assert np.max(np.abs(off)) <= 1e-4
