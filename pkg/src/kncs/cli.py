"""Command-line front end: every computation as a subcommand emitting CSV or JSON.

Exit codes: 0 success, 2 usage error, 3 state does not exist or the verdict
is indeterminate, 4 numerical failure.
"""
from __future__ import annotations

import cmath
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import click
import numpy as np

from . import existence, ion, observables, states
from .errors import (BracketFailure, DegenerateNullspace, Indeterminate, NonexistentState,
                     ZeroMeanOccupation)
from .model import Nonlinearity, StateSpec, lattice_terms

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "KNCS_OUTPUT_DIR"

EXIT_USAGE = 2
EXIT_NONEXISTENT = 3
EXIT_NUMERICAL = 4


class _Group(click.Group):
    """Maps library exceptions onto the exit-code contract."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (NonexistentState, Indeterminate, BracketFailure) as exc:
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            ctx.exit(EXIT_NONEXISTENT)
        except (DegenerateNullspace, ZeroMeanOccupation, OverflowError,
                FloatingPointError, np.linalg.LinAlgError) as exc:
            click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
            ctx.exit(EXIT_NUMERICAL)
        except (ValueError, IndexError) as exc:
            raise click.UsageError(str(exc), ctx) from exc


# -- shared options -----------------------------------------------------------

def _state_options(fn):
    opts = [
        click.option("--K", "K", type=click.IntRange(min=1), default=1, show_default=True,
                     help="Quantum order K."),
        click.option("--j", "j", type=click.IntRange(min=0), default=0, show_default=True,
                     help="Component index, 0 <= j < K."),
        click.option("--eta", type=click.FloatRange(min=0), default=None,
                     help="Lamb-Dicke parameter (trapped_ion nonlinearity)."),
        click.option("--f-kind", type=click.Choice(["trapped_ion", "identity", "tabulated"]),
                     default="trapped_ion", show_default=True, help="Nonlinearity f(n)."),
        click.option("--f-table", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="Whitespace or comma separated values f(0), f(1), ..."),
    ]
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


def _xi_options(fn):
    fn = click.option("--xi-phase", type=float, default=0.0, show_default=True,
                      help="Phase of xi in radians.")(fn)
    fn = click.option("--xi-mag", type=click.FloatRange(min=0), default=1.0,
                      show_default=True, help="|xi|.")(fn)
    return fn


def _output_options(fn):
    fn = click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv",
                      show_default=True)(fn)
    fn = click.option("--output", "-o", type=click.Path(dir_okay=False), default=None,
                      help=f"Output file; '-' for stdout. Defaults to ${OUTPUT_DIR_ENV}/"
                           "<command>.<format> when that variable is set, else stdout.")(fn)
    return fn


def _tol_option(default):
    return click.option("--tol", type=click.FloatRange(0, 1, min_open=True, max_open=True),
                        default=default, show_default=True, help="Truncation tolerance.")


def _workers_option(fn):
    return click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True,
                        help="Worker processes for grid evaluations.")(fn)


def _nonlinearity(K, eta, f_kind, f_table) -> Nonlinearity:
    if f_kind == "identity":
        return Nonlinearity.identity()
    if f_kind == "tabulated":
        if f_table is None:
            raise click.UsageError("--f-kind tabulated needs --f-table")
        text = Path(f_table).read_text().replace(",", " ")
        return Nonlinearity.tabulated(np.array(text.split(), dtype=float))
    if eta is None:
        raise click.UsageError("--f-kind trapped_ion needs --eta")
    return Nonlinearity.trapped_ion(eta, K)


def _spec(K, j, eta, f_kind, f_table, xi_mag=0.0, xi_phase=0.0) -> StateSpec:
    if j >= K:
        raise click.UsageError(f"--j must be below --K (got j={j}, K={K})")
    f = _nonlinearity(K, eta, f_kind, f_table)
    return StateSpec(K, j, xi_mag * cmath.exp(1j * xi_phase), f)


@contextmanager
def _executor(workers: int):
    if workers <= 1:
        yield None
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            yield pool


# -- emission -----------------------------------------------------------------

def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, complex):
        return [_json_value(v.real), _json_value(v.imag)]
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    return v


def _csv_value(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _render(fmt, command, params, columns, rows, summary) -> str:
    if fmt == "json":
        doc = {
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "params": _json_value(params),
            "data": [dict(zip(columns, (_json_value(v) for v in row))) for row in rows],
            "summary": _json_value(summary),
        }
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["schema_version", *columns])
    for row in rows:
        w.writerow([SCHEMA_VERSION, *(_csv_value(v) for v in row)])
    return buf.getvalue()


def _describe(command, columns, descriptions, summary) -> str:
    lines = [f"{command}: schema_version {SCHEMA_VERSION}", "",
             "column  name  description"]
    lines.append(f"1  schema_version  output schema version (constant {SCHEMA_VERSION})")
    for i, (c, d) in enumerate(zip(columns, descriptions), start=2):
        lines.append(f"{i}  {c}  {d}")
    if summary:
        lines += ["", "summary"]
        lines += [f"{k} = {_json_value(v)}" for k, v in summary.items()]
    return "\n".join(lines) + "\n"


def _emit(ctx, columns, descriptions, rows, summary=None):
    params = {k: (str(v) if isinstance(v, Path) else v)
              for k, v in sorted(ctx.params.items()) if k not in ("output", "fmt", "workers")}
    fmt = ctx.params["fmt"]
    command = ctx.command.name
    text = _render(fmt, command, params, columns, rows, summary or {})
    out = ctx.params.get("output")
    if out is None and os.environ.get(OUTPUT_DIR_ENV):
        out = str(Path(os.environ[OUTPUT_DIR_ENV]) / f"{command}.{fmt}")
    if out is None or out == "-":
        click.echo(text, nl=False)
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    path.with_name(path.name + ".columns.txt").write_text(
        _describe(command, columns, descriptions, summary or {}))
    click.echo(f"wrote {path}", err=True)


# -- commands -----------------------------------------------------------------

@click.group(cls=_Group)
@click.version_option(package_name="artifact")
def main():
    """K-quantum nonlinear coherent states: construction, statistics,
    existence and trapped-ion dark states."""


@main.command()
@_state_options
@_xi_options
@click.option("--n-max", type=click.IntRange(min=1), default=500, show_default=True,
              help="Number of lattice terms to emit.")
@_output_options
@click.pass_context
def coeffs(ctx, K, j, eta, f_kind, f_table, xi_mag, xi_phase, n_max, output, fmt):
    """Unnormalized series terms log|g(m,0)|^2 along the lattice n = mK + j."""
    spec = _spec(K, j, eta, f_kind, f_table, xi_mag, xi_phase)
    lt = lattice_terms(spec.f, K, j, n_max)
    m = np.arange(len(lt))
    lx = 2.0 * math.log(xi_mag) if xi_mag > 0 else -math.inf
    with np.errstate(invalid="ignore"):
        logg2 = np.where(m == 0, lt.base, m * lx + lt.base)
    try:
        v = existence.classify(spec)
        verdict = {"exists": v.exists, "slope": v.slope, "diagnostic": v.diagnostic}
    except Indeterminate as exc:
        verdict = {"exists": "indeterminate", "diagnostic": str(exc)}
    rows = [(int(mm * K + j), int(mm), float(a), float(0.5 * b), int(s))
            for mm, a, b, s in zip(m, logg2, lt.base, lt.sign)]
    _emit(ctx, ["n", "m", "log_g2", "log_g_over_xi_m", "sign_F"],
          ["Fock index mK + j", "lattice index m",
           "ln |g(m,0)|^2, unnormalized series term",
           "ln |g(m,0) / xi^m|", "sign of the f-product F(mK + j)"],
          rows, verdict)


@main.command()
@_state_options
@_xi_options
@_tol_option(states.DEFAULT_TOL)
@click.option("--n-max", type=click.IntRange(min=160), default=None,
              help="Term budget for the existence test.")
@_output_options
@click.pass_context
def distribution(ctx, K, j, eta, f_kind, f_table, xi_mag, xi_phase, tol, n_max, output, fmt):
    """Number distribution P(n) on the occupied lattice n = mK + j."""
    spec = _spec(K, j, eta, f_kind, f_table, xi_mag, xi_phase)
    v = states.build_state(spec, tol, n_max)
    p = v.probabilities
    n = np.arange(j, len(p), K)
    rep = observables.statistics_from_amplitudes(v) if xi_mag > 0 or j > 0 else None
    summary = {"cutoff": v.cutoff, "tail_bound": v.tail_bound,
               "min_abs_laguerre": v.min_abs_laguerre, "total": float(p.sum())}
    if rep is not None:
        summary.update(mean_n=rep.mean_n, mandel=rep.mandel, squeeze_S=rep.squeeze_S)
    _emit(ctx, ["n", "P"], ["Fock index", "probability |c_n|^2"],
          [(int(k), float(p[k])) for k in n], summary)


@main.command()
@_state_options
@_xi_options
@click.option("--alpha-mag", type=click.FloatRange(min=0), required=True,
              help="|alpha| of the initial coherent state.")
@click.option("--equal-weights", is_flag=True, help="Use beta^2 = 1/K for every component.")
@_tol_option(states.DEFAULT_TOL)
@_output_options
@click.pass_context
def mixed(ctx, K, j, eta, f_kind, f_table, xi_mag, xi_phase, alpha_mag, equal_weights,
          tol, output, fmt):
    """Mixed number distribution reached from an initial coherent state."""
    spec = _spec(K, 0, eta, f_kind, f_table, xi_mag, xi_phase)
    mix = observables.MixedSpec(K, alpha_mag, spec.xi, spec.f)
    n, p = observables.mixed_distribution(mix, tol, equal_weights=equal_weights)
    beta = observables.mixed_weights(mix)
    _emit(ctx, ["n", "P_mix"], ["Fock index", "mixed-state probability"],
          [(int(a), float(b)) for a, b in zip(n, p)],
          {"beta": [float(b) for b in beta], "equal_weights": equal_weights,
           "total": float(p.sum())})


@main.command("phase-diagram")
@click.option("--K", "K", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--j", "j", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--eta-min", type=click.FloatRange(min=0, min_open=True), default=0.1,
              show_default=True)
@click.option("--eta-max", type=click.FloatRange(min=0, min_open=True), default=1.0,
              show_default=True)
@click.option("--points", type=click.IntRange(min=1), default=20, show_default=True)
@_tol_option(1e-3)
@click.option("--n-max", type=click.IntRange(min=160), default=None,
              help="Term budget for the existence test.")
@_workers_option
@_output_options
@click.pass_context
def phase_diagram(ctx, K, j, eta_min, eta_max, points, tol, n_max, workers, output, fmt):
    """Critical |xi| versus eta for the trapped-ion nonlinearity."""
    if j >= K:
        raise click.UsageError(f"--j must be below --K (got j={j}, K={K})")
    if eta_max < eta_min:
        raise click.UsageError("--eta-max must not be below --eta-min")
    grid = np.linspace(eta_min, eta_max, points)
    with _executor(workers) as pool:
        curve = existence.phase_diagram(K, grid, tol, j=j, n_max=n_max, executor=pool)
    _emit(ctx, ["eta", "xi_critical"],
          ["Lamb-Dicke parameter", "critical |xi|: the state exists below it"],
          [(float(e), float(x)) for e, x in curve.points],
          {"tolerance": tol, "gaps": [[e, msg] for e, msg in curve.gaps]})


def _sweep(ctx, K, j, eta, f_kind, f_table, xi_phase, xi_max, points, tol, workers):
    spec = _spec(K, j, eta, f_kind, f_table, 1.0, xi_phase)
    grid = observables.sweep_grid(xi_max, points)
    with _executor(workers) as pool:
        reports = observables.statistics_sweep(spec, grid, tol, executor=pool)
    rows = [(float(g), r.mandel, r.squeeze_S, r.mean_n, r.variance_x)
            for g, r in zip(grid, reports)]
    _emit(ctx, ["xi_mag", "mandel", "squeeze_S", "mean_n", "variance_x"],
          ["|xi|", "Mandel parameter <n^2>/<n> - <n>; below 1 is sub-Poissonian",
           "squeezing measure S; negative means x-quadrature squeezing",
           "mean occupation <n>", "x-quadrature variance 1 + 2S"], rows,
          {"xi_phase": xi_phase, "points": points})


def _sweep_command(name, doc):
    @main.command(name, help=doc)
    @_state_options
    @click.option("--xi-phase", type=float, default=0.0, show_default=True,
                  help="Phase of xi in radians.")
    @click.option("--xi-max", type=click.FloatRange(min=0, min_open=True), required=True,
                  help="Largest |xi| of the sweep.")
    @click.option("--points", type=click.IntRange(min=1), default=256, show_default=True,
                  help="Uniform grid points on (0, xi-max].")
    @_tol_option(states.DEFAULT_TOL)
    @_workers_option
    @_output_options
    @click.pass_context
    def command(ctx, K, j, eta, f_kind, f_table, xi_phase, xi_max, points, tol, workers,
                output, fmt):
        _sweep(ctx, K, j, eta, f_kind, f_table, xi_phase, xi_max, points, tol, workers)
    return command


mandel_sweep = _sweep_command("mandel-sweep", "Mandel parameter along a |xi| grid.")
squeeze_sweep = _sweep_command("squeeze-sweep", "Squeezing measure along a |xi| grid.")


@main.command("dark-state")
@click.option("--K", "K", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--j", "j", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--eta", type=click.FloatRange(min=0, min_open=True), required=True)
@_xi_options
@click.option("--dim", type=click.IntRange(min=1), default=None,
              help="Truncation dimension; defaults to twice the closed-form cutoff "
                   f"rounded up to a power of two (at least {ion.MIN_DIM}).")
@_tol_option(states.DEFAULT_TOL)
@_output_options
@click.pass_context
def dark_state(ctx, K, j, eta, xi_mag, xi_phase, dim, tol, output, fmt):
    """Dark state of the single-red-sideband laser setup, with its overlap
    against the closed-form state."""
    spec = _spec(K, j, eta, "trapped_ion", None, xi_mag, xi_phase)
    ov, res = ion.cross_validate(spec, dim, tol)
    ref = states.build_state(spec, tol).amplitudes
    amp = res.vector.amplitudes
    rows = []
    for n in range(j, res.dim, K):
        c = amp[n]
        p_ref = float(abs(ref[n]) ** 2) if n < len(ref) else 0.0
        rows.append((n, float(c.real), float(c.imag), float(abs(c) ** 2), p_ref))
    cfg = ion.LaserConfig.for_kncs(K, eta, spec.xi)
    _emit(ctx, ["n", "re_c", "im_c", "P", "P_closed_form"],
          ["Fock index", "real part of the dark-state amplitude",
           "imaginary part of the dark-state amplitude", "dark-state probability",
           "probability of the closed-form state"], rows,
          {"dim": res.dim, "residual": res.residual, "overlap": ov,
           "overlap_abs": abs(ov), "singular_gap": res.singular_gap,
           "omega0": cfg.resonant.rabi, "omega1": cfg.sidebands[0].rabi,
           "phi": cfg.sidebands[0].phase})


@main.command()
@_state_options
@_xi_options
@click.option("--xi2-mag", type=click.FloatRange(min=0), required=True, help="|xi'|.")
@click.option("--xi2-phase", type=float, default=0.0, show_default=True)
@click.option("--j2", type=click.IntRange(min=0), default=None, help="j' (defaults to j).")
@_tol_option(states.DEFAULT_TOL)
@_output_options
@click.pass_context
def overlap(ctx, K, j, eta, f_kind, f_table, xi_mag, xi_phase, xi2_mag, xi2_phase, j2,
            tol, output, fmt):
    """<xi; Kj, f | xi'; Kj', f> by direct summation and in closed form."""
    a = _spec(K, j, eta, f_kind, f_table, xi_mag, xi_phase)
    b = _spec(K, j if j2 is None else j2, eta, f_kind, f_table, xi2_mag, xi2_phase)
    direct = states.overlap(a, b, tol)
    closed = states.closed_form_overlap(a, b)
    _emit(ctx, ["re_direct", "im_direct", "re_closed", "im_closed", "abs_diff"],
          ["Re of the truncated inner product", "Im of the truncated inner product",
           "Re of the closed form", "Im of the closed form", "|direct - closed|"],
          [(direct.real, direct.imag, closed.real, closed.imag, abs(direct - closed))])


@main.command()
@_state_options
@_xi_options
@_tol_option(states.DEFAULT_TOL)
@_output_options
@click.pass_context
def decompose(ctx, K, j, eta, f_kind, f_table, xi_mag, xi_phase, tol, output, fmt):
    """Branch eigenvalues and weights of the K = 1 decomposition."""
    spec = _spec(K, j, eta, f_kind, f_table, xi_mag, xi_phase)
    pairs = states.decompose(spec)
    direct = states.build_state(spec, tol).amplitudes
    back = states.recompose(spec, tol)
    n = min(len(direct), len(back))
    err = float(np.max(np.abs(direct[:n] - back[:n])))
    _emit(ctx, ["branch", "re_xi", "im_xi", "re_zeta", "im_zeta"],
          ["branch index j'", "Re xi_j'", "Im xi_j'", "Re zeta_jj'", "Im zeta_jj'"],
          [(k, x.real, x.imag, z.real, z.imag) for k, (x, z) in enumerate(pairs)],
          {"branch_nonlinearity": str(states.branch_specs(spec)[0].f),
           "roundtrip_max_error": err})


if __name__ == "__main__":
    sys.exit(main())
