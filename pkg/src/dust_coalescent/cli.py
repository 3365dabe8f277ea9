"""Experiment runner: binds measures, simulators, limit constants and
statistics into reproducible batch experiments with CSV/JSON output.

Same measure/flags/seed always reproduces byte-identical output; replicate
parallelism (--jobs) never changes results, only wall time.
"""

from __future__ import annotations

import json
import sys
try:
    import tomllib
except ModuleNotFoundError:
    import tomli as tomllib
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager

import click
import numpy as np

from . import coalescent, limits, stats, subordinator
from .measures import (
    BetaFamily,
    GammaPhi,
    Lebesgue,
    LogSingular,
    MeasureError,
    parse_measure,
    rate_table,
)

CSV_VERSION = "# dust-coalescent v1"


@contextmanager
def _open_out(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w") as fh:
            yield fh


def _parse_n_list(text) -> list[int]:
    ns = [int(float(part)) for part in str(text).split(",")]
    if any(n < 1 for n in ns):
        raise click.BadParameter("every n must be >= 1")
    return ns


def _parallel_map(fn, args_list, jobs):
    """Order-preserving parallel map; results identical for any job count."""
    if jobs <= 1 or len(args_list) <= 1:
        return [fn(*a) for a in args_list]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futs = [pool.submit(fn, *a) for a in args_list]
        return [f.result() for f in futs]


def _spawn(seed, count):
    return np.random.SeedSequence(seed).spawn(count)


def _config_defaults(ctx, param, value):
    """Load TOML config and install its values as the defaults, so explicit
    flags still win.  Config keys use the flag spelling (e.g. ``n``,
    ``burn-in``) and are remapped to parameter names here."""
    if value is None:
        return None
    with open(value, "rb") as fh:
        data = tomllib.load(fh)
    by_flag = {}
    for p in ctx.command.params:
        for opt in p.opts:
            if opt.startswith("--"):
                by_flag[opt[2:]] = p.name
    remapped = {by_flag.get(k, k.replace("-", "_")): v for k, v in data.items()}
    ctx.default_map = {**remapped, **(ctx.default_map or {})}
    return value


_CONFIG_OPT = click.option(
    "--config", callback=_config_defaults, is_eager=True, expose_value=False,
    type=click.Path(exists=True), help="TOML file with defaults for the flags.",
)


def _common(f):
    for opt in [
        click.option("--measure", required=True, help="Measure spec text form."),
        click.option("--seed", type=int, default=0, show_default=True),
        click.option("--jobs", type=int, default=1, show_default=True,
                     envvar="DUST_COALESCENT_THREADS"),
        click.option("--out", default=None, help="Output path (default stdout)."),
        _CONFIG_OPT,
    ]:
        f = opt(f)
    return f


@click.group()
def main():
    """Simulation and verification toolkit for coalescents with dust."""


# ---------------------------------------------------------------------------
# plain experiment commands


@main.command()
@click.option("--measure", required=True)
@click.option("--m", "m_", type=int, required=True)
@click.option("--out", default=None)
@_CONFIG_OPT
def rates(measure, m_, out):
    """Print lambda_{m,k} and phi_{m,k} for one row m."""
    spec = parse_measure(measure)
    table = rate_table(spec)
    row = table.row(m_)
    with _open_out(out) as fh:
        fh.write(CSV_VERSION + "\n")
        fh.write("m,k,lambda,phi\n")
        for k in range(1, m_ + 1):
            lam = spec.lambda_rate(m_, k)
            fh.write(f"{m_},{k},{lam!r},{float(row[k - 1])!r}\n")


@main.command()
@_common
@click.option("--n", "n_list", required=True, help="Comma list of sizes.")
@click.option("--replicates", type=int, default=1, show_default=True)
def simulate(measure, n_list, replicates, seed, jobs, out):
    """Full coalescent runs; one CSV row of counters per replicate."""
    spec = parse_measure(measure)
    with _open_out(out) as fh:
        fh.write(CSV_VERSION + "\n")
        fh.write(coalescent.RunStats.CSV_HEADER + "\n")
        for n in _parse_n_list(n_list):
            for rs in coalescent.replicate_stats(spec, n, replicates, seed, jobs):
                fh.write(rs.csv_row() + "\n")


def _dust_one(measure, n, seed, index, entropy):
    run = coalescent.simulate_dust_chain(
        parse_measure(measure), n, np.random.default_rng(entropy))
    kr = ";".join(f"{r}:{c}" for r, c in sorted(run.K_r.items()))
    return f"{n},{seed}.{index},{run.tau_star!r},{sum(run.K_r.values())},{kr}"


@main.command()
@_common
@click.option("--n", "n_list", required=True)
@click.option("--replicates", type=int, default=1, show_default=True)
def dust(measure, n_list, replicates, seed, jobs, out):
    """Dust-chain runs: extinction time and decrement-size counts."""
    parse_measure(measure)
    with _open_out(out) as fh:
        fh.write(CSV_VERSION + "\n")
        fh.write("n,seed,tau_star,K,K_r\n")
        for n in _parse_n_list(n_list):
            streams = _spawn(seed, replicates)
            rows = _parallel_map(
                _dust_one,
                [(measure, n, seed, i, streams[i]) for i in range(replicates)],
                jobs,
            )
            fh.write("\n".join(rows) + "\n")


def _passage_one(measure, s, seed, index, entropy):
    fp = subordinator.first_passage(
        parse_measure(measure), s, np.random.default_rng(entropy))
    return f"{s!r},{seed}.{index},{fp.T!r},{fp.overshoot!r}"


@main.command()
@_common
@click.option("--s", "levels", required=True, help="Comma list of levels.")
@click.option("--replicates", type=int, default=1, show_default=True)
def passage(measure, levels, replicates, seed, jobs, out):
    """First-passage times of the compound Poisson path through levels."""
    parse_measure(measure)
    svals = [float(part) for part in levels.split(",")]
    with _open_out(out) as fh:
        fh.write(CSV_VERSION + "\n")
        fh.write("s,seed,T,overshoot\n")
        for s in svals:
            streams = _spawn(seed, replicates)
            rows = _parallel_map(
                _passage_one,
                [(measure, s, seed, i, streams[i]) for i in range(replicates)],
                jobs,
            )
            fh.write("\n".join(rows) + "\n")


def _occupancy_one(measure, n, seed, index, entropy):
    kr = subordinator.occupancy_sample(
        parse_measure(measure), n, np.random.default_rng(entropy))
    body = ";".join(f"{r}:{c}" for r, c in sorted(kr.items()))
    return f"{n},{seed}.{index},{body}"


@main.command()
@_common
@click.option("--n", "n_list", required=True)
@click.option("--replicates", type=int, default=1, show_default=True)
def occupancy(measure, n_list, replicates, seed, jobs, out):
    """Stick-breaking occupancy samples; K_r counts per replicate."""
    parse_measure(measure)
    with _open_out(out) as fh:
        fh.write(CSV_VERSION + "\n")
        fh.write("n,seed,K_r\n")
        for n in _parse_n_list(n_list):
            streams = _spawn(seed, replicates)
            rows = _parallel_map(
                _occupancy_one,
                [(measure, n, seed, i, streams[i]) for i in range(replicates)],
                jobs,
            )
            fh.write("\n".join(rows) + "\n")


@main.command()
@_common
@click.option("--gamma", type=float, required=True)
@click.option("--replicates", type=int, default=1, show_default=True)
@click.option("--eps", type=float, default=1e-4, show_default=True,
              help="Relative truncation bias for the time horizon.")
def expfunc(measure, gamma, replicates, seed, jobs, out, eps):
    """Samples of the exponential functional, plus exact moments."""
    spec = parse_measure(measure)
    samples = subordinator.exp_functional_sample(
        spec, gamma, np.random.default_rng(np.random.SeedSequence(seed)),
        eps=eps, size=replicates,
    )
    with _open_out(out) as fh:
        fh.write(CSV_VERSION + "\n")
        fh.write("gamma,seed,I\n")
        for i, v in enumerate(samples):
            fh.write(f"{gamma!r},{seed}.{i},{float(v)!r}\n")
        for k in (1, 2, 3):
            fh.write(f"# moment k={k}: "
                     f"{subordinator.exp_functional_moment(spec, gamma, k)!r}\n")


@main.command()
@_common
@click.option("--horizon", type=float, default=10000.0, show_default=True)
@click.option("--burn-in", type=float, default=1000.0, show_default=True)
def vchain(measure, horizon, burn_in, seed, jobs, out):
    """Secondary-cluster chain occupation histogram over the horizon."""
    spec = parse_measure(measure)
    traj = subordinator.v_chain_simulate(
        spec, horizon, np.random.default_rng(np.random.SeedSequence(seed)))
    with _open_out(out) as fh:
        fh.write(CSV_VERSION + "\n")
        traj.occupation_csv(fh, burn_in=burn_in)


# ---------------------------------------------------------------------------
# verification commands


def _emit_verdict(out, payload, passed):
    with _open_out(out) as fh:
        fh.write(json.dumps(payload, sort_keys=True) + "\n")
    if not passed:
        raise SystemExit(1)


def _tau_samples(spec, n, replicates, seed, jobs):
    runs = coalescent.replicate_stats(spec, n, replicates, seed, jobs)
    return np.array([rs.tau for rs in runs])


@main.command(name="verify-tau")
@_common
@click.option("--n", "n_list", required=True)
@click.option("--replicates", type=int, default=1000, show_default=True)
@click.option("--ks-tol", type=float, default=0.12, show_default=True)
@click.option("--cf-tol", type=float, default=0.1, show_default=True,
              help="Max characteristic-function deviation (stable regime).")
def verify_tau(measure, n_list, replicates, seed, jobs, out, ks_tol, cf_tol):
    """Check the absorption-time limit law for the classified regime."""
    spec = parse_measure(measure)
    try:
        regime = limits.classify(spec).tau
    except MeasureError as exc:
        raise click.ClickException(str(exc))
    if regime is None:
        raise click.ClickException("manual regime required for this measure")
    mom = spec.moments()
    results = []
    passed = True
    from scipy.stats import norm

    for n in _parse_n_list(n_list):
        taus = _tau_samples(spec, n, replicates, seed, jobs)
        if regime.tag == "NormalTau":
            nc = limits.tau_normal_constants(mom, n)
            z = (taus - nc.b_n) / nc.a_n
            ks = stats.ks_distance(z, norm.cdf)
            ok = ks < ks_tol
            results.append({"n": n, "statistic": ks, "threshold": ks_tol,
                            "pass": ok, "a_n": nc.a_n, "b_n": nc.b_n,
                            "m": mom.m, "s2": mom.s2, "reference": nc.reference})
        else:
            beta = regime.param("beta")
            L = _stable_L(spec)
            nc = limits.tau_stable_constants(beta, L, mom.m, n)
            z = (taus - nc.b_n) / nc.a_n
            grid = np.array([-2.0, -1.0, -0.5, -0.25, 0.25, 0.5, 1.0, 2.0])
            dev = float(np.abs(stats.empirical_cf(z, grid)
                               - limits.stable_cf(beta, grid)).max())
            ok = dev < cf_tol
            results.append({"n": n, "statistic": dev, "threshold": cf_tol,
                            "pass": ok, "a_n": nc.a_n, "b_n": nc.b_n,
                            "m": mom.m, "beta": beta, "reference": nc.reference})
        passed = passed and ok
    _emit_verdict(out, {"test": "verify-tau", "measure": spec.cli_label(),
                        "regime": regime.tag, "results": results,
                        "pass": passed}, passed)


def _stable_L(spec):
    """Slowly varying L with tail(1 - e^-y) ~ y^-beta L(y)."""
    if isinstance(spec, LogSingular):
        return limits.slowly_varying("const", c=1.0 / (spec.d - 1.0))
    raise click.ClickException("manual regime required: no L handle for this measure")


@main.command(name="verify-collisions")
@_common
@click.option("--n", "n_list", required=True)
@click.option("--replicates", type=int, default=1000, show_default=True)
@click.option("--mean-tol", type=float, default=0.15, show_default=True,
              help="Relative mean tolerance (regular-variation regime).")
@click.option("--ks-tol", type=float, default=0.12, show_default=True)
def verify_collisions(measure, n_list, replicates, seed, jobs, out,
                      mean_tol, ks_tol):
    """Check the collision-count limit for the classified regime."""
    spec = parse_measure(measure)
    try:
        regime = limits.classify(spec).collisions
    except MeasureError as exc:
        raise click.ClickException(str(exc))
    if regime is None:
        raise click.ClickException("manual regime required for this measure")
    mom = spec.moments()
    results = []
    passed = True
    from scipy.stats import norm

    for n in _parse_n_list(n_list):
        runs = coalescent.replicate_stats(spec, n, replicates, seed, jobs)
        xs = np.array([rs.X for rs in runs], dtype=float)
        if regime.tag == "RegVarCollisions":
            g = regime.param("gamma")
            ell_c = _regvar_ell_const(spec)
            limit_val = float(
                limits.collisions_regvar_scale(g, lambda z: ell_c, 1.0)
                / spec.laplace_exponent(g))
            ratio = float(xs.mean()) / n ** g
            rel = float(abs(ratio - limit_val) / limit_val)
            ok = bool(rel < mean_tol)
            results.append({"n": n, "statistic": rel, "threshold": mean_tol,
                            "pass": ok, "ratio": ratio, "limit": limit_val,
                            "gamma": float(g),
                            "a_n": float(limits.collisions_regvar_scale(
                                g, lambda z: ell_c, n))})
        else:
            nc = limits.collisions_slowvar_constants(
                spec.laplace_exponent, mom, n)
            z = (xs - nc.b_n) / nc.a_n
            ks = stats.ks_distance(z, norm.cdf)
            ok = ks < ks_tol
            results.append({"n": n, "statistic": ks, "threshold": ks_tol,
                            "pass": ok, "a_n": nc.a_n, "b_n": nc.b_n,
                            "m": mom.m, "s2": mom.s2})
        passed = passed and ok
    _emit_verdict(out, {"test": "verify-collisions", "measure": spec.cli_label(),
                        "regime": regime.tag, "results": results,
                        "pass": passed}, passed)


def _regvar_ell_const(spec):
    """Constant ell with tail(x) ~ ell * x^-gamma near 0."""
    if isinstance(spec, BetaFamily) and 1 < spec.a < 2:
        return spec.c / (2.0 - spec.a)
    raise click.ClickException("manual regime required: no ell handle for this measure")


@main.command(name="verify-stationary")
@_common
@click.option("--horizon", type=float, default=10000.0, show_default=True)
@click.option("--burn-in", type=float, default=1000.0, show_default=True)
@click.option("--truncation", type=int, default=50, show_default=True)
@click.option("--tv-tol", type=float, default=0.05, show_default=True)
@click.option("--ref-out", default=None,
              help="Also write the solved stationary law as an m,mass CSV.")
def verify_stationary(measure, horizon, burn_in, truncation, seed, jobs, out,
                      tv_tol, ref_out):
    """Balance-equation solve vs simulated V-chain occupation measure."""
    spec = parse_measure(measure)
    pi, residual = subordinator.v_stationary_solve(spec, truncation)
    if ref_out is not None:
        with _open_out(ref_out) as fh:
            fh.write(CSV_VERSION + "\n")
            fh.write("m,mass\n")
            for m, w in enumerate(pi, start=1):
                fh.write(f"{m},{float(w)!r}\n")
    traj = subordinator.v_chain_simulate(
        spec, horizon, np.random.default_rng(np.random.SeedSequence(seed)))
    occ = traj.occupation(burn_in=burn_in)
    tv = stats.tv_distance(np.concatenate([[0.0], pi]), occ)
    passed = tv < tv_tol
    _emit_verdict(out, {
        "test": "verify-stationary", "measure": spec.cli_label(),
        "statistic": tv, "threshold": tv_tol, "residual": residual,
        "truncation": truncation, "horizon": horizon, "pass": passed,
    }, passed)


if __name__ == "__main__":
    main()
