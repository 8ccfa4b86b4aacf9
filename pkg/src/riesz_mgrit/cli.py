"""Experiment driver CLI.

Subcommands: solve, predict, table, factors, dump-operators, selftest.
Configuration is layered: built-in defaults, then an optional INI config
file (flat key-value with [problem]/[discretization]/[solver]/[output]
sections), then explicit command-line flags.  Presets ``table1``-``table6``
ship with the package.  All randomness flows from one recorded seed; the
output directory may be overridden with $RIESZ_MGRIT_OUTDIR.
"""

from __future__ import annotations

import configparser
import copy
import importlib.resources
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import assembly, reporting
from .krylov import CgOptions
from .mesh import SpatialGrid, shishkin_temporal, uniform_temporal
from .mgrit import MgritFailure, MgritOptions, parareal_solve, solve
from .stepper import Discretization, sequential_solve, spacetime_residual
from .theory import mode_spectrum, two_level_bound
from .verify import (
    FactorConfig,
    factor_study,
    l2_error_at_T,
    make_problem,
    manufactured_case,
    run_table,
)

OUTDIR_ENV = "RIESZ_MGRIT_OUTDIR"

DEFAULTS = {
    "problem": {"beta": 0.6, "gamma": 0.7, "kx": 2.0, "ky": 0.5, "tfinal": 1.0},
    "discretization": {
        "mx": 16,
        "my": 16,
        "nt": 256,
        "mesh": "uniform",
        "epsilon": 0.015625,
    },
    "solver": {
        "method": "mgrit",
        "m": 2,
        "levels": 0,  # 0 = automatic depth
        "relaxation": "fcf",
        "halt_tol": 1e-9,
        "cg_tol": 1e-9,
        "max_iters": 100,
        "seed": 0,
        "spatial": "cg",
    },
    "output": {"outdir": ".", "prefix": ""},
}


def _coerce(section: str, key: str, raw: str):
    ref = DEFAULTS.get(section, {}).get(key)
    if isinstance(ref, bool):
        return raw.lower() in ("1", "true", "yes", "on")
    if isinstance(ref, int):
        return int(raw)
    if isinstance(ref, float):
        return float(raw)
    return raw


def load_config_file(path) -> dict:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    with open(path) as fh:
        parser.read_file(fh)
    out: dict = {}
    for section in parser.sections():
        out[section] = {
            key: _coerce(section, key, value) for key, value in parser[section].items()
        }
    return out


def preset_path(name: str) -> Path:
    ref = importlib.resources.files("riesz_mgrit") / "presets" / f"{name}.ini"
    if not ref.is_file():
        raise click.ClickException(
            f"unknown preset {name!r}; available: table1..table6"
        )
    return Path(str(ref))


def resolve_config(config_file, preset, overrides) -> dict:
    """defaults <- preset <- config file <- explicit flags."""
    cfg = copy.deepcopy(DEFAULTS)
    layers = []
    if preset:
        layers.append(load_config_file(preset_path(preset)))
    if config_file:
        layers.append(load_config_file(config_file))
    layers.append(overrides)
    for layer in layers:
        for section, items in layer.items():
            dest = cfg.setdefault(section, {})
            for key, value in items.items():
                if value is not None:
                    dest[key] = value
    if OUTDIR_ENV in os.environ:
        cfg["output"]["outdir"] = os.environ[OUTDIR_ENV]
    return cfg


def _validate(cfg: dict) -> None:
    p, d, s = cfg["problem"], cfg["discretization"], cfg["solver"]
    def fail(path, msg):
        raise click.ClickException(f"config error at {path}: {msg}")
    for key in ("beta", "gamma"):
        if not 0.5 < p[key] < 1.0:
            fail(f"problem.{key}", f"{p[key]} outside (0.5, 1)")
    for key in ("kx", "ky"):
        if p[key] <= 0:
            fail(f"problem.{key}", "must be positive")
    if d["mesh"] not in ("uniform", "shishkin"):
        fail("discretization.mesh", f"{d['mesh']!r} not in (uniform, shishkin)")
    if d["mx"] < 2 or d["my"] < 2 or d["nt"] < 1:
        fail("discretization", "mx, my >= 2 and nt >= 1 required")
    if s["method"] not in ("seq", "parareal", "mgrit"):
        fail("solver.method", f"{s['method']!r} not in (seq, parareal, mgrit)")
    if s["method"] != "seq" and s["m"] < 2:
        fail("solver.m", "coarsening factor must be >= 2")


def build_problem(cfg: dict):
    p, d = cfg["problem"], cfg["discretization"]
    case = manufactured_case(p["beta"], p["gamma"], p["kx"], p["ky"])
    grid = SpatialGrid(d["mx"], d["my"])
    if d["mesh"] == "uniform":
        tmesh = uniform_temporal(p["tfinal"], d["nt"])
    else:
        tmesh = shishkin_temporal(d["nt"], d["epsilon"], p["tfinal"])
    return case, grid, tmesh, make_problem(case, grid, tmesh)


def build_mgrit_options(cfg: dict) -> MgritOptions:
    s = cfg["solver"]
    return MgritOptions(
        m=s["m"],
        max_levels=None if s["levels"] == 0 else s["levels"],
        halt_tol=s["halt_tol"],
        max_iters=s["max_iters"],
        relaxation=s["relaxation"],
        rng_seed=s["seed"],
        solver=s["spatial"],
        cg_rel_tol=s["cg_tol"],
    )


def output_base(cfg: dict, default_name: str) -> Path:
    out = cfg["output"]
    outdir = Path(out["outdir"])
    outdir.mkdir(parents=True, exist_ok=True)
    return outdir / (out["prefix"] + default_name)


def common_options(fn):
    decorators = [
        click.option("--config", "config_file", type=click.Path(exists=True),
                     default=None, help="INI config file."),
        click.option("--beta", type=float, default=None),
        click.option("--gamma", type=float, default=None),
        click.option("--kx", type=float, default=None),
        click.option("--ky", type=float, default=None),
        click.option("--tfinal", type=float, default=None),
        click.option("--mx", type=int, default=None),
        click.option("--my", type=int, default=None),
        click.option("--nt", type=int, default=None),
        click.option("--mesh", type=click.Choice(["uniform", "shishkin"]),
                     default=None),
        click.option("--epsilon", type=float, default=None,
                     help="Boundary-layer parameter of the graded mesh."),
        click.option("--solver", "method", type=click.Choice(["seq", "parareal", "mgrit"]),
                     default=None),
        click.option("--m", "m_coarsen", type=int, default=None,
                     help="Temporal coarsening factor."),
        click.option("--levels", type=int, default=None,
                     help="Level count (0 = automatic)."),
        click.option("--relaxation", type=click.Choice(["fcf", "f"]), default=None),
        click.option("--halt-tol", type=float, default=None),
        click.option("--cg-tol", type=float, default=None),
        click.option("--max-iters", type=int, default=None),
        click.option("--seed", type=int, default=None),
        click.option("--spatial", type=click.Choice(["cg", "direct"]), default=None,
                     help="Per-step spatial solver."),
        click.option("--outdir", type=click.Path(), default=None),
        click.option("--prefix", type=str, default=None),
    ]
    for deco in reversed(decorators):
        fn = deco(fn)
    return fn


def gather_config(kwargs, preset=None) -> dict:
    overrides = {
        "problem": {k: kwargs.pop(k) for k in ("beta", "gamma", "kx", "ky", "tfinal")},
        "discretization": {
            k: kwargs.pop(k) for k in ("mx", "my", "nt", "mesh", "epsilon")
        },
        "solver": {
            "method": kwargs.pop("method"),
            "m": kwargs.pop("m_coarsen"),
            "levels": kwargs.pop("levels"),
            "relaxation": kwargs.pop("relaxation"),
            "halt_tol": kwargs.pop("halt_tol"),
            "cg_tol": kwargs.pop("cg_tol"),
            "max_iters": kwargs.pop("max_iters"),
            "seed": kwargs.pop("seed"),
            "spatial": kwargs.pop("spatial"),
        },
        "output": {"outdir": kwargs.pop("outdir"), "prefix": kwargs.pop("prefix")},
    }
    cfg = resolve_config(kwargs.pop("config_file"), preset, overrides)
    _validate(cfg)
    return cfg


@click.group()
def main():
    """Matrix-free space-fractional diffusion solver with time-multigrid."""


@main.command(name="solve")
@common_options
def solve_cmd(**kwargs):
    """Run one solve (sequential, parareal or MGRIT) and report the trace."""
    cfg = gather_config(kwargs)
    case, grid, tmesh, spec = build_problem(cfg)
    method = cfg["solver"]["method"]
    base = output_base(cfg, f"solve_{method}")
    if method == "seq":
        t0 = time.perf_counter()
        disc = Discretization(
            spec,
            cg_opts=CgOptions(rel_tol=cfg["solver"]["cg_tol"]),
            solver=cfg["solver"]["spatial"],
        )
        U = sequential_solve(spec, disc)
        elapsed = time.perf_counter() - t0
        err = l2_error_at_T(U[-1], case, grid, cfg["problem"]["tfinal"])
        payload = {
            "config": cfg,
            "seed": cfg["solver"]["seed"],
            "final_time_l2_error": err,
            "spatial_solves": disc.spatial_solves,
            "cg_iterations": disc.cg_iterations,
            "timing": {"wall_seconds": elapsed},
        }
        paths = [reporting.write_json(reporting._ext(base, ".json"), payload)]
        click.echo(f"final-time L2 error: {err:.6e}")
    else:
        runner = parareal_solve if method == "parareal" else solve
        opts = build_mgrit_options(cfg)
        try:
            U, trace = runner(spec, opts)
        except MgritFailure as exc:
            reporting.solve_report(exc.trace, cfg, base)
            raise click.ClickException(str(exc))
        paths = reporting.solve_report(trace, cfg, base)
        click.echo(
            f"converged in {trace.iterations} iterations "
            f"(residual {trace.residual_norms[-1]:.3e})"
        )
        if len(trace.residual_norms) >= 6:
            from .mgrit import convergence_factor

            click.echo(f"asymptotic convergence factor: {convergence_factor(trace):.4f}")
    for path in paths:
        click.echo(f"wrote {path}")


@main.command()
@common_options
def predict(**kwargs):
    """Evaluate the a-priori two-level convergence bound."""
    cfg = gather_config(kwargs)
    _, _, tmesh, spec = build_problem(cfg)
    spectrum = mode_spectrum(spec)
    report = two_level_bound(spectrum, tmesh, cfg["solver"]["m"])
    click.echo(f"two-level convergence bound: {report.bound:.6e}")
    for path in reporting.predict_report(report, cfg, output_base(cfg, "predict")):
        click.echo(f"wrote {path}")


def _parse_pairs(raw: str):
    return [tuple(float(v) for v in item.split(":")) for item in raw.split(",") if item.strip()]


@main.command()
@click.option("--preset", type=str, default=None,
              help="Shipped study preset (table1..table6).")
@click.option("--full", is_flag=True,
              help="Include the long optional rows where the preset defines them.")
@common_options
def table(preset, full, **kwargs):
    """Run a full study: error/rate table or observed-vs-bound factor table."""
    cfg = gather_config(kwargs, preset=preset)
    study = cfg.get("study")
    if study is None:
        raise click.ClickException(
            "table needs a [study] section: pass --preset or a config file with one"
        )
    p = cfg["problem"]
    mesh_kind = study.get("mesh", "uniform")
    epsilon = float(study["epsilon"]) if "epsilon" in study else None
    kind = study.get("kind", "errors")
    name = preset or "study"
    written = []
    if kind == "errors":
        rows_key = "rows_full" if full and "rows_full" in study else "rows"
        rows = [tuple(int(v) for v in pair) for pair in _parse_pairs(study[rows_key])]
        for beta, gamma in _parse_pairs(study["pairs"]):
            case = manufactured_case(beta, gamma, p["kx"], p["ky"])
            result = run_table(rows, case, mesh_kind=mesh_kind, epsilon=epsilon,
                               T=p["tfinal"])
            sub = dict(cfg, study=dict(study, beta=beta, gamma=gamma))
            base = output_base(cfg, f"{name}_b{beta}_g{gamma}")
            written += reporting.table_report(result, sub, base)
            for row in result:
                rate = "" if row.rate is None else f"  rate {row.rate:.3f}"
                click.echo(
                    f"beta={beta} gamma={gamma} M={row.m_space:5d} N={row.n_time:6d}"
                    f"  error {row.error:.4e}{rate}"
                )
    elif kind == "factors":
        configs = []
        for beta, gamma, m, M, N in _parse_pairs(study["cells"]):
            case = manufactured_case(beta, gamma, p["kx"], p["ky"])
            configs.append(
                FactorConfig(int(M), int(N), int(m), case, mesh_kind, epsilon)
            )
        results = factor_study(configs)
        written += reporting.factors_report(results, cfg, output_base(cfg, name))
        for r in results:
            c = r.config
            click.echo(
                f"beta={c.case.beta} gamma={c.case.gamma} m={c.m_coarsen:2d} "
                f"M={c.m_space:2d} N={c.n_time:5d}  observed {r.observed:.4f}  "
                f"bound {r.bound:.4f}  within={r.within_bound}"
            )
    else:
        raise click.ClickException(f"unknown study kind {kind!r}")
    for path in written:
        click.echo(f"wrote {path}")


@main.command()
@common_options
def factors(**kwargs):
    """Observed two-level convergence factor paired with its bound."""
    cfg = gather_config(kwargs)
    p, d, s = cfg["problem"], cfg["discretization"], cfg["solver"]
    case = manufactured_case(p["beta"], p["gamma"], p["kx"], p["ky"])
    fc = FactorConfig(
        d["mx"], d["nt"], s["m"], case, d["mesh"],
        d["epsilon"] if d["mesh"] == "shishkin" else None,
    )
    (result,) = factor_study([fc])
    click.echo(
        f"observed {result.observed:.6e}  bound {result.bound:.6e}  "
        f"within_bound={result.within_bound}  iterations={result.iterations}"
    )
    for path in reporting.factors_report([result], cfg, output_base(cfg, "factors")):
        click.echo(f"wrote {path}")


@main.command(name="dump-operators")
@common_options
def dump_operators(**kwargs):
    """Dump the assembled operators: Toeplitz generators and dense forms."""
    cfg = gather_config(kwargs)
    _, grid, _, spec = build_problem(cfg)
    mass = assembly.mass_operator(grid)
    sx = assembly.stiffness_operator_x(grid, spec.beta)
    sy = assembly.stiffness_operator_y(grid, spec.gamma)
    base = output_base(cfg, "operators")
    arrays = {}
    for name, op in (("mass", mass), ("stiff_x", sx), ("stiff_y", sy)):
        arrays[f"{name}_scale"] = np.array(op.scale)
        arrays[f"{name}_diag_col"] = op.diag_block.first_col
        arrays[f"{name}_diag_row"] = op.diag_block.first_row
        arrays[f"{name}_off_col"] = op.off_block.first_col
        arrays[f"{name}_off_row"] = op.off_block.first_row
    if grid.ndof <= assembly.DENSE_CAP:
        arrays["mass_dense"] = mass.dense()
        arrays["stiffness_dense"] = (
            spec.kx * sx.dense() + spec.ky * sy.dense()
        )
    path = reporting._ext(base, ".npz")
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez(path, **arrays)
    meta = {
        "config": cfg,
        "ndof": grid.ndof,
        "dense_included": grid.ndof <= assembly.DENSE_CAP,
        "arrays": sorted(arrays),
    }
    jpath = reporting.write_json(reporting._ext(base, ".json"), meta)
    click.echo(f"wrote {path}")
    click.echo(f"wrote {jpath}")


def _selftest_checks():
    """Dense-oracle invariant suite at M <= 8, N <= 64 (runs in seconds)."""
    from .mesh import CfSplitting
    from .mgrit import MgritHierarchy, f_relax, fcf_relax
    from .stepper import initial_vector
    from .theory import error_propagation_oracle, step_factors

    rng = np.random.default_rng(1234)
    case = manufactured_case(0.8, 0.7, 2.0, 0.5)

    def grid8():
        return SpatialGrid(8, 8)

    def check_symmetry_spd():
        grid = grid8()
        mass = assembly.mass_operator(grid).dense()
        stiff = (
            2.0 * assembly.stiffness_operator_x(grid, 0.8).dense()
            + 0.5 * assembly.stiffness_operator_y(grid, 0.7).dense()
        )
        for name, A in (("mass", mass), ("stiffness", stiff)):
            assert np.abs(A - A.T).max() < 1e-12, f"{name} not symmetric"
            assert np.linalg.eigvalsh(0.5 * (A + A.T)).min() > 0, f"{name} not SPD"

    def check_apply_vs_dense():
        grid = grid8()
        for op in (
            assembly.mass_operator(grid),
            assembly.stiffness_operator_x(grid, 0.95),
            assembly.stiffness_operator_y(grid, 0.6),
        ):
            v = rng.standard_normal(grid.ndof)
            assert np.abs(op.apply(v) - op.dense() @ v).max() < 1e-10

    def check_propagator_stability():
        spec = make_problem(case, grid8(), uniform_temporal(1.0, 16))
        sig = mode_spectrum(spec).sigmas
        for dt in (1e-3, 1e-1, 1.0, 10.0):
            lam = step_factors(sig, dt)
            assert np.abs(lam).max() < 1.0

    def check_cg_vs_direct():
        spec = make_problem(case, grid8(), uniform_temporal(1.0, 8))
        rhs = rng.standard_normal(spec.grid.ndof)
        d1 = Discretization(spec, cg_opts=CgOptions(rel_tol=1e-13))
        d2 = Discretization(spec, solver="direct")
        x1 = d1.implicit_solve(0.125, rhs)
        x2 = d2.implicit_solve(0.125, rhs)
        assert np.abs(x1 - x2).max() < 1e-9

    def check_fcf_fixed_point():
        spec = make_problem(case, SpatialGrid(4, 4), uniform_temporal(1.0, 16))
        opts = MgritOptions(m=4, max_levels=2, solver="direct")
        hier = MgritHierarchy(spec, opts)
        exact = sequential_solve(spec, hier.levels[0].disc)
        hier.levels[0].U[:] = exact
        fcf_relax(hier.levels[0])
        assert np.abs(hier.levels[0].U - exact).max() < 1e-10

    def check_f_point_zero_residual():
        spec = make_problem(case, SpatialGrid(4, 4), uniform_temporal(1.0, 16))
        opts = MgritOptions(m=4, max_levels=2, solver="direct")
        hier = MgritHierarchy(spec, opts)
        level = hier.levels[0]
        level.U[1:] = rng.random((16, level.disc.ndof))
        level.U[0] = level.G[0]
        f_relax(level)
        split = CfSplitting(16, 4)
        for n in range(1, 17):
            if n in split.c_indices:
                continue
            r = level.G[n] + level.propagate(n, level.U[n - 1]) - level.U[n]
            assert np.abs(r).max() < 1e-11

    def check_two_level_oracle():
        from .mgrit import coarse_correct, exact_solve, restrict_residual

        spec = make_problem(case, SpatialGrid(4, 4), uniform_temporal(1.0, 8))
        opts = MgritOptions(m=2, max_levels=2, solver="direct")
        hier = MgritHierarchy(spec, opts)
        level = hier.levels[0]
        exact = sequential_solve(spec, level.disc)
        err = rng.standard_normal(exact.shape)
        err[0] = 0.0
        level.U[:] = exact + err
        fcf_relax(level)
        restrict_residual(hier, 0)
        hier.levels[1].U[:] = 0.0
        exact_solve(hier.levels[1])
        coarse_correct(hier, 0)
        J = error_propagation_oracle(spec, 2)
        c_err = (level.U - exact)[::2].ravel()
        predicted = J @ err[::2].ravel()
        assert np.abs(c_err - predicted).max() < 1e-9

    def check_mgrit_matches_sequential():
        spec = make_problem(case, grid8(), uniform_temporal(1.0, 64))
        opts = MgritOptions(m=4, halt_tol=1e-10, solver="direct")
        U, trace = solve(spec, opts)
        _, res = spacetime_residual(spec, U, Discretization(spec, solver="direct"))
        assert trace.converged and res < 1e-8

    return [
        ("operator symmetry and positive-definiteness", check_symmetry_spd),
        ("matrix-free apply matches dense operator", check_apply_vs_dense),
        ("one-step propagator stability |lambda| < 1", check_propagator_stability),
        ("CG agrees with direct spatial solve", check_cg_vs_direct),
        ("FCF-relaxation fixes the exact solution", check_fcf_fixed_point),
        ("F-relaxation zeroes F-point residuals", check_f_point_zero_residual),
        ("two-level cycle matches dense error propagator", check_two_level_oracle),
        ("MGRIT solution matches sequential stepping", check_mgrit_matches_sequential),
    ]


@main.command()
def selftest():
    """Run the dense-oracle invariant suite (small sizes, < 60 s)."""
    failures = 0
    t0 = time.perf_counter()
    for name, check in _selftest_checks():
        try:
            check()
        except Exception as exc:  # noqa: BLE001 - report and keep going
            failures += 1
            click.echo(f"FAIL  {name}: {exc}")
        else:
            click.echo(f"PASS  {name}")
    elapsed = time.perf_counter() - t0
    click.echo(f"{'FAILED' if failures else 'OK'} ({elapsed:.1f}s)")
    if failures:
        sys.exit(1)


if __name__ == "__main__":
    main()
