"""Command-line entry point: validate | solve | sweep | simulate.

Exit codes: 0 ok, 1 validation failure, 2 numerical failure, 3 I/O failure.
All commands are deterministic given (config, flags, seed). CSV artifacts
carry a version header comment so downstream tools can check compatibility.
"""

from __future__ import annotations

import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .config import load_params
from .hjb import solve_all
from .model import (
    ConfigError,
    DefaultState,
    ModelParams,
    NumericalError,
    ParameterError,
    all_states,
    validate,
)
from .numerics import TimeGrid
from .simulate import ConstantPolicy, SimConfig, SurfacePolicy, simulate, zero_policy
from .sweep import load_sweep_spec, run_sweep

EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2
EXIT_IO = 3


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _resolve_config(config_path: str) -> str:
    """A plain path, or the name of a bundled config like ``table1.cfg``."""
    if Path(config_path).exists():
        return config_path
    from .config import data_path

    bundled = data_path(config_path if config_path.endswith(".cfg") else config_path + ".cfg")
    if bundled.exists():
        return str(bundled)
    raise FileNotFoundError(f"config file not found: {config_path}")


def write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# contagion-hjb v{__version__}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, (int, float, np.floating)) else str(v) for v in row))
            fh.write("\n")


def _run(body) -> None:
    try:
        body()
    except (ConfigError, ParameterError) as exc:
        click.echo(f"validation error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    except NumericalError as exc:
        click.echo(f"numerical error: {exc}", err=True)
        sys.exit(EXIT_NUMERICAL)
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        sys.exit(EXIT_IO)


@click.group()
@click.version_option(version=__version__, prog_name="contagion-hjb")
def main():
    """Solver and Monte Carlo verifier for insurer portfolio and risk control
    under regime switching and default contagion."""


@main.command("validate")
@click.option("--config", "config_path", required=True, help="Model config file (TOML).")
def cmd_validate(config_path: str):
    """Load a config, check every model assumption and print a summary."""

    def body():
        params = validate(load_params(_resolve_config(config_path)))
        click.echo(f"config ok: {config_path}")
        click.echo(f"  stocks n={params.n}, regimes m={params.m}, d={params.d}, d_bar={params.d_bar}")
        click.echo(f"  gamma={params.gamma:g}, T={params.T:g}")
        for i in range(params.m):
            click.echo(
                f"  regime {i + 1}: r={params.r[i]:g}, mu={np.array2string(params.mu[i], precision=4)}, "
                f"c={params.c[i]:g}, g={params.g[i]:g}"
            )
        for z in all_states(params.n):
            nu_str = ", ".join(f"{params.nu[i, z.mask]:g}" for i in range(params.m))
            click.echo(f"  state {z.label}: nu=({nu_str})")

    _run(body)


@main.command("solve")
@click.option("--config", "config_path", required=True)
@click.option("--out", "out_dir", default="out", show_default=True)
@click.option("--grid-n", "--grid-N", "grid_n", default=1000, show_default=True)
@click.option("--threads", default=1, show_default=True)
def cmd_solve(config_path: str, out_dir: str, grid_n: int, threads: int):
    """Solve all default states and write phi.csv and policy.csv."""

    def body():
        params = validate(load_params(_resolve_config(config_path)))
        grid = TimeGrid(T=params.T, N=grid_n)
        surface, policy = solve_all(params, grid, n_jobs=threads)
        out = Path(out_dir)

        times = grid.times
        phi_rows = []
        pol_rows = []
        for z in all_states(params.n):
            for i in range(params.m):
                for k in range(grid.N + 1):
                    phi_rows.append([times[k], i + 1, z.label, surface.phi[k, i, z.mask]])
                    pol_rows.append(
                        [times[k], i + 1, z.label]
                        + list(policy.pi[k, i, z.mask, :])
                        + [policy.l[k, i, z.mask]]
                    )
        write_csv(out / "phi.csv", ["t", "regime", "z_bitmask", "phi"], phi_rows)
        pi_cols = [f"pi_{j}" for j in range(1, params.n + 1)]
        write_csv(out / "policy.csv", ["t", "regime", "z_bitmask"] + pi_cols + ["l"], pol_rows)

        click.echo(f"solved {params.n_states} default states x {params.m} regimes on N={grid_n}")
        click.echo("phi(0, i, z):")
        for z in all_states(params.n):
            vals = ", ".join(f"regime {i + 1}: {surface.phi[0, i, z.mask]:.6f}" for i in range(params.m))
            click.echo(f"  z={z.label}: {vals}")
        click.echo(f"wrote {out / 'phi.csv'} and {out / 'policy.csv'}")

    _run(body)


@main.command("sweep")
@click.option("--config", "config_path", required=True)
@click.option("--spec", "spec_path", required=True, help="Sweep spec (JSON).")
@click.option("--out", "out_dir", default="out", show_default=True)
@click.option("--grid-n", "--grid-N", "grid_n", default=1000, show_default=True)
@click.option("--threads", default=1, show_default=True)
def cmd_sweep(config_path: str, spec_path: str, out_dir: str, grid_n: int, threads: int):
    """Re-solve per sweep value and tabulate observables into sweep.csv."""

    def body():
        params = validate(load_params(_resolve_config(config_path)))
        spec = load_sweep_spec(spec_path)
        header, rows = run_sweep(params, spec, grid_n, n_jobs=threads)
        out = Path(out_dir)
        write_csv(out / "sweep.csv", header, rows)
        click.echo(f"swept {len(rows)} values of {spec.target['param']}; wrote {out / 'sweep.csv'}")

    _run(body)


def _parse_policy(policy_str: str, params: ModelParams):
    """Returns (policy or None, label); None means: read off the solved surface."""
    if policy_str == "zero":
        return zero_policy(params.n), "zero"
    if policy_str == "optimal":
        return None, "optimal"
    if policy_str.startswith("constant:"):
        parts = [float(v) for v in policy_str.removeprefix("constant:").split(",")]
        if len(parts) != params.n + 1:
            raise ConfigError(
                f"constant policy needs {params.n} fractions plus l, got {len(parts)} values"
            )
        return ConstantPolicy(parts[:-1], parts[-1]), "constant"
    raise ConfigError(f"unknown policy {policy_str!r} (use optimal | zero | constant:<pi...,l>)")


@main.command("simulate")
@click.option("--config", "config_path", required=True)
@click.option("--policy", "policy_str", default="optimal", show_default=True)
@click.option("--paths", default=100_000, show_default=True)
@click.option("--dt", default=1e-3, show_default=True)
@click.option("--seed", default=20240, show_default=True)
@click.option("--out", "out_dir", default="out", show_default=True)
@click.option("--grid-n", "--grid-N", "grid_n", default=1000, show_default=True)
@click.option("--threads", default=1, show_default=True)
@click.option("--x0", default=1.0, show_default=True)
@click.option("--regime", default=1, show_default=True, help="Initial regime, 1-based.")
@click.option("--state", "state_str", default=None, help="Initial default state bits, e.g. 00.")
@click.option("--event-log", "event_log", default=None, help="Write a per-path event log CSV.")
def cmd_simulate(
    config_path, policy_str, paths, dt, seed, out_dir, grid_n, threads, x0, regime, state_str, event_log
):
    """Monte Carlo estimate of expected terminal utility under a policy."""

    def body():
        params = validate(load_params(_resolve_config(config_path)))
        z0 = params.state(state_str) if state_str else DefaultState(n=params.n, mask=0)
        policy, label = _parse_policy(policy_str, params)
        grid = TimeGrid(T=params.T, N=grid_n)
        surface, solved_policy = solve_all(params, grid, n_jobs=threads)
        if policy is None:
            policy = SurfacePolicy(solved_policy)

        cfg = SimConfig(
            paths=paths, dt=dt, seed=seed, x0=x0, i0=regime - 1, z0=z0,
            n_workers=threads, event_log=event_log,
        )
        report = simulate(params, policy, cfg)
        target = x0**params.gamma * surface.phi[0, regime - 1, z0.mask]

        click.echo(f"policy={label}, paths={paths}, dt={dt:g}, seed={seed}, workers={threads}")
        click.echo(f"estimate = {report.estimate:.6f} +/- {report.std_error:.6f} (1 SE)")
        click.echo(f"solver value x0^gamma phi(0,{regime},{z0.label}) = {target:.6f}")
        click.echo(f"gap = {report.estimate - target:+.6f} ({_gap_in_se(report, target):.2f} SE)")

        out = Path(out_dir)
        write_csv(
            out / "sim.csv",
            ["policy", "paths", "dt", "seed", "estimate", "std_error", "solver_value"],
            [[label, paths, dt, seed, report.estimate, report.std_error, target]],
        )
        click.echo(f"wrote {out / 'sim.csv'}")

    _run(body)


def _gap_in_se(report, target: float) -> float:
    return (report.estimate - target) / report.std_error if report.std_error > 0 else 0.0


if __name__ == "__main__":
    main()
