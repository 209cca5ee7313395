"""Parameter sweeps: re-solve the model over a list of values of one target
coefficient and record scalar observables of the solved surfaces."""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .hjb import PolicySurface, ValueSurface, solve_all
from .model import ConfigError, ModelParams, validate
from .numerics import TimeGrid

TARGET_PARAMS = ("h", "nu", "sigma_scale", "Q_scale")
QUANTITIES = ("phi", "pi_star", "l_star", "stock_share", "phi_gap")


@dataclass(frozen=True)
class Observable:
    quantity: str
    t: float
    z: str
    regime: int | None = None   # 1-based; unused by phi_gap
    stock: int | None = None    # 1-based; only for pi_star

    @property
    def column(self) -> str:
        tag = f"t{self.t:g}"
        if self.quantity == "phi_gap":
            return f"phigap_{tag}_z{self.z}"
        head = {"phi": "phi", "l_star": "l", "stock_share": "share"}.get(self.quantity)
        if self.quantity == "pi_star":
            head = f"pi{self.stock}"
        return f"{head}_{tag}_r{self.regime}_z{self.z}"


@dataclass(frozen=True)
class SweepSpec:
    """One target coefficient, the values it sweeps through, and observables."""

    target: dict
    values: tuple[float, ...]
    observables: tuple[Observable, ...]


def load_sweep_spec(path: str | Path) -> SweepSpec:
    with open(path) as fh:
        raw = json.load(fh)
    for key in ("target", "values", "observables"):
        if key not in raw:
            raise ConfigError(f"sweep spec missing '{key}'")
    values = tuple(float(v) for v in raw["values"])
    diffs = np.diff(values)
    if len(values) < 2 or not (np.all(diffs > 0) or np.all(diffs < 0)):
        raise ConfigError("sweep values must be strictly monotone")
    target = raw["target"]
    if target.get("param") not in TARGET_PARAMS:
        raise ConfigError(f"sweep target must be one of {TARGET_PARAMS}")
    obs = []
    for entry in raw["observables"]:
        q = entry.get("quantity")
        if q not in QUANTITIES:
            raise ConfigError(f"unknown observable quantity {q!r}")
        if q == "pi_star" and "stock" not in entry:
            raise ConfigError("pi_star observable needs a 'stock'")
        if q != "phi_gap" and "regime" not in entry:
            raise ConfigError(f"{q} observable needs a 'regime'")
        obs.append(
            Observable(
                quantity=q,
                t=float(entry["t"]),
                z=str(entry["z"]),
                regime=int(entry["regime"]) if "regime" in entry else None,
                stock=int(entry["stock"]) if "stock" in entry else None,
            )
        )
    return SweepSpec(target=target, values=values, observables=tuple(obs))


def apply_target(params: ModelParams, target: dict, value: float) -> ModelParams:
    """Return a copy of ``params`` with the target coefficient set to ``value``."""
    kind = target["param"]
    if kind == "h":
        z = params.state(target["z"])
        j = int(target["stock"])
        i = int(target["regime"]) - 1
        h = params.h.copy()
        h[i, z.mask, j - 1] = value
        return params.replace(h=h)
    if kind == "nu":
        z = params.state(target["z"])
        i = int(target["regime"]) - 1
        nu = params.nu.copy()
        nu[i, z.mask] = value
        return params.replace(nu=nu)
    if kind == "sigma_scale":
        return params.replace(sigma=params.sigma * value)
    if kind == "Q_scale":
        return params.replace(Q=params.Q * value)
    raise ConfigError(f"unknown sweep target {kind!r}")


def eval_observable(
    obs: Observable, surface: ValueSurface, policy: PolicySurface, params: ModelParams
) -> float:
    k = surface.node_index(obs.t)
    z = params.state(obs.z)
    if obs.quantity == "phi_gap":
        if params.m != 2:
            raise ConfigError("phi_gap observable needs exactly two regimes")
        return float(abs(surface.phi[k, 0, z.mask] - surface.phi[k, 1, z.mask]))
    i = obs.regime - 1
    if not 0 <= i < params.m:
        raise ConfigError(f"observable regime {obs.regime} out of range")
    if obs.quantity == "phi":
        return float(surface.phi[k, i, z.mask])
    if obs.quantity == "l_star":
        return float(policy.l[k, i, z.mask])
    if obs.quantity == "stock_share":
        return float(policy.pi[k, i, z.mask, :].sum())
    if obs.quantity == "pi_star":
        if not 1 <= obs.stock <= params.n:
            raise ConfigError(f"observable stock {obs.stock} out of range")
        return float(policy.pi[k, i, z.mask, obs.stock - 1])
    raise ConfigError(f"unknown observable {obs.quantity!r}")


def _sweep_point(args) -> list[float]:
    params, spec, value, grid_n = args
    point_params = validate(apply_target(params, spec.target, value))
    grid = TimeGrid(T=point_params.T, N=grid_n)
    surface, policy = solve_all(point_params, grid)
    return [eval_observable(o, surface, policy, point_params) for o in spec.observables]


def run_sweep(
    params: ModelParams, spec: SweepSpec, grid_n: int, n_jobs: int = 1
) -> tuple[list[str], list[list[float]]]:
    """Solve once per sweep value (cold, no warm starting) and tabulate observables.

    Returns (header, rows) with rows in spec order regardless of completion order.
    """
    header = ["sweep_value"] + [o.column for o in spec.observables]
    tasks = [(params, spec, v, grid_n) for v in spec.values]
    if n_jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(t) for t in tasks]
    rows = [[v] + res for v, res in zip(spec.values, results)]
    return header, rows
