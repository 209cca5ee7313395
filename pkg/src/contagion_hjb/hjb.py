"""Backward recursion over default states for the value factors phi(t, i, z).

The all-defaulted state has linear dynamics solved exactly by matrix
exponential. Every other state satisfies a nonlinear ODE system whose
coupling term is the optimized objective from :mod:`contagion_hjb.policy`,
evaluated against the already-solved one-more-default neighbor states. The
recursion therefore walks default states by decreasing number of defaults.

Two numerical safeguards come from the truncation argument that proves the
system well-posed:

* a linear comparison system gives a strictly positive floor for phi; the
  nonlinear term is evaluated at ``max(x, floor_eps / 2)`` so intermediate
  Runge-Kutta stages can never probe it at nonpositive arguments, and
* after the solve, the trajectory is checked to sit above the floor and to
  have never been clipped at an actual grid node.

The floor returned by :func:`psi_floor` is aligned to the time axis of phi:
the comparison argument runs in reversed time, so the bound proved for
phi(t) is the comparison solution at T - t. Node k of the returned array is
that bound at t_k. On top of the node values, node time-derivatives of phi
are stored and used for cubic Hermite interpolation of neighbor trajectories
at Runge-Kutta midpoints; linear interpolation would cap the scheme at
second order and void the fine-grid agreement this solver targets.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .model import (
    DefaultState,
    ModelParams,
    NumericalError,
    ParameterError,
    states_by_defaults_desc,
)
from .numerics import TimeGrid, expm
from .policy import maximize_on_problem, maximize_terminal, state_problem

logger = logging.getLogger(__name__)

FLOOR_SLACK = 1e-8  # tolerance on the phi >= floor comparison at nodes


@dataclass
class ValueSurface:
    """phi(t_k, i, z) on a shared uniform grid, plus node time-derivatives.

    ``phi`` and ``slope`` have shape (N+1, m, 2^n); the last axis is indexed
    by the default-state mask. ``floors`` and ``floor_eps`` record the
    comparison-system lower bound per non-terminal state mask.
    """

    grid: TimeGrid
    phi: np.ndarray
    slope: np.ndarray
    floors: dict[int, np.ndarray] = field(default_factory=dict)
    floor_eps: dict[int, float] = field(default_factory=dict)

    def node_index(self, t: float) -> int:
        k = int(round(t / self.grid.dt))
        if not 0 <= k <= self.grid.N or abs(t - k * self.grid.dt) > 1e-9 * max(1.0, self.grid.T):
            raise ValueError(f"t={t} is not a grid node (dt={self.grid.dt})")
        return k

    def phi_at(self, t: float, i: int, z: DefaultState) -> float:
        """Cubic Hermite evaluation between nodes; exact at nodes."""
        dt = self.grid.dt
        k = min(int(t / dt), self.grid.N - 1)
        s = (t - k * dt) / dt
        y0, y1 = self.phi[k, i, z.mask], self.phi[k + 1, i, z.mask]
        d0, d1 = self.slope[k, i, z.mask] * dt, self.slope[k + 1, i, z.mask] * dt
        h00 = (1 + 2 * s) * (1 - s) ** 2
        h10 = s * (1 - s) ** 2
        h01 = s * s * (3 - 2 * s)
        h11 = s * s * (s - 1)
        return float(h00 * y0 + h10 * d0 + h01 * y1 + h11 * d1)


@dataclass
class PolicySurface:
    """Optimal feedback (pi, l) on the same grid as the value surface.

    ``pi`` has shape (N+1, m, 2^n, n) with defaulted components 0;
    ``l`` has shape (N+1, m, 2^n).
    """

    grid: TimeGrid
    pi: np.ndarray
    l: np.ndarray


def build_A_terminal(params: ModelParams) -> np.ndarray:
    """System matrix of the all-defaulted state: diag of gamma r + optimized
    liability drift, plus the regime generator."""
    diag = np.array(
        [params.gamma * params.r[i] + maximize_terminal(i, params)[1] for i in range(params.m)]
    )
    return np.diag(diag) + params.Q


def solve_terminal_state(params: ModelParams, grid: TimeGrid) -> np.ndarray:
    """Exact value factors at the all-defaulted state, shape (N+1, m).

    phi(t) = (1/gamma) e^{A (T - t)} applied to the all-ones vector; the
    trajectory is propagated node to node with one per-step exponential.
    """
    A = build_A_terminal(params)
    step = expm(A, grid.dt)
    out = np.empty((grid.N + 1, params.m))
    out[grid.N] = 1.0 / params.gamma
    for k in range(grid.N - 1, -1, -1):
        out[k] = step @ out[k + 1]
    if not np.all(out > 0):
        raise NumericalError("all-defaulted value factors lost positivity")
    return out


def build_A_general(params: ModelParams, z: DefaultState) -> np.ndarray:
    """Linear part of the dynamics at state ``z``: diag(gamma r - sum of
    surviving default intensities) plus the regime generator."""
    if z.all_defaulted:
        raise ParameterError("all-defaulted state has its own system matrix (build_A_terminal)")
    alive = z.alive_idx
    diag = params.gamma * params.r - params.h[:, z.mask, :][:, alive].sum(axis=1)
    return np.diag(diag) + params.Q


def psi_floor(params: ModelParams, z: DefaultState, grid: TimeGrid) -> tuple[np.ndarray, float]:
    """Comparison-system lower bound for phi at state ``z``.

    Returns (floor, eps): ``floor[k]`` bounds ``phi(t_k)`` from below
    componentwise, and ``eps`` is the minimum of the comparison solution over
    the horizon, strictly positive. The comparison system runs in reversed
    time, so the returned array is its trajectory read backwards.
    """
    A = build_A_general(params, z)
    step = expm(A, grid.dt)
    forward = np.empty((grid.N + 1, params.m))
    forward[0] = 1.0 / params.gamma
    for k in range(1, grid.N + 1):
        forward[k] = step @ forward[k - 1]
    eps = float(forward.min())
    if not eps > 0:
        raise NumericalError(f"comparison floor lost positivity at state '{z.label}'")
    return forward[::-1].copy(), eps


@dataclass
class StateSolution:
    """Per-state solver output: trajectory, node slopes, node policies."""

    phi: np.ndarray    # (N+1, m)
    slope: np.ndarray  # (N+1, m)
    pi: np.ndarray     # (N+1, m, n), defaulted components 0
    l: np.ndarray      # (N+1, m)
    floor: np.ndarray  # (N+1, m)
    floor_eps: float


def solve_state(
    params: ModelParams,
    z: DefaultState,
    grid: TimeGrid,
    phi_next: Mapping[int, tuple[np.ndarray, np.ndarray]],
) -> StateSolution:
    """Solve the value-factor system at state ``z`` by backward RK4.

    Args:
        params: validated model coefficients.
        z: default state with at least one survivor.
        grid: shared uniform grid.
        phi_next: for each surviving stock j, the (values, slopes) node arrays
            of the neighbor state with j also defaulted, each (N+1, m) and
            strictly positive.

    Raises:
        NumericalError: if the truncation floor is hit at a grid node, the
            floor comparison fails, or the inner optimizer breaks down.
    """
    if z.all_defaulted:
        raise ParameterError("use solve_terminal_state at the all-defaulted state")
    m, N, dt = params.m, grid.N, grid.dt
    survivors = z.survivors
    for j in survivors:
        if j not in phi_next:
            raise ParameterError(f"phi_next missing neighbor for surviving stock {j}")
        vals, slopes = phi_next[j]
        if vals.shape != (N + 1, m) or slopes.shape != (N + 1, m):
            raise ParameterError(f"phi_next[{j}] arrays must have shape {(N + 1, m)}")
        if not np.all(vals > 0):
            raise ParameterError(f"phi_next[{j}] must be strictly positive at every node")

    A = build_A_general(params, z)
    floor, eps = psi_floor(params, z, grid)
    clip_level = 0.5 * eps

    probs = [state_problem(params, i, z) for i in range(m)]
    h_s = np.stack([probs[i].h_s for i in range(m)])  # (m, S)

    vals = np.stack([phi_next[j][0] for j in survivors])    # (S, N+1, m)
    slps = np.stack([phi_next[j][1] for j in survivors])
    # Hermite midpoint of each interval: interpolation error O(dt^4).
    mids = 0.5 * (vals[:, :-1, :] + vals[:, 1:, :]) + (dt / 8.0) * (slps[:, :-1, :] - slps[:, 1:, :])

    warm: list[np.ndarray | None] = [None] * m
    node_pi = np.zeros((N + 1, m, params.n))
    node_l = np.zeros((N + 1, m))
    slope_out = np.zeros((N + 1, m))
    floored_nodes: list[int] = []

    def rhs(x: np.ndarray, weights: np.ndarray, node: int | None = None) -> np.ndarray:
        """-(A x + optimized coupling); records policy and slope at nodes."""
        clipped = np.maximum(x, clip_level)
        G = np.empty(m)
        for i in range(m):
            pi_s, l_i, G[i] = maximize_on_problem(
                probs[i], float(clipped[i]), h_s[i] * weights[:, i], start=warm[i]
            )
            warm[i] = np.append(pi_s, l_i)
            if node is not None:
                node_pi[node, i, probs[i].alive_idx] = pi_s
                node_l[node, i] = l_i
        out = -(A @ x) - G
        if node is not None:
            if np.any(x <= clip_level):
                floored_nodes.append(node)
            slope_out[node] = out
        return out

    phi = np.empty((N + 1, m))
    phi[N] = 1.0 / params.gamma
    y = phi[N].copy()
    for k in range(N, 0, -1):
        w_hi = vals[:, k, :]
        w_mid = mids[:, k - 1, :]
        w_lo = vals[:, k - 1, :]
        k1 = rhs(y, w_hi, node=k)
        k2 = rhs(y - 0.5 * dt * k1, w_mid)
        k3 = rhs(y - 0.5 * dt * k2, w_mid)
        k4 = rhs(y - dt * k3, w_lo)
        y = y - (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise NumericalError(f"value factors became non-finite at t={grid.times[k - 1]:.6g}")
        phi[k - 1] = y
    rhs(y, vals[:, 0, :], node=0)

    if floored_nodes:
        raise NumericalError(
            f"truncation floor active at grid node(s) {sorted(set(floored_nodes))} for state "
            f"'{z.label}': grid too coarse or inputs invalid"
        )
    if np.any(phi < floor - FLOOR_SLACK):
        worst = float((floor - phi).max())
        raise NumericalError(
            f"value factors fell below the comparison floor at state '{z.label}' "
            f"(worst gap {worst:.3e})"
        )
    return StateSolution(phi=phi, slope=slope_out, pi=node_pi, l=node_l, floor=floor, floor_eps=eps)


def _solve_state_task(args) -> tuple[int, StateSolution]:
    params, mask, grid, phi_next = args
    z = DefaultState(n=params.n, mask=mask)
    return mask, solve_state(params, z, grid, phi_next)


def solve_all(
    params: ModelParams, grid: TimeGrid, n_jobs: int = 1
) -> tuple[ValueSurface, PolicySurface]:
    """Solve every default state, most-defaulted first.

    States with the same number of defaults never reference each other and
    may be dispatched to parallel workers with ``n_jobs > 1``; results are
    identical either way.
    """
    m, n = params.m, params.n
    shape = (grid.N + 1, m, params.n_states)
    phi = np.zeros(shape)
    slope = np.zeros(shape)
    pi = np.zeros(shape + (n,))
    l_arr = np.zeros(shape)
    surface = ValueSurface(grid=grid, phi=phi, slope=slope)

    terminal_mask = params.n_states - 1
    A_term = build_A_terminal(params)
    phi_en = solve_terminal_state(params, grid)
    phi[:, :, terminal_mask] = phi_en
    slope[:, :, terminal_mask] = -(phi_en @ A_term.T)
    for i in range(m):
        l_arr[:, i, terminal_mask] = maximize_terminal(i, params)[0]

    groups = states_by_defaults_desc(n)
    for group in groups:
        pending = [z for z in group if not z.all_defaulted]
        if not pending:
            continue
        tasks = []
        for z in pending:
            phi_next = {
                j: (phi[:, :, z.flip(j).mask].copy(), slope[:, :, z.flip(j).mask].copy())
                for j in z.survivors
            }
            tasks.append((params, z.mask, grid, phi_next))
        if n_jobs > 1 and len(tasks) > 1:
            with ProcessPoolExecutor(max_workers=n_jobs) as pool:
                results = list(pool.map(_solve_state_task, tasks))
        else:
            results = [_solve_state_task(t) for t in tasks]
        for mask, sol in results:
            phi[:, :, mask] = sol.phi
            slope[:, :, mask] = sol.slope
            pi[:, :, mask, :] = sol.pi
            l_arr[:, :, mask] = sol.l
            surface.floors[mask] = sol.floor
            surface.floor_eps[mask] = sol.floor_eps
            logger.debug("solved state %s (floor eps %.4g)", DefaultState(n, mask).label, sol.floor_eps)

    if not np.all(phi > 0):
        raise NumericalError("value surface lost positivity")
    return surface, PolicySurface(grid=grid, pi=pi, l=l_arr)
