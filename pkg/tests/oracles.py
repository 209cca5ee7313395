"""Independent oracles used by the test suite.

Everything here restates the objectives from first principles and searches
them by brute force, so agreement with the library's Newton/expm/RK4 paths
is meaningful. Nothing in this module calls the optimizers under test.
"""

from __future__ import annotations

import numpy as np

from contagion_hjb import ModelParams

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Argmax of a strictly unimodal function on [lo, hi]."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def terminal_objective(l, *, gamma, premium_gap, claim_vol_sq, nu, g):
    """All-defaulted liability objective, restated."""
    l = np.asarray(l, dtype=float)
    return (
        gamma * premium_gap * l
        + 0.5 * gamma * (gamma - 1.0) * l * l * claim_vol_sq
        + ((1.0 - l * g) ** gamma - 1.0) * nu
    )


def state_objective(pi, l, *, gamma, theta, cov, rho, claim_vol_sq, premium_gap, nu, g, weights, x):
    """General-state objective restated for broadcast evaluation.

    ``pi`` has shape (..., S), ``l`` shape (...); returns shape (...).
    """
    pi = np.asarray(pi, dtype=float)
    l = np.asarray(l, dtype=float)
    jump = np.sum(weights * (1.0 - pi) ** gamma, axis=-1)
    quad = np.einsum("...i,ij,...j->...", pi, cov, pi)
    cross = pi @ rho
    hamil = (
        gamma * (pi @ theta + premium_gap * l)
        + 0.5 * gamma * (gamma - 1.0) * (quad + l * l * claim_vol_sq - 2.0 * l * cross)
        + ((1.0 - l * g) ** gamma - 1.0) * nu
    )
    return jump + x * hamil


def grid_search_state(
    *,
    gamma,
    theta,
    cov,
    rho,
    claim_vol_sq,
    premium_gap,
    nu,
    g,
    weights,
    x,
    pi_lo: float = -5.0,
    points: int = 41,
    levels: int = 9,
    shrink: float = 5.0,
) -> tuple[np.ndarray, float, float]:
    """Coarse-to-fine dense grid search of the general-state objective.

    The search box starts at [pi_lo, 1]^S x [0, 1/g] and is widened whenever
    the incumbent touches the open lower edge. Each level re-grids a window
    around the incumbent, shrinking the step until it is below 1e-7.

    Returns (pi_star, l_star, value).
    """
    S = len(theta)
    lo = np.full(S + 1, pi_lo)
    hi = np.ones(S + 1)
    lo[S], hi[S] = 0.0, 1.0 / g

    def evaluate(grids):
        mesh = np.meshgrid(*grids, indexing="ij")
        flat = np.stack([m.ravel() for m in mesh], axis=-1)
        vals = state_objective(
            flat[:, :S], flat[:, S],
            gamma=gamma, theta=theta, cov=cov, rho=rho, claim_vol_sq=claim_vol_sq,
            premium_gap=premium_gap, nu=nu, g=g, weights=weights, x=x,
        )
        best = int(np.nanargmax(vals))
        return flat[best], float(vals[best])

    hard_lo = lo.copy()
    hard_hi = hi.copy()
    for _ in range(12):  # widening attempts
        box_lo, box_hi = hard_lo.copy(), hard_hi.copy()
        incumbent, value = evaluate(
            [np.linspace(box_lo[k], box_hi[k], points) for k in range(S + 1)]
        )
        step = (box_hi - box_lo) / (points - 1)
        for _ in range(levels):
            if float(step.max()) < 1e-7:
                break
            span = 2.0 * step
            box_lo = np.maximum(hard_lo, incumbent - span)
            box_hi = np.minimum(hard_hi, incumbent + span)
            incumbent, value = evaluate(
                [np.linspace(box_lo[k], box_hi[k], points) for k in range(S + 1)]
            )
            step = (box_hi - box_lo) / (points - 1)
        at_edge = incumbent[:S] <= hard_lo[:S] + 2.0 * step[:S]
        if not np.any(at_edge):
            return incumbent[:S], float(incumbent[S]), value
        hard_lo[:S][at_edge] *= 2.0  # short-position box touched: widen and retry
    raise AssertionError("grid oracle kept touching its widening lower edge")


def random_model(rng: np.random.Generator, n: int = 2, m: int = 2) -> ModelParams:
    """A random coefficient set satisfying every validation invariant."""
    n_states = 1 << n
    Q = rng.uniform(0.1, 1.5, size=(m, m))
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    sigma = rng.uniform(-0.6, 0.6, size=(m, n, n)) + 0.8 * np.eye(n)
    return ModelParams(
        n=n, m=m, d=n, d_bar=1,
        gamma=float(rng.uniform(0.15, 0.85)),
        T=1.0,
        Q=Q,
        r=rng.uniform(0.01, 0.12, size=m),
        mu=rng.uniform(0.05, 1.2, size=(m, n)),
        sigma=sigma,
        h=rng.uniform(0.1, 1.8, size=(m, n_states, n)),
        nu=rng.uniform(0.3, 5.0, size=(m, n_states)),
        p=rng.uniform(0.1, 1.0, size=(m, n_states)),
        c=rng.uniform(0.0, 0.4, size=m),
        phi=rng.uniform(0.1, 1.0, size=(m, n)),
        phi_bar=rng.uniform(0.1, 1.0, size=(m, 1)),
        g=rng.uniform(0.05, 0.4, size=m),
    )
