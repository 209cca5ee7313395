"""Inner concave maximizations that define the value-factor dynamics.

Two problems appear. At the all-defaulted state the control is the scalar
liability ratio l on [0, 1/g]. At every other state the control is the vector
of surviving-stock fractions (each at most 1, shorting unbounded) together
with l. Both objectives are strictly concave and coercive, so a projected
Newton iteration with backtracking converges to the unique optimum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .model import DefaultState, ModelParams, NumericalError, ParameterError

GRAD_TOL = 1e-9
MAX_ITER = 200
_BOUND_PAD = 1e-12  # keeps iterates off boundaries where the objective has infinite slope


@dataclass(frozen=True)
class PolicyPoint:
    """Feedback control: per-stock fractions (defaulted components 0) and liability ratio."""

    pi: np.ndarray
    l: float

    def __post_init__(self):
        object.__setattr__(self, "pi", np.array(self.pi, dtype=float))


def _claim_vol_sq(params: ModelParams, i: int) -> float:
    return float(params.phi[i] @ params.phi[i] + params.phi_bar[i] @ params.phi_bar[i])


def hamiltonian_terminal(l: float, i: int, params: ModelParams) -> float:
    """Drift contribution of the liability control when all stocks are defaulted.

    Requires 1 - l g(i) >= 0; the claim jump factor (1 - l g)^gamma is not
    defined past that point.
    """
    g = float(params.g[i])
    if l < 0 or 1.0 - l * g < 0:
        raise ParameterError(f"liability ratio {l} outside [0, 1/g] for regime {i + 1}")
    gamma = params.gamma
    e_n = params.n_states - 1
    pc = float(params.p[i, e_n] - params.c[i])
    nu = float(params.nu[i, e_n])
    return (
        gamma * pc * l
        + 0.5 * gamma * (gamma - 1.0) * l * l * _claim_vol_sq(params, i)
        + ((1.0 - l * g) ** gamma - 1.0) * nu
    )


def maximize_terminal(i: int, params: ModelParams) -> tuple[float, float]:
    """Unique maximizer of the all-defaulted liability objective on [0, 1/g(i)].

    Returns (l_star, value). The value is always >= 0 because l = 0 scores 0.
    """
    gamma = params.gamma
    g = float(params.g[i])
    e_n = params.n_states - 1
    pc = float(params.p[i, e_n] - params.c[i])
    nu = float(params.nu[i, e_n])
    vol_sq = _claim_vol_sq(params, i)

    def deriv(l: float) -> float:
        return (
            gamma * pc
            + gamma * (gamma - 1.0) * l * vol_sq
            - gamma * g * nu * (1.0 - l * g) ** (gamma - 1.0)
        )

    if deriv(0.0) <= 0.0:
        return 0.0, 0.0

    lo, hi = 0.0, (1.0 - 1e-14) / g
    if deriv(hi) >= 0.0:  # only reachable when nu = 0; boundary optimum
        l_star = 1.0 / g
        return l_star, hamiltonian_terminal(l_star, i, params)

    # Newton with a bisection safeguard on the strictly decreasing derivative.
    l = 0.5 * hi
    for _ in range(200):
        d = deriv(l)
        if d > 0:
            lo = l
        else:
            hi = l
        curv = gamma * (gamma - 1.0) * (vol_sq + g * g * nu * (1.0 - l * g) ** (gamma - 2.0))
        step = l - d / curv
        l = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 1e-16 * (1.0 + hi):
            break
    value = hamiltonian_terminal(l, i, params)
    return l, value


@dataclass(frozen=True)
class StateProblem:
    """Coefficients of the general-state objective, regime and state fixed."""

    gamma: float
    theta_s: np.ndarray   # (S,) excess returns of survivors
    cov: np.ndarray       # (S, S) sigma_s sigma_s^T
    rho: np.ndarray       # (S,) sigma_s phi^T
    claim_vol_sq: float
    premium_gap: float    # p(i,z) - c(i)
    nu: float
    g: float
    h_s: np.ndarray       # (S,) survivor default intensities
    alive_idx: np.ndarray
    n: int


def state_problem(params: ModelParams, i: int, z: DefaultState) -> StateProblem:
    """Precompute the x- and time-independent pieces of the state objective."""
    if z.all_defaulted:
        raise ParameterError("no surviving stocks: use maximize_terminal at the all-defaulted state")
    alive = z.alive_idx
    sigma_s = params.sigma[i][alive, :]
    return StateProblem(
        gamma=params.gamma,
        theta_s=params.mu[i][alive] - params.r[i] + params.h[i, z.mask][alive],
        cov=sigma_s @ sigma_s.T,
        rho=sigma_s @ params.phi[i],
        claim_vol_sq=_claim_vol_sq(params, i),
        premium_gap=float(params.p[i, z.mask] - params.c[i]),
        nu=float(params.nu[i, z.mask]),
        g=float(params.g[i]),
        h_s=params.h[i, z.mask][alive].copy(),
        alive_idx=alive,
        n=params.n,
    )


def objective(prob: StateProblem, pi_s: np.ndarray, l: float, x_i: float, w: np.ndarray) -> float:
    """Objective value at survivor fractions ``pi_s`` and liability ratio ``l``.

    ``w`` holds the default-jump weights h_j(i,z) * phi_next_j, one per survivor.
    """
    gamma = prob.gamma
    one_m_pi = 1.0 - pi_s
    jump = float(w @ one_m_pi**gamma)
    quad = float(pi_s @ prob.cov @ pi_s)
    cross = float(pi_s @ prob.rho)
    drift = gamma * (float(pi_s @ prob.theta_s) + prob.premium_gap * l)
    curv = 0.5 * gamma * (gamma - 1.0) * (quad + l * l * prob.claim_vol_sq - 2.0 * l * cross)
    claim = ((1.0 - l * prob.g) ** gamma - 1.0) * prob.nu
    return jump + x_i * (drift + curv + claim)


def _value_grad(prob: StateProblem, u: np.ndarray, x_i: float, w: np.ndarray):
    gamma = prob.gamma
    pi_s, l = u[:-1], u[-1]
    one_m_pi = 1.0 - pi_s
    one_m_lg = 1.0 - l * prob.g

    cov_pi = prob.cov @ pi_s
    cross = float(pi_s @ prob.rho)
    value = (
        float(w @ one_m_pi**gamma)
        + x_i
        * (
            gamma * (float(pi_s @ prob.theta_s) + prob.premium_gap * l)
            + 0.5 * gamma * (gamma - 1.0) * (float(pi_s @ cov_pi) + l * l * prob.claim_vol_sq - 2.0 * l * cross)
            + (one_m_lg**gamma - 1.0) * prob.nu
        )
    )

    grad = np.empty(u.size)
    jump_slope = np.zeros_like(pi_s)
    active_w = w > 0.0
    if np.any(active_w):
        jump_slope[active_w] = -gamma * w[active_w] * one_m_pi[active_w] ** (gamma - 1.0)
    grad[:-1] = jump_slope + x_i * gamma * (prob.theta_s + (gamma - 1.0) * (cov_pi - l * prob.rho))
    claim_slope = -gamma * prob.g * prob.nu * one_m_lg ** (gamma - 1.0) if prob.nu > 0.0 else 0.0
    grad[-1] = x_i * gamma * (prob.premium_gap + (gamma - 1.0) * (l * prob.claim_vol_sq - cross)) + x_i * claim_slope
    return value, grad


def _hessian(prob: StateProblem, u: np.ndarray, x_i: float, w: np.ndarray) -> np.ndarray:
    gamma = prob.gamma
    pi_s, l = u[:-1], u[-1]
    S = pi_s.size
    H = np.empty((S + 1, S + 1))
    H[:S, :S] = x_i * gamma * (gamma - 1.0) * prob.cov
    diag_jump = np.zeros(S)
    active_w = w > 0.0
    if np.any(active_w):
        diag_jump[active_w] = gamma * (gamma - 1.0) * w[active_w] * (1.0 - pi_s[active_w]) ** (gamma - 2.0)
    H[np.arange(S), np.arange(S)] += diag_jump
    H[:S, S] = H[S, :S] = -x_i * gamma * (gamma - 1.0) * prob.rho
    claim_curv = prob.g**2 * prob.nu * (1.0 - l * prob.g) ** (gamma - 2.0) if prob.nu > 0.0 else 0.0
    H[S, S] = x_i * gamma * (gamma - 1.0) * (prob.claim_vol_sq + claim_curv)
    return H


def _kkt_residual(grad: np.ndarray, u: np.ndarray, lb: np.ndarray, ub: np.ndarray) -> np.ndarray:
    res = grad.copy()
    at_ub = u >= ub - 1e-14
    at_lb = u <= lb + 1e-14
    res[at_ub & (grad > 0)] = 0.0
    res[at_lb & (grad < 0)] = 0.0
    return res


def maximize_on_problem(
    prob: StateProblem,
    x_i: float,
    w: np.ndarray,
    start: np.ndarray | None = None,
) -> tuple[np.ndarray, float, float]:
    """Projected Newton ascent on the general-state objective.

    Returns (survivor fractions, liability ratio, value). ``start`` overrides
    the default interior starting point; the optimum is unique either way.
    """
    if not x_i > 0:
        raise ParameterError(f"current value factor must be positive, got {x_i}")
    S = prob.h_s.size
    g = prob.g

    # Upper bounds where a jump weight is positive carry infinite one-sided
    # slope, so the optimum is strictly interior there; those bounds are
    # padded and approached by a fraction-to-boundary rule instead of plain
    # projection (a projected step landing on the pad would stall Newton in
    # the near-singular curvature).
    barrier = np.empty(S + 1, dtype=bool)
    barrier[:S] = w > 0.0
    barrier[S] = prob.nu > 0.0
    ub = np.empty(S + 1)
    ub[:S] = np.where(barrier[:S], 1.0 - _BOUND_PAD, 1.0)
    ub[S] = (1.0 - _BOUND_PAD) / g if barrier[S] else 1.0 / g
    lb = np.full(S + 1, -np.inf)
    lb[S] = 0.0

    if start is None:
        l0 = (prob.premium_gap - g * prob.nu) / ((1.0 - prob.gamma) * prob.claim_vol_sq)
        u = np.zeros(S + 1)
        u[S] = min(0.5 / g, max(0.0, l0))
    else:
        u = np.clip(np.asarray(start, dtype=float), lb, ub)

    value, grad = _value_grad(prob, u, x_i, w)
    if not np.isfinite(value):
        raise NumericalError("non-finite objective at the starting point")

    for _ in range(MAX_ITER):
        res = _kkt_residual(grad, u, lb, ub)
        if float(np.linalg.norm(res)) <= GRAD_TOL * (1.0 + abs(value)):
            return u[:S].copy(), float(u[S]), value

        free = res != 0.0
        direction = np.zeros_like(u)
        if np.any(free):
            Hff = _hessian(prob, u, x_i, w)[np.ix_(free, free)]
            try:
                d_free = np.linalg.solve(Hff, -grad[free])
            except np.linalg.LinAlgError:
                d_free = np.linalg.lstsq(Hff, -grad[free], rcond=None)[0]
            direction[free] = d_free
        if not np.all(np.isfinite(direction)) or float(direction @ res) < 0.0:
            direction = res  # projected gradient fallback

        # Fraction-to-boundary: never close more than 90% of the remaining
        # distance to a bound with infinite slope in a single trial step.
        step = 1.0
        closing = barrier & (direction > 0)
        if np.any(closing):
            room = (ub[closing] - u[closing]) / direction[closing]
            step = min(1.0, float(np.min(0.9 * room)))
        noise = 16.0 * np.finfo(float).eps * (1.0 + abs(value))
        accepted = False
        for _ in range(60):
            u_try = np.clip(u + step * direction, lb, ub)
            v_try = objective(prob, u_try[:S], float(u_try[S]), x_i, w)
            predicted = float(grad @ (u_try - u))
            # Once predicted gains sink below float resolution of the value,
            # Armijo cannot measure progress; take the (contracting) Newton
            # step as long as the value does not measurably decrease.
            if np.isfinite(v_try) and (
                v_try >= value + 1e-4 * predicted
                or (predicted <= noise and v_try >= value - noise)
            ):
                u, value = u_try, v_try
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # No ascent at the smallest step: accept only if already stationary.
            if float(np.linalg.norm(res)) <= 10.0 * GRAD_TOL * (1.0 + abs(value)):
                return u[:S].copy(), float(u[S]), value
            raise NumericalError("line search failed before reaching stationarity")
        _, grad = _value_grad(prob, u, x_i, w)

    raise NumericalError(f"projected Newton did not converge within {MAX_ITER} iterations")


def maximize_hamiltonian(
    i: int,
    z: DefaultState,
    x_i: float,
    phi_next: Mapping[int, float],
    params: ModelParams,
    start: np.ndarray | None = None,
) -> tuple[PolicyPoint, float]:
    """Unique optimum of the general-state objective for regime ``i``, state ``z``.

    Args:
        i: regime, 0-based.
        z: default state with at least one survivor.
        x_i: current value factor for this regime, > 0.
        phi_next: value factor of the one-more-default neighbor ``z^j`` for
            every surviving stock j (1-based keys), each > 0.
        params: model coefficients.
        start: optional warm start ``[pi_survivors..., l]``.

    Returns:
        (PolicyPoint with full-length fractions, objective value at the optimum).
    """
    prob = state_problem(params, i, z)
    try:
        w = np.array([phi_next[j] for j in z.survivors], dtype=float)
    except KeyError as exc:
        raise ParameterError(f"phi_next missing surviving stock {exc.args[0]}") from None
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ParameterError("neighbor value factors must be finite and nonnegative")
    w = prob.h_s * w

    pi_s, l, value = maximize_on_problem(prob, x_i, w, start=start)
    pi_full = np.zeros(params.n)
    pi_full[prob.alive_idx] = pi_s
    return PolicyPoint(pi=pi_full, l=l), value
