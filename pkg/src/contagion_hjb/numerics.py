"""Dense matrix exponential and fixed-step RK4 integration for small systems."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import NumericalError

_MAX_TAYLOR_TERMS = 64


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_0 = 0, ..., t_N = T."""

    T: float
    N: int

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"grid needs at least one step, got N={self.N}")
        if not self.T > 0:
            raise ValueError(f"horizon must be positive, got T={self.T}")

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.N + 1)


def expm(A: np.ndarray, s: float = 1.0) -> np.ndarray:
    """e^{A s} by scaling-and-squaring with a stagnation-truncated Taylor series.

    Relative accuracy is at machine-precision level for well-conditioned
    inputs. Raises :class:`NumericalError` if entries overflow.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)) or not np.isfinite(s):
        raise NumericalError("expm input contains non-finite entries")
    if s < 0:
        raise ValueError(f"expm scale must be >= 0, got {s}")

    m = A.shape[0]
    B = A * s
    norm = float(np.linalg.norm(B, ord=1))
    n_squarings = max(0, int(np.ceil(np.log2(norm)))) if norm > 1.0 else 0
    B = B / (2.0 ** n_squarings)

    with np.errstate(over="ignore", invalid="ignore"):
        result = np.eye(m)
        term = np.eye(m)
        for k in range(1, _MAX_TAYLOR_TERMS + 1):
            term = term @ B / k
            result = result + term
            if float(np.abs(term).max()) <= np.finfo(float).eps * float(np.abs(result).max()):
                break

        for _ in range(n_squarings):
            result = result @ result

    if not np.all(np.isfinite(result)):
        raise NumericalError("expm overflowed to non-finite entries")
    return result


def check_type_K(A: np.ndarray) -> bool:
    """True iff every off-diagonal entry of ``A`` is nonnegative.

    A linear field x -> Ax then never lowers any component's derivative when
    other components rise, which is what makes comparison arguments work.
    """
    A = np.asarray(A, dtype=float)
    off = A - np.diag(np.diag(A))
    return bool(np.all(off >= 0.0))


def _rk4_march(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    start_value: np.ndarray,
    times: np.ndarray,
) -> np.ndarray:
    """Classical RK4 along ``times`` (monotone in either direction)."""
    y = np.array(start_value, dtype=float)
    out = np.empty((len(times), y.size))
    out[0] = y

    def eval_rhs(t: float, x: np.ndarray) -> np.ndarray:
        f = np.asarray(rhs(t, x), dtype=float)
        if not np.all(np.isfinite(f)):
            bad = int(np.flatnonzero(~np.isfinite(f))[0])
            raise NumericalError(f"non-finite rhs at t={t:.6g}, component {bad}")
        return f

    for k in range(len(times) - 1):
        t0, t1 = times[k], times[k + 1]
        h = t1 - t0
        k1 = eval_rhs(t0, y)
        k2 = eval_rhs(t0 + 0.5 * h, y + 0.5 * h * k1)
        k3 = eval_rhs(t0 + 0.5 * h, y + 0.5 * h * k2)
        k4 = eval_rhs(t1, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[k + 1] = y
    return out


def integrate_backward(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    terminal: np.ndarray,
    grid: TimeGrid,
) -> np.ndarray:
    """Integrate dx/dt = rhs(t, x) from t_N = T back to t_0 = 0.

    Returns the trajectory at every grid node, shape (N+1, len(terminal)),
    row k holding the value at t_k. Deterministic for fixed inputs.
    """
    times = grid.times
    marched = _rk4_march(rhs, terminal, times[::-1])
    return marched[::-1].copy()


def integrate_forward(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    initial: np.ndarray,
    grid: TimeGrid,
) -> np.ndarray:
    """Integrate dx/dt = rhs(t, x) from t_0 = 0 up to t_N = T."""
    return _rk4_march(rhs, initial, grid.times)
