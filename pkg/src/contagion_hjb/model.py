"""Market, credit and claim coefficients with validation and derived quantities.

Conventions used across the package:

* Regimes are 0-based inside the library and 1-based at every I/O boundary
  (config files, CSV output, CLI flags).
* Stocks are 1-based, matching the convention that ``flip(z, 0)`` is the
  identity; array columns for stock ``j`` live at index ``j - 1``.
* A default state is written as a bit string with stock 1 leftmost, so
  ``"01"`` means stock 2 has defaulted and stock 1 is alive.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Sequence

import numpy as np

MAX_STOCKS = 16
SIGMA_MIN_EIGENVALUE = 1e-12


class ConfigError(ValueError):
    """A config file is malformed or missing required entries."""


class ParameterError(ValueError):
    """A model coefficient violates one of the standing assumptions."""


class NumericalError(RuntimeError):
    """A numerical routine produced non-finite values or failed to converge."""


@dataclass(frozen=True)
class DefaultState:
    """Immutable n-bit default indicator; bit ``j-1`` set means stock j defaulted."""

    n: int
    mask: int = 0

    def __post_init__(self):
        if not 1 <= self.n <= MAX_STOCKS:
            raise ParameterError(f"stock count must lie in 1..{MAX_STOCKS}, got {self.n}")
        if not 0 <= self.mask < (1 << self.n):
            raise ParameterError(f"default mask {self.mask} out of range for n={self.n}")

    @classmethod
    def from_bits(cls, bits: str | Sequence[int]) -> "DefaultState":
        """Build from a bit string like ``"01"`` or a sequence like ``(0, 1)``."""
        vals = [int(b) for b in bits]
        if any(v not in (0, 1) for v in vals):
            raise ParameterError(f"default state bits must be 0/1, got {bits!r}")
        mask = 0
        for j, v in enumerate(vals, start=1):
            if v:
                mask |= 1 << (j - 1)
        return cls(n=len(vals), mask=mask)

    @property
    def bits(self) -> tuple[int, ...]:
        return tuple((self.mask >> (j - 1)) & 1 for j in range(1, self.n + 1))

    @property
    def label(self) -> str:
        return "".join(str(b) for b in self.bits)

    @property
    def n_defaulted(self) -> int:
        return bin(self.mask).count("1")

    @property
    def all_defaulted(self) -> bool:
        return self.mask == (1 << self.n) - 1

    @property
    def survivors(self) -> tuple[int, ...]:
        """1-based indices of stocks still alive."""
        return tuple(j for j in range(1, self.n + 1) if not (self.mask >> (j - 1)) & 1)

    @property
    def alive_idx(self) -> np.ndarray:
        """0-based column indices of surviving stocks, for array slicing."""
        return np.array([j - 1 for j in self.survivors], dtype=np.intp)

    def is_defaulted(self, j: int) -> bool:
        return bool((self.mask >> (j - 1)) & 1)

    def flip(self, j: int) -> "DefaultState":
        """Toggle the default bit of stock ``j``; ``j = 0`` returns the state unchanged."""
        if j == 0:
            return self
        if not 1 <= j <= self.n:
            raise ParameterError(f"stock index {j} out of range 1..{self.n}")
        return DefaultState(n=self.n, mask=self.mask ^ (1 << (j - 1)))

    def __str__(self) -> str:
        return self.label


def flip(z: DefaultState, j: int) -> DefaultState:
    """Functional form of :meth:`DefaultState.flip`."""
    return z.flip(j)


def all_states(n: int) -> list[DefaultState]:
    """Every default state of an n-stock portfolio, ordered by mask."""
    return [DefaultState(n=n, mask=mask) for mask in range(1 << n)]


def states_by_defaults_desc(n: int) -> list[list[DefaultState]]:
    """States grouped by number of defaults, most-defaulted group first."""
    groups: list[list[DefaultState]] = [[] for _ in range(n + 1)]
    for z in all_states(n):
        groups[z.n_defaulted].append(z)
    return groups[::-1]


@dataclass(frozen=True)
class ModelParams:
    """All model coefficients, with per-state tables stored densely.

    Shapes (m regimes, n stocks, d / d_bar Brownian dimensions, 2^n states):

    * ``Q``: (m, m) regime generator, per year.
    * ``r``: (m,) riskless rates; ``mu``: (m, n) stock drifts.
    * ``sigma``: (m, n, d) stock volatility loadings.
    * ``h``: (m, 2^n, n) default intensities h_j(i, z); entries for stocks
      already defaulted in z are stored but never consumed downstream.
    * ``nu``: (m, 2^n) claim arrival intensities; ``p``: (m, 2^n) premium rates.
    * ``c``: (m,) claim drifts; ``phi``: (m, d) and ``phi_bar``: (m, d_bar)
      claim volatility loadings; ``g``: (m,) claim jump sizes.
    * ``gamma``: relative risk aversion in (0, 1); ``T``: horizon in years.

    Arrays are frozen read-only on construction so instances can be shared
    across worker processes without defensive copies.
    """

    n: int
    m: int
    d: int
    d_bar: int
    gamma: float
    T: float
    Q: np.ndarray
    r: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    h: np.ndarray
    nu: np.ndarray
    p: np.ndarray
    c: np.ndarray
    phi: np.ndarray
    phi_bar: np.ndarray
    g: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, np.ndarray):
                arr = np.array(v, dtype=float)
                arr.setflags(write=False)
                object.__setattr__(self, f.name, arr)

    @property
    def n_states(self) -> int:
        return 1 << self.n

    def state(self, bits: str | Sequence[int]) -> DefaultState:
        z = DefaultState.from_bits(bits)
        if z.n != self.n:
            raise ParameterError(f"state {z.label!r} has {z.n} bits, model has n={self.n}")
        return z

    def replace(self, **changes) -> "ModelParams":
        from dataclasses import replace as _replace

        return _replace(self, **changes)


def _expected_shapes(p: ModelParams) -> dict[str, tuple[int, ...]]:
    s = p.n_states
    return {
        "Q": (p.m, p.m),
        "r": (p.m,),
        "mu": (p.m, p.n),
        "sigma": (p.m, p.n, p.d),
        "h": (p.m, s, p.n),
        "nu": (p.m, s),
        "p": (p.m, s),
        "c": (p.m,),
        "phi": (p.m, p.d),
        "phi_bar": (p.m, p.d_bar),
        "g": (p.m,),
    }


def validate(params: ModelParams) -> ModelParams:
    """Check every standing assumption; return ``params`` unchanged if all hold.

    Raises:
        ParameterError: naming the violated invariant and the offending
            (1-based) regime / stock / state indices.
    """
    p = params
    if p.n < 1:
        raise ParameterError("need at least one stock (n >= 1)")
    if p.n > MAX_STOCKS:
        raise ParameterError(
            f"n={p.n} exceeds the supported maximum of {MAX_STOCKS} stocks "
            "(the default-state space grows as 2^n)"
        )
    if p.m < 1:
        raise ParameterError("need at least one regime (m >= 1)")
    if p.d < 1 or p.d_bar < 1:
        raise ParameterError("Brownian dimensions d and d_bar must be >= 1")

    for name, shape in _expected_shapes(p).items():
        arr = getattr(p, name)
        if arr.shape != shape:
            raise ParameterError(f"{name} has shape {arr.shape}, expected {shape}")

    if not 0.0 < p.gamma < 1.0:
        raise ParameterError(f"gamma must lie in (0,1), got {p.gamma}")
    if not p.T > 0:
        raise ParameterError(f"horizon T must be positive, got {p.T}")

    scale = max(1.0, float(np.max(np.abs(p.Q))))
    for i in range(p.m):
        row = p.Q[i]
        if not np.all(np.isfinite(row)):
            raise ParameterError(f"generator row {i + 1} has non-finite entries")
        if abs(float(row.sum())) > 1e-10 * scale:
            raise ParameterError(f"generator row {i + 1} does not sum to 0 (got {row.sum()})")
        if row[i] > 0:
            raise ParameterError(f"generator row {i + 1} has positive diagonal {row[i]}")
        off = np.delete(row, i)
        if np.any(off < 0):
            raise ParameterError(f"generator row {i + 1} has a negative off-diagonal entry")

    for i in range(p.m):
        if not p.r[i] > 0:
            raise ParameterError(f"riskless rate r must be positive in regime {i + 1}, got {p.r[i]}")
        if not p.g[i] > 0:
            raise ParameterError(f"g must be positive in regime {i + 1}, got {p.g[i]}")
        cov = p.sigma[i] @ p.sigma[i].T
        min_eig = float(np.linalg.eigvalsh(cov).min())
        if not min_eig > SIGMA_MIN_EIGENVALUE:
            raise ParameterError(
                f"sigma(i)sigma(i)^T must be positive definite in regime {i + 1}; "
                f"smallest eigenvalue {min_eig:.3e}"
            )
        if not np.linalg.norm(p.phi[i]) > 0:
            raise ParameterError(f"phi must be nonzero in regime {i + 1}")
        if not np.linalg.norm(p.phi_bar[i]) > 0:
            raise ParameterError(f"phi_bar must be nonzero in regime {i + 1}")
        if not np.all(np.isfinite(p.mu[i])):
            raise ParameterError(f"mu has non-finite entries in regime {i + 1}")
        if not np.isfinite(p.c[i]):
            raise ParameterError(f"c is non-finite in regime {i + 1}")

    for z in all_states(p.n):
        for i in range(p.m):
            nu_iz = p.nu[i, z.mask]
            if np.isnan(nu_iz):
                raise ParameterError(f"missing claim intensity nu for state '{z.label}' (regime {i + 1})")
            if not nu_iz > 0:
                raise ParameterError(
                    f"claim intensity nu must be positive for state '{z.label}' "
                    f"(regime {i + 1}), got {nu_iz}"
                )
            if not np.isfinite(p.p[i, z.mask]):
                raise ParameterError(f"missing premium rate p for state '{z.label}' (regime {i + 1})")
            for j in z.survivors:
                h_val = p.h[i, z.mask, j - 1]
                if np.isnan(h_val):
                    raise ParameterError(
                        f"missing default intensity h for stock {j} at state '{z.label}' (regime {i + 1})"
                    )
                if not h_val > 0:
                    raise ParameterError(
                        f"default intensity h must be positive for stock {j} at state "
                        f"'{z.label}' (regime {i + 1}), got {h_val}"
                    )
    return params


def theta(params: ModelParams, i: int, z: DefaultState) -> np.ndarray:
    """Per-stock excess return mu_j(i) - r(i) + h_j(i, z).

    The full n-vector is returned; components for stocks already defaulted in
    ``z`` carry whatever intensity is stored and are masked out by every
    consumer (their portfolio fractions are pinned to zero).
    """
    if not 0 <= i < params.m:
        raise ParameterError(f"regime index {i} out of range 0..{params.m - 1}")
    return params.mu[i] - params.r[i] + params.h[i, z.mask]
