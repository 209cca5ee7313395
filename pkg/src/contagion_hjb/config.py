"""TOML config parsing into :class:`~contagion_hjb.model.ModelParams`.

The schema is documented in the README. Per-state tables are keyed by default
state bit strings (stock 1 leftmost) and per-stock sub-keys; regime arrays are
ordered regime 1, 2, ... Missing entries for surviving stocks are loaded as
NaN so that :func:`~contagion_hjb.model.validate` can name them; entries for
already-defaulted stocks default to 0 and are never consumed.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .model import ConfigError, DefaultState, ModelParams, all_states


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing key '{key}' in [{where}]")
    return table[key]


def _as_float_array(value, shape: tuple[int, ...], where: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where} is not a numeric array: {exc}") from None
    if arr.shape != shape:
        raise ConfigError(f"{where} has shape {arr.shape}, expected {shape}")
    return arr


def _parse_state_key(key: str, n: int, where: str) -> DefaultState:
    if len(key) != n or any(ch not in "01" for ch in key):
        raise ConfigError(f"{where} has a bad default-state key '{key}' (want {n} bits of 0/1)")
    return DefaultState.from_bits(key)


def load_params(path: str | Path) -> ModelParams:
    """Load a model config file. Raises :class:`ConfigError` on schema problems."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None

    model = raw.get("model")
    if model is None:
        raise ConfigError("missing [model] section")
    n = int(_require(model, "n", "model"))
    m = int(_require(model, "m", "model"))
    d = int(_require(model, "d", "model"))
    d_bar = int(_require(model, "d_bar", "model"))
    gamma = float(_require(model, "gamma", "model"))
    horizon = float(_require(model, "T", "model"))
    if n < 1 or m < 1 or d < 1 or d_bar < 1:
        raise ConfigError("[model] n, m, d, d_bar must all be >= 1")
    n_states = 1 << n

    market = raw.get("market")
    if market is None:
        raise ConfigError("missing [market] section")
    Q = _as_float_array(_require(market, "Q", "market"), (m, m), "market.Q")
    r = _as_float_array(_require(market, "r", "market"), (m,), "market.r")
    mu = _as_float_array(_require(market, "mu", "market"), (m, n), "market.mu")
    sigma = _as_float_array(_require(market, "sigma", "market"), (m, n, d), "market.sigma")

    claims = raw.get("claims")
    if claims is None:
        raise ConfigError("missing [claims] section")
    c = _as_float_array(_require(claims, "c", "claims"), (m,), "claims.c")
    phi = _as_float_array(_require(claims, "phi", "claims"), (m, d), "claims.phi")
    phi_bar = _as_float_array(_require(claims, "phi_bar", "claims"), (m, d_bar), "claims.phi_bar")
    g = _as_float_array(_require(claims, "g", "claims"), (m,), "claims.g")

    # p is either one scalar per regime (broadcast over default states) or a
    # per-state table of per-regime lists.
    p_raw = _require(claims, "p", "claims")
    p = np.full((m, n_states), np.nan)
    if isinstance(p_raw, dict):
        for key, vals in p_raw.items():
            z = _parse_state_key(key, n, "claims.p")
            p[:, z.mask] = _as_float_array(vals, (m,), f"claims.p['{key}']")
    else:
        p[:, :] = _as_float_array(p_raw, (m,), "claims.p")[:, None]

    intens = raw.get("intensities")
    if intens is None:
        raise ConfigError("missing [intensities] section")

    h_tables = intens.get("default")
    if h_tables is None:
        raise ConfigError("missing [intensities.default] section")
    h = np.full((m, n_states, n), np.nan)
    for key, per_stock in h_tables.items():
        z = _parse_state_key(key, n, "intensities.default")
        if not isinstance(per_stock, dict):
            raise ConfigError(f"intensities.default['{key}'] must map stock index to per-regime list")
        for stock_key, vals in per_stock.items():
            try:
                j = int(stock_key)
            except ValueError:
                raise ConfigError(
                    f"intensities.default['{key}'] has a bad stock key '{stock_key}'"
                ) from None
            if not 1 <= j <= n:
                raise ConfigError(f"intensities.default['{key}'] stock {j} out of range 1..{n}")
            h[:, z.mask, j - 1] = _as_float_array(
                vals, (m,), f"intensities.default['{key}'][{j}]"
            )
    for z in all_states(n):
        for j in range(1, n + 1):
            if z.is_defaulted(j) and np.isnan(h[0, z.mask, j - 1]):
                h[:, z.mask, j - 1] = 0.0  # defaulted entries are inert

    nu_table = intens.get("claim")
    if nu_table is None:
        raise ConfigError("missing [intensities.claim] section")
    nu = np.full((m, n_states), np.nan)
    for key, vals in nu_table.items():
        z = _parse_state_key(key, n, "intensities.claim")
        nu[:, z.mask] = _as_float_array(vals, (m,), f"intensities.claim['{key}']")

    return ModelParams(
        n=n, m=m, d=d, d_bar=d_bar, gamma=gamma, T=horizon,
        Q=Q, r=r, mu=mu, sigma=sigma, h=h, nu=nu, p=p, c=c,
        phi=phi, phi_bar=phi_bar, g=g,
    )


def data_path(name: str) -> Path:
    """Path of a bundled data file (configs and sweep specs shipped with the package)."""
    from importlib.resources import files

    return Path(str(files("contagion_hjb").joinpath("data", name)))
