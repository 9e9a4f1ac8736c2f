"""Parameterized weight and test-function generators used by the sweeps.

Power-like spikes are discretized by exact cell averages of |x - x0|^alpha
with the center snapped to a cell boundary; random weights are positive
multiplicative cascades refined level by level, so the same seed produces
coherent weights across different grid depths.
"""

from __future__ import annotations

import numpy as np

from .dyadics import GridSpec, StepFunction

__all__ = [
    "power_weight",
    "two_value_weight",
    "cascade_weight",
    "random_step",
    "coarsen",
    "weight_from_spec",
]

_MIN_CELL_AVERAGE = 1e-12


def power_weight(grid: GridSpec, alpha: float, center: float = 0.5) -> StepFunction:
    """Cell averages of |x - x0|^alpha in dimension one.

    The center is snapped to a cell boundary so every cell average is finite
    and positive; alpha must exceed -1 for integrability.
    """
    if grid.d != 1:
        raise ValueError("power weights are one-dimensional")
    if alpha <= -1.0:
        raise ValueError("alpha must exceed -1")
    M = grid.cells
    x0 = round(center * M) / M
    edges = np.arange(M + 1) / M

    def antideriv(u):
        return np.sign(u) * np.abs(u) ** (alpha + 1.0) / (alpha + 1.0)

    vals = (antideriv(edges[1:] - x0) - antideriv(edges[:-1] - x0)) * M
    if vals.min() <= _MIN_CELL_AVERAGE:
        raise ValueError("alpha too extreme: a cell average fell below 1e-12")
    return StepFunction(grid, vals)


def two_value_weight(grid: GridSpec, value: float, level: int) -> StepFunction:
    """Weight equal to `value` on the first level-`level` cube, one elsewhere."""
    if value <= 0.0:
        raise ValueError("weight value must be positive")
    if not 0 <= level <= grid.N:
        raise ValueError("level outside the grid")
    vals = np.ones(grid.cells)
    vals[grid.cube(level, (0,) * grid.d).cell_slice] = value
    return StepFunction(grid, vals)


def cascade_weight(grid: GridSpec, seed: int, volatility: float = 0.5) -> StepFunction:
    """Positive multiplicative cascade with mean-one child factors.

    Each refinement multiplies the children of every cube by factors
    1 + volatility * u with u recentered to mean zero and clipped away from
    zero, so positivity is unconditional.
    """
    if not 0.0 <= volatility < 1.0:
        raise ValueError("volatility must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    fold = 1 << grid.d
    vals = np.ones(1)
    for _ in range(grid.N):
        u = rng.standard_normal((vals.size, fold))
        u -= u.mean(axis=1, keepdims=True)
        scale = np.abs(u).max(axis=1, keepdims=True)
        scale[scale == 0.0] = 1.0
        factors = 1.0 + volatility * u / scale
        np.clip(factors, 0.05, None, out=factors)
        vals = (np.repeat(vals, fold).reshape(-1, fold) * factors).ravel()
    return StepFunction(grid, vals)


def random_step(grid: GridSpec, seed: int, spikes: int = 0) -> StepFunction:
    """Gaussian cell values with optional multiplicative spikes."""
    rng = np.random.default_rng(seed)
    vals = rng.standard_normal(grid.cells)
    for _ in range(spikes):
        vals[rng.integers(0, grid.cells)] *= 10.0
    return StepFunction(grid, vals)


def coarsen(f: StepFunction, N: int) -> StepFunction:
    """Cell averages of f on the depth-N coarsening of its grid."""
    if not 0 <= N <= f.grid.N:
        raise ValueError("coarse depth outside the grid")
    fold = 1 << (f.grid.d * (f.grid.N - N))
    vals = f.values.reshape(-1, fold).mean(axis=1)
    return StepFunction(GridSpec(f.grid.d, N, ()), vals)


def weight_from_spec(grid: GridSpec, spec: dict, seed: int | None = None) -> StepFunction:
    """Build a weight from a config-style description.

    Recognized kinds: constant {value}, two_value {value, level},
    power {alpha, center}, cascade {volatility, seed?}.
    """
    kind = spec.get("kind")
    if kind == "constant":
        value = float(spec.get("value", 1.0))
        if value <= 0:
            raise ValueError("constant weight must be positive")
        return StepFunction.constant(grid, value)
    if kind == "two_value":
        return two_value_weight(grid, float(spec["value"]), int(spec["level"]))
    if kind == "power":
        return power_weight(grid, float(spec["alpha"]), float(spec.get("center", 0.5)))
    if kind == "cascade":
        s = spec.get("seed", seed)
        if s is None:
            raise ValueError("cascade weights need a seed")
        return cascade_weight(grid, int(s), float(spec.get("volatility", 0.5)))
    raise ValueError(f"unknown weight kind: {kind!r}")
