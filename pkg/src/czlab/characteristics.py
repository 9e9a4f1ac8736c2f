"""Weight characteristics on dyadic grids.

Muckenhoupt-style A_p suprema, the Wilson/Fujii-form A_infty constant built
from the maximal function, the two-weight bracket, dual weights, and the
maximal functions themselves.  All suprema run over the dyadic cubes of the
ambient grid and report a witness cube, so every value can be rechecked
independently.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .dyadics import (
    DyadicCube,
    GridSpec,
    StepFunction,
    level_averages,
    level_integrals,
    repeat_to_cells,
    require_weight,
)

__all__ = [
    "CharacteristicReport",
    "dual_weight",
    "ap_characteristic",
    "ainfty_characteristic",
    "joint_ap",
    "maximal_function",
]


@dataclass(frozen=True)
class CharacteristicReport:
    """A supremum value together with the dyadic cube attaining it."""

    value: float
    witness: DyadicCube
    p: float

    def to_json(self) -> str:
        p = "inf" if math.isinf(self.p) else self.p
        return json.dumps(
            {
                "value": self.value,
                "witness": {"level": self.witness.level, "coords": list(self.witness.coords)},
                "p": p,
            },
            separators=(",", ":"),
        )


def dual_weight(w: StepFunction, p: float) -> StepFunction:
    """Pointwise sigma = w^(1-p') with p' the conjugate exponent of p."""
    if not (1.0 < p < math.inf):
        raise ValueError("p must lie in (1, infinity)")
    require_weight(w)
    pprime = p / (p - 1.0)
    return w.with_values(w.values ** (1.0 - pprime))


def _sup_over_cubes(grid: GridSpec, per_level) -> tuple[float, DyadicCube]:
    """Deterministic supremum: coarsest level first, ties to smallest Z-index."""
    best = -math.inf
    witness = None
    for level, arr in enumerate(per_level):
        z = int(np.argmax(arr))
        v = float(arr[z])
        if v > best:
            best = v
            witness = grid.cube_from_zindex(level, z)
    return best, witness


def ap_characteristic(w: StepFunction, p: float) -> CharacteristicReport:
    """sup over dyadic Q of (avg_Q w) * (avg_Q sigma)^(p-1), sigma = w^(1-p')."""
    require_weight(w)
    if not (1.0 < p < math.inf):
        raise ValueError("p must lie in (1, infinity)")
    sigma = dual_weight(w, p)
    aw = level_averages(w)
    asig = level_averages(sigma)
    per_level = [aw[k] * asig[k] ** (p - 1.0) for k in range(w.grid.N + 1)]
    value, witness = _sup_over_cubes(w.grid, per_level)
    return CharacteristicReport(value, witness, p)


def joint_ap(w: StepFunction, sigma: StepFunction, p: float) -> CharacteristicReport:
    """Two-weight bracket: sup over Q of (avg_Q w)^(1/p) * (avg_Q sigma)^(1/p')."""
    require_weight(w)
    require_weight(sigma, "sigma")
    w._check(sigma)
    if not (1.0 < p < math.inf):
        raise ValueError("p must lie in (1, infinity)")
    pprime = p / (p - 1.0)
    aw = level_averages(w)
    asig = level_averages(sigma)
    per_level = [
        aw[k] ** (1.0 / p) * asig[k] ** (1.0 / pprime) for k in range(w.grid.N + 1)
    ]
    value, witness = _sup_over_cubes(w.grid, per_level)
    return CharacteristicReport(value, witness, p)


def _dyadic_running_max(f: StepFunction) -> list[np.ndarray]:
    """For each level k, the cell array max_{j >= k} avg over the level-j cube.

    Entry k gives, at each finest cell x, the largest average of |f| over the
    dyadic cubes containing x that sit at depth k or deeper.
    """
    grid = f.grid
    avgs = level_averages(abs(f))
    out = [None] * (grid.N + 1)
    run = avgs[grid.N].copy()
    out[grid.N] = run.copy()
    for k in range(grid.N - 1, -1, -1):
        np.maximum(run, repeat_to_cells(grid, avgs[k], k), out=run)
        out[k] = run.copy()
    return out


def maximal_function(f: StepFunction, mode: str = "dyadic") -> StepFunction:
    """Hardy-Littlewood style maximal function of f.

    dyadic mode: at each cell, the largest average of |f| over the dyadic
    cubes containing it.  centered mode: the largest average of |f| over
    centered windows [x-t, x+t]^d clipped to the root cube, with t running
    through the finest-cell multiples plus the degenerate half-cell window
    (so the pointwise bound M f >= |f| holds in both modes).
    """
    if mode == "dyadic":
        return f.with_values(_dyadic_running_max(f)[0])
    if mode == "centered":
        return _centered_maximal(f)
    raise ValueError("mode must be 'dyadic' or 'centered'")


def _centered_maximal(f: StepFunction) -> StepFunction:
    grid = f.grid
    if grid.d == 1:
        M = grid.cells
        # prefix sums at half-cell resolution: window ends x +- t land on
        # half-cell nodes when x is a cell center and t a multiple of dx/2
        half = np.repeat(np.abs(f.values), 2) * (grid.cell_volume / 2.0)
        P = np.concatenate([[0.0], np.cumsum(half)])
        centers = 2 * np.arange(M) + 1
        best = np.abs(f.values).copy()
        nodes = 2 * M
        for j in range(2, nodes + 1, 2):  # t = j * dx/2, full-cell multiples
            lo = np.clip(centers - j, 0, nodes)
            hi = np.clip(centers + j, 0, nodes)
            best = np.maximum(best, (P[hi] - P[lo]) / (j * grid.cell_volume))
        return f.with_values(best)
    if grid.d == 2:
        return f.with_values(_centered_maximal_2d(f))
    raise NotImplementedError("centered maximal function implemented for d <= 2")


def _coord_raster(f: StepFunction) -> np.ndarray:
    """Reshape Z-ordered values into a coordinate raster (axis 0 = x0)."""
    grid = f.grid
    n = 1 << grid.N
    out = np.empty((n, n))
    zidx = np.arange(grid.cells)
    c0 = np.zeros(grid.cells, dtype=int)
    c1 = np.zeros(grid.cells, dtype=int)
    for b in range(grid.N):
        c0 |= ((zidx >> (2 * b)) & 1) << b
        c1 |= ((zidx >> (2 * b + 1)) & 1) << b
    out[c0, c1] = f.values
    return out


def _centered_maximal_2d(f: StepFunction) -> np.ndarray:
    grid = f.grid
    n = 1 << grid.N
    dx = 1.0 / n
    raster = np.abs(_coord_raster(f))
    half = np.repeat(np.repeat(raster, 2, axis=0), 2, axis=1) * (dx / 2.0) ** 2
    P = np.zeros((2 * n + 1, 2 * n + 1))
    P[1:, 1:] = half.cumsum(axis=0).cumsum(axis=1)
    i0 = 2 * np.arange(n) + 1
    best = raster.copy()
    for j in range(2, 2 * n + 1, 2):
        lo0 = np.clip(i0 - j, 0, 2 * n)
        hi0 = np.clip(i0 + j, 0, 2 * n)
        box = (
            P[np.ix_(hi0, hi0)]
            - P[np.ix_(lo0, hi0)]
            - P[np.ix_(hi0, lo0)]
            + P[np.ix_(lo0, lo0)]
        )
        best = np.maximum(best, box / (j * dx) ** 2)
    # scatter the raster back into Z-order
    zidx = np.arange(grid.cells)
    c0 = np.zeros(grid.cells, dtype=int)
    c1 = np.zeros(grid.cells, dtype=int)
    for b in range(grid.N):
        c0 |= ((zidx >> (2 * b)) & 1) << b
        c1 |= ((zidx >> (2 * b + 1)) & 1) << b
    return best[c0, c1]


def ainfty_characteristic(w: StepFunction, mode: str = "dyadic") -> CharacteristicReport:
    """sup over dyadic Q of w(Q)^-1 * integral_Q M(w 1_Q).

    In dyadic mode the inner maximal function is the dyadic one restricted to
    subcubes of Q, which makes the value exact; centered mode uses the
    centered-window operator applied to w 1_Q.
    """
    require_weight(w)
    grid = w.grid
    wsums = level_integrals(w)
    if mode == "dyadic":
        running = _dyadic_running_max(w)
        fold = 1 << grid.d
        per_level = []
        for k in range(grid.N + 1):
            contrib = running[k] * grid.cell_volume
            numer = contrib.reshape(1 << (grid.d * k), -1).sum(axis=1)
            per_level.append(numer / wsums[k])
        value, witness = _sup_over_cubes(grid, per_level)
        return CharacteristicReport(value, witness, math.inf)
    if mode == "centered":
        best = -math.inf
        witness = None
        for Q in grid.all_cubes():
            masked = np.zeros(grid.cells)
            sl = Q.cell_slice
            masked[sl] = w.values[sl]
            M = _centered_maximal(w.with_values(masked))
            ratio = float(M.values[sl].sum() * grid.cell_volume / wsums[Q.level][Q.zindex])
            if ratio > best:
                best = ratio
                witness = Q
        return CharacteristicReport(best, witness, math.inf)
    raise ValueError("mode must be 'dyadic' or 'centered'")
