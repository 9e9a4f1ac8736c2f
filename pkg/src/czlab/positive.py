"""Positive dyadic operators, Sawyer testing constants, and type-L families.

The operator built from non-negative coefficients tau sends f to
sum_Q tau_Q (avg_Q f) 1_Q.  Its two-weight norm is characterized by a pair
of testing constants obtained by feeding the weight itself into the cube-
localized operator; type-L collections are cube families whose overlap
counting function has bounded exponential moments.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .dyadics import (
    DyadicCube,
    GridMismatchError,
    GridSpec,
    StepFunction,
    level_integrals,
    repeat_to_cells,
    require_weight,
)

__all__ = [
    "TauCoefficients",
    "CubeFamily",
    "TestingConstant",
    "apply_positive",
    "sawyer_testing",
    "strong_norm_bound",
    "lambda_constant",
    "type_l_apply",
    "LAMBDA_FLOOR",
]

# Lower end of the bisection bracket; returned when any positive constant works.
LAMBDA_FLOOR = 1e-9
_LAMBDA_BOUND = 2.0  # exponential-moment bound defining a type-L family
_LAMBDA_REL_TOL = 1e-6
_LAMBDA_MAX_ITER = 200


class TauCoefficients:
    """Non-negative coefficients tau_Q, finitely supported on a grid's cubes."""

    def __init__(self, grid: GridSpec, coefficients: dict[DyadicCube, float]):
        self.grid = grid
        table: dict[DyadicCube, float] = {}
        for Q, t in coefficients.items():
            if Q.grid != grid:
                raise GridMismatchError("coefficient cube from a different grid")
            t = float(t)
            if t < 0.0:
                raise ValueError("tau coefficients must be non-negative")
            if t != 0.0:
                table[Q] = t
        self.table = table
        self._per_level = None

    def per_level(self) -> list[np.ndarray]:
        """Dense per-level arrays of tau over all cubes, Z-ordered."""
        if self._per_level is None:
            arrs = [np.zeros(1 << (self.grid.d * k)) for k in range(self.grid.N + 1)]
            for Q, t in self.table.items():
                arrs[Q.level][Q.zindex] = t
            self._per_level = arrs
        return self._per_level

    @classmethod
    def indicator(cls, family: "CubeFamily") -> "TauCoefficients":
        return cls(family.grid, {Q: 1.0 for Q in family.cubes})

    def to_json(self) -> str:
        items = [
            {"cube": {"level": Q.level, "coords": list(Q.coords)}, "tau": t}
            for Q, t in sorted(
                self.table.items(), key=lambda kv: (kv[0].level, kv[0].zindex)
            )
        ]
        return json.dumps(items, separators=(",", ":"))

    @classmethod
    def from_json(cls, grid: GridSpec, text: str) -> "TauCoefficients":
        items = json.loads(text)
        return cls(
            grid,
            {
                grid.cube(it["cube"]["level"], it["cube"]["coords"]): it["tau"]
                for it in items
            },
        )


class CubeFamily:
    """A finite set of dyadic cubes, optionally labeled by generation."""

    def __init__(self, grid: GridSpec, cubes, generations: dict[DyadicCube, int] | None = None):
        self.grid = grid
        seen = []
        for Q in cubes:
            if Q.grid != grid:
                raise GridMismatchError("family cube from a different grid")
            seen.append(Q)
        self.cubes = tuple(sorted(set(seen), key=lambda Q: (Q.level, Q.zindex)))
        self.generations = dict(generations) if generations else {}

    def __len__(self):
        return len(self.cubes)

    def __iter__(self):
        return iter(self.cubes)

    def __contains__(self, Q):
        return Q in set(self.cubes)

    def membership_by_level(self) -> list[np.ndarray]:
        arrs = [np.zeros(1 << (self.grid.d * k)) for k in range(self.grid.N + 1)]
        for Q in self.cubes:
            arrs[Q.level][Q.zindex] = 1.0
        return arrs

    def subfamily(self, predicate) -> "CubeFamily":
        kept = [Q for Q in self.cubes if predicate(Q)]
        gens = {Q: g for Q, g in self.generations.items() if Q in set(kept)}
        return CubeFamily(self.grid, kept, gens)


def apply_positive(tau: TauCoefficients, mu: StepFunction, f: StepFunction) -> StepFunction:
    """sum_Q tau_Q * avg_Q(f mu) * 1_Q."""
    if mu.grid != tau.grid or f.grid != tau.grid:
        raise GridMismatchError("operator inputs must share the grid")
    prod = f * mu
    ints = level_integrals(prod)
    acc = np.zeros(tau.grid.cells)
    for k, tau_k in enumerate(tau.per_level()):
        if not tau_k.any():
            continue
        constants = tau_k * ints[k] * float(1 << (tau.grid.d * k))
        acc += repeat_to_cells(tau.grid, constants, k)
    return f.with_values(acc)


@dataclass(frozen=True)
class TestingConstant:
    """A Sawyer testing constant with the cube attaining the supremum."""

    value: float
    witness: DyadicCube


def _localized_suffix_sums(tau: TauCoefficients, w: StepFunction) -> list[np.ndarray]:
    """Cell arrays S_k(x) = sum over levels j >= k of tau_j(x) avg_j(w)(x).

    S_k restricted to a level-k cube R equals the localized sum over Q
    contained in R, because cubes through x at depth >= k are inside R.
    """
    grid = tau.grid
    ints = level_integrals(w)
    suffix = np.zeros(grid.cells)
    out = [None] * (grid.N + 1)
    for k in range(grid.N, -1, -1):
        tau_k = tau.per_level()[k]
        if tau_k.any():
            constants = tau_k * ints[k] * float(1 << (grid.d * k))
            suffix = suffix + repeat_to_cells(grid, constants, k)
        out[k] = suffix
    return out


def sawyer_testing(
    tau: TauCoefficients,
    w: StepFunction,
    sigma: StepFunction,
    p: float,
    testing_input: str = "weight",
    search_budget: int = 16,
    seed: int = 0,
) -> TestingConstant:
    """Dual testing constant with exponent p' = p/(p-1).

    Default mode feeds w into the R-localized operator:
    sup_R w(R)^(-1/p') || sum_{Q subset R} tau_Q avg_Q(w) 1_Q ||_{L^p'(sigma)}.
    testing_input="sup" replaces the fixed input by a budgeted search over
    normalized inputs (comparison mode, not the default).
    """
    require_weight(w)
    require_weight(sigma, "sigma")
    if not (1.0 < p < math.inf):
        raise ValueError("p must lie in (1, infinity)")
    grid = tau.grid
    if w.grid != grid or sigma.grid != grid:
        raise GridMismatchError("weights must live on the operator's grid")
    pprime = p / (p - 1.0)
    if testing_input == "sup":
        return _sawyer_testing_sup(tau, w, sigma, pprime, search_budget, seed)
    if testing_input != "weight":
        raise ValueError("testing_input must be 'weight' or 'sup'")
    suffix = _localized_suffix_sums(tau, w)
    wints = level_integrals(w)
    svals = sigma.values * grid.cell_volume
    best = -math.inf
    witness = None
    for k in range(grid.N + 1):
        powered = suffix[k] ** pprime * svals
        per_cube = powered.reshape(1 << (grid.d * k), -1).sum(axis=1)
        ratios = per_cube ** (1.0 / pprime) / wints[k] ** (1.0 / pprime)
        z = int(np.argmax(ratios))
        if float(ratios[z]) > best:
            best = float(ratios[z])
            witness = grid.cube_from_zindex(k, z)
    return TestingConstant(best, witness)


def _sawyer_testing_sup(tau, w, sigma, pprime, budget, seed):
    """Comparison reading: supremum over normalized inputs f of the localized
    operator, approximated by indicator starts plus seeded random inputs."""
    grid = tau.grid
    rng = np.random.default_rng(seed)
    wints = level_integrals(w)
    svals = sigma.values * grid.cell_volume

    def localized_value(fvals: np.ndarray) -> tuple[float, DyadicCube]:
        f = StepFunction(grid, fvals)
        norm = float((np.abs(fvals) ** pprime * svals).sum()) ** (1.0 / pprime)
        if norm == 0.0:
            return 0.0, grid.root()
        suffix = _localized_suffix_sums(tau, f)
        top = -math.inf
        top_Q = grid.root()
        for k in range(grid.N + 1):
            powered = np.abs(suffix[k]) ** pprime * svals
            per_cube = powered.reshape(1 << (grid.d * k), -1).sum(axis=1)
            ratios = per_cube ** (1.0 / pprime) / wints[k] ** (1.0 / pprime)
            z = int(np.argmax(ratios))
            if float(ratios[z]) > top:
                top = float(ratios[z])
                top_Q = grid.cube_from_zindex(k, z)
        return top / norm, top_Q

    best, witness = localized_value(np.ones(grid.cells))
    for Q in grid.all_cubes():
        v, cand = localized_value(StepFunction.indicator(Q).values)
        if v > best:
            best, witness = v, cand
    for _ in range(budget):
        v, cand = localized_value(np.abs(rng.standard_normal(grid.cells)))
        if v > best:
            best, witness = v, cand
    return TestingConstant(best, witness)


def strong_norm_bound(
    tau: TauCoefficients, w: StepFunction, sigma: StepFunction, p: float
) -> float:
    """Two-sided testing proxy for the L^p(sigma) -> L^p(w) norm.

    The sum of the dual testing constant and its swap under
    (w, sigma, p) -> (sigma, w, p').
    """
    if not (1.0 < p < math.inf):
        raise ValueError("p must lie in (1, infinity)")
    pprime = p / (p - 1.0)
    first = sawyer_testing(tau, w, sigma, p).value
    second = sawyer_testing(tau, sigma, w, pprime).value
    return first + second


def _overlap_histograms(family: CubeFamily):
    """Per-cube histograms of the strict overlap count inside each member.

    For Q in the family and x in Q, the count is the number of family cubes
    strictly contained in Q that contain x; returned as (counts, fractions)
    pairs keyed by cube.
    """
    grid = family.grid
    member = family.membership_by_level()
    suffix = np.zeros(grid.cells)
    suffix_at = [None] * (grid.N + 2)
    suffix_at[grid.N + 1] = suffix
    for k in range(grid.N, -1, -1):
        if member[k].any():
            suffix = suffix + repeat_to_cells(grid, member[k], k)
        suffix_at[k] = suffix
    out = {}
    for Q in family.cubes:
        u = np.asarray(np.rint(suffix_at[Q.level + 1][Q.cell_slice]), dtype=int)
        counts = np.bincount(u)
        nz = np.flatnonzero(counts)
        out[Q] = (nz, counts[nz] / u.size)
    return out


def lambda_constant(family: CubeFamily) -> float:
    """Smallest constant making the family type L.

    Bisection (1e-6 relative, 200 iterations) for the least L > 0 with
    sup_Q avg_Q exp(L^-1 * overlap count of strictly smaller members) <= 2.
    Families with no strict overlaps satisfy the bound for every L and get
    the bisection floor back.
    """
    if len(family) == 0:
        raise ValueError("family must be nonempty")
    hists = _overlap_histograms(family)

    def satisfied(lam: float) -> bool:
        inv = 1.0 / lam
        for counts, fracs in hists.values():
            # log-sum-exp guards the exponential moment for tiny lam
            expo = counts * inv + np.log(fracs)
            peak = float(np.max(expo))
            val = peak + math.log(float(np.exp(expo - peak).sum()))
            if val > math.log(_LAMBDA_BOUND) + 1e-15:
                return False
        return True

    lo = LAMBDA_FLOOR
    if satisfied(lo):
        return lo
    hi = 1.0
    while not satisfied(hi):
        hi *= 2.0
        if hi > 2.0**60:
            raise RuntimeError("lambda bisection failed to bracket")
    for _ in range(_LAMBDA_MAX_ITER):
        if hi - lo <= _LAMBDA_REL_TOL * hi:
            break
        mid = 0.5 * (lo + hi)
        if satisfied(mid):
            hi = mid
        else:
            lo = mid
    return hi


def type_l_apply(family: CubeFamily, mu: StepFunction, f: StepFunction) -> StepFunction:
    """sum over family cubes of 1_Q avg_Q(f mu); the indicator-tau operator."""
    return apply_positive(TauCoefficients.indicator(family), mu, f)
