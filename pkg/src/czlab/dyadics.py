"""Dyadic grids on the unit cube and step functions stored in Z-order.

The ambient domain is the half-open cube [0,1)^d subdivided down to a finest
level N, giving 2^(d*N) cells.  Cubes are addressed by (level, integer
coordinates); parent/child arithmetic is pure bit shifting, so no
floating-point endpoints appear anywhere.  Step-function values are kept in
Z-order (bit-interleaved linear index), which makes every dyadic cube a
contiguous slice of the value array.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GridSpec",
    "DyadicCube",
    "StepFunction",
    "GridMismatchError",
    "children",
    "ancestor",
    "average",
    "lp_norm",
    "rearrangement_value",
    "level_integrals",
    "level_averages",
    "repeat_to_cells",
    "require_weight",
]

# Hard cap on 2^(d*N): keeps every dense per-cell array comfortably in memory.
_MAX_CELL_BITS = 24


class GridMismatchError(ValueError):
    """A cube or function was combined with a grid it does not belong to."""


def _morton_encode(coords, d, level):
    """Interleave the low `level` bits of d coordinates into one index."""
    z = 0
    for b in range(level):
        for a in range(d):
            z |= ((coords[a] >> b) & 1) << (b * d + a)
    return z


def _morton_decode(z, d, level):
    coords = [0] * d
    for b in range(level):
        for a in range(d):
            coords[a] |= ((z >> (b * d + a)) & 1) << b
    return tuple(coords)


@dataclass(frozen=True)
class GridSpec:
    """Ambient dyadic grid: dimension d, finest level N, optional translation.

    The translation `shift` is a vector in [0,1)^d, applied identically at all
    levels with wrap-around on the torus, and must be a multiple of 2^-N per
    coordinate so the translated finest cells coincide with standard ones.
    """

    d: int
    N: int
    shift: tuple[float, ...] = ()

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("dimension must be a positive integer")
        if self.N < 0:
            raise ValueError("finest level must be non-negative")
        if self.d * self.N > _MAX_CELL_BITS:
            raise ValueError(
                f"grid with 2^{self.d * self.N} cells exceeds the supported size"
            )
        shift = tuple(self.shift) if self.shift else (0.0,) * self.d
        if len(shift) != self.d:
            raise ValueError("shift must have one component per dimension")
        snapped = []
        scale = 1 << self.N
        for s in shift:
            if not 0.0 <= s < 1.0:
                raise ValueError("shift components must lie in [0,1)")
            c = s * scale
            if abs(c - round(c)) > 1e-9:
                raise ValueError("shift components must be multiples of 2^-N")
            snapped.append(round(c) / scale)
        object.__setattr__(self, "shift", tuple(snapped))

    @property
    def cells(self) -> int:
        return 1 << (self.d * self.N)

    @property
    def cell_volume(self) -> float:
        return 2.0 ** (-self.d * self.N)

    @property
    def shift_cells(self) -> tuple[int, ...]:
        """Per-dimension translation measured in finest cells."""
        scale = 1 << self.N
        return tuple(int(round(s * scale)) for s in self.shift)

    def root(self) -> "DyadicCube":
        return DyadicCube(self, 0, (0,) * self.d)

    def cube(self, level: int, coords) -> "DyadicCube":
        return DyadicCube(self, level, tuple(int(c) for c in coords))

    def cube_from_zindex(self, level: int, z: int) -> "DyadicCube":
        return DyadicCube(self, level, _morton_decode(z, self.d, level))

    def cubes(self, level: int):
        """All cubes of one level, in Z-order."""
        for z in range(1 << (self.d * level)):
            yield self.cube_from_zindex(level, z)

    def all_cubes(self):
        """Every dyadic cube of the grid, coarsest level first."""
        for level in range(self.N + 1):
            yield from self.cubes(level)

    def cube_count(self) -> int:
        return sum(1 << (self.d * k) for k in range(self.N + 1))


@dataclass(frozen=True)
class DyadicCube:
    """A dyadic cube addressed by (level, integer coordinates).

    The cube occupies prod_a [coords[a]*2^-level, (coords[a]+1)*2^-level) in
    the grid's own frame; the grid shift places that frame on the torus.
    """

    grid: GridSpec
    level: int
    coords: tuple[int, ...]
    zindex: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0 <= self.level <= self.grid.N:
            raise ValueError(f"level {self.level} outside [0, {self.grid.N}]")
        if len(self.coords) != self.grid.d:
            raise ValueError("coordinate count must equal the dimension")
        top = 1 << self.level
        for c in self.coords:
            if not 0 <= c < top:
                raise ValueError(f"coordinate {c} outside [0, 2^{self.level})")
        object.__setattr__(
            self, "zindex", _morton_encode(self.coords, self.grid.d, self.level)
        )

    @property
    def side(self) -> float:
        return 2.0 ** (-self.level)

    @property
    def volume(self) -> float:
        return 2.0 ** (-self.grid.d * self.level)

    @property
    def cell_slice(self) -> slice:
        """Slice of the Z-ordered finest-cell array covered by this cube."""
        bits = self.grid.d * (self.grid.N - self.level)
        return slice(self.zindex << bits, (self.zindex + 1) << bits)

    @property
    def cell_count(self) -> int:
        return 1 << (self.grid.d * (self.grid.N - self.level))

    def bounds(self) -> list[tuple[float, float]]:
        """Per-axis [lo, hi) in the grid frame (shift not applied)."""
        s = self.side
        return [(c * s, (c + 1) * s) for c in self.coords]

    def contains(self, other: "DyadicCube") -> bool:
        if other.grid != self.grid:
            raise GridMismatchError("cubes belong to different grids")
        if other.level < self.level:
            return False
        t = other.level - self.level
        return all((oc >> t) == c for oc, c in zip(other.coords, self.coords))

    def parent(self) -> "DyadicCube":
        return ancestor(self, 1)

    def child(self, index: int) -> "DyadicCube":
        """Child number `index` in Z-order, 0 <= index < 2^d."""
        d = self.grid.d
        if not 0 <= index < (1 << d):
            raise ValueError("child index out of range")
        if self.level >= self.grid.N:
            raise ValueError("level overflow: cube is at the finest level")
        coords = tuple(2 * c + ((index >> a) & 1) for a, c in enumerate(self.coords))
        return DyadicCube(self.grid, self.level + 1, coords)


def children(Q: DyadicCube) -> list[DyadicCube]:
    """The 2^d subcubes of the next level that partition Q."""
    if Q.level >= Q.grid.N:
        raise ValueError("level overflow: cube is at the finest level")
    return [Q.child(i) for i in range(1 << Q.grid.d)]


def ancestor(Q: DyadicCube, t: int) -> DyadicCube:
    """The t-fold parent of Q (t = 0 returns Q itself)."""
    if t < 0:
        raise ValueError("ancestor order must be non-negative")
    if t > Q.level:
        raise ValueError("above root: cube has no ancestor that far up")
    if t == 0:
        return Q
    coords = tuple(c >> t for c in Q.coords)
    return DyadicCube(Q.grid, Q.level - t, coords)


class StepFunction:
    """Real-valued function piecewise constant on the finest cells of a grid.

    Values are stored in Z-order.  Instances are immutable; arithmetic
    returns new functions on the same grid.
    """

    __slots__ = ("grid", "_values", "_sums")

    def __init__(self, grid: GridSpec, values):
        arr = np.array(values, dtype=float)
        if arr.shape != (grid.cells,):
            raise ValueError(
                f"expected {grid.cells} cell values, got shape {arr.shape}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "_values", arr)
        object.__setattr__(self, "_sums", None)

    def __setattr__(self, name, value):
        raise AttributeError("StepFunction is immutable")

    @property
    def values(self) -> np.ndarray:
        return self._values

    @classmethod
    def constant(cls, grid: GridSpec, value: float) -> "StepFunction":
        return cls(grid, np.full(grid.cells, float(value)))

    @classmethod
    def indicator(cls, cube: DyadicCube) -> "StepFunction":
        v = np.zeros(cube.grid.cells)
        v[cube.cell_slice] = 1.0
        return cls(cube.grid, v)

    def with_values(self, values) -> "StepFunction":
        return StepFunction(self.grid, values)

    def integral(self, cube: DyadicCube | None = None) -> float:
        if cube is None:
            return float(self._values.sum() * self.grid.cell_volume)
        if cube.grid != self.grid:
            raise GridMismatchError("cube does not belong to the function's grid")
        return float(self._values[cube.cell_slice].sum() * self.grid.cell_volume)

    def __add__(self, other):
        if isinstance(other, StepFunction):
            self._check(other)
            return StepFunction(self.grid, self._values + other._values)
        return StepFunction(self.grid, self._values + float(other))

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, StepFunction):
            self._check(other)
            return StepFunction(self.grid, self._values - other._values)
        return StepFunction(self.grid, self._values - float(other))

    def __mul__(self, other):
        if isinstance(other, StepFunction):
            self._check(other)
            return StepFunction(self.grid, self._values * other._values)
        return StepFunction(self.grid, self._values * float(other))

    __rmul__ = __mul__

    def __neg__(self):
        return StepFunction(self.grid, -self._values)

    def __abs__(self):
        return StepFunction(self.grid, np.abs(self._values))

    def _check(self, other: "StepFunction"):
        if other.grid != self.grid:
            raise GridMismatchError("functions live on different grids")

    def to_json(self) -> str:
        return json.dumps(
            {
                "d": self.grid.d,
                "N": self.grid.N,
                "shift": list(self.grid.shift),
                "values": self._values.tolist(),
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "StepFunction":
        obj = json.loads(text)
        grid = GridSpec(int(obj["d"]), int(obj["N"]), tuple(obj.get("shift", ())))
        return cls(grid, obj["values"])

    def __repr__(self):
        return f"StepFunction(d={self.grid.d}, N={self.grid.N}, cells={self.grid.cells})"


def level_integrals(f: StepFunction) -> list[np.ndarray]:
    """Integrals of f over every cube, one Z-ordered array per level.

    Index k of the result holds 2^(d*k) entries, entry z being the integral
    of f over the level-k cube with Z-index z.  Cached on the function.
    """
    if f._sums is not None:
        return f._sums
    grid = f.grid
    fold = 1 << grid.d
    sums = [None] * (grid.N + 1)
    sums[grid.N] = f.values * grid.cell_volume
    for k in range(grid.N - 1, -1, -1):
        sums[k] = sums[k + 1].reshape(-1, fold).sum(axis=1)
    for arr in sums:
        arr.setflags(write=False)
    object.__setattr__(f, "_sums", sums)
    return sums


def level_averages(f: StepFunction) -> list[np.ndarray]:
    """Averages of f over every cube, one Z-ordered array per level."""
    sums = level_integrals(f)
    return [s * float(1 << (f.grid.d * k)) for k, s in enumerate(sums)]


def repeat_to_cells(grid: GridSpec, arr: np.ndarray, level: int) -> np.ndarray:
    """Expand a per-cube array at `level` to finest-cell resolution."""
    return np.repeat(arr, 1 << (grid.d * (grid.N - level)))


def average(f: StepFunction, Q: DyadicCube) -> float:
    """Mean value of f over the cube Q."""
    if Q.grid != f.grid:
        raise GridMismatchError("cube does not belong to the function's grid")
    return float(f.values[Q.cell_slice].mean())


def require_weight(w: StepFunction, name: str = "weight") -> StepFunction:
    if np.any(w.values <= 0.0):
        raise ValueError(f"{name} must be strictly positive everywhere")
    return w


def lp_norm(f: StepFunction, p: float, weight: StepFunction | None = None) -> float:
    """L^p norm of f with respect to `weight` (Lebesgue when omitted)."""
    if not (p >= 1.0 and math.isfinite(p)):
        raise ValueError("p must be a finite real >= 1")
    dens = 1.0
    if weight is not None:
        f._check(weight)
        require_weight(weight)
        dens = weight.values
    total = float(np.sum(np.abs(f.values) ** p * dens) * f.grid.cell_volume)
    return total ** (1.0 / p)


def rearrangement_value(f: StepFunction, t: float) -> float:
    """Non-increasing rearrangement of |f| evaluated at measure t.

    Right-continuous convention: the value is inf{ s >= 0 : |{|f| > s}| <= t }.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    vol = f.grid.cell_volume
    allowed = int(math.floor(t / vol + 1e-12))
    mags = np.sort(np.abs(f.values))[::-1]
    if allowed >= mags.size:
        return 0.0
    return float(mags[allowed])
