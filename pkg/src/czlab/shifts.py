"""Haar functions, Haar shift operators, maximal truncations, and the
representation of the Hilbert transform as an average over translated grids.

A shift of parameters (m, n) carries, for each cube Q, coefficient pairs
indexed by subcubes Q' (depth m) and R' (depth n) of Q: an input Haar
function on R' and an output Haar function on Q', jointly normalized so the
product of their sup norms is at most one.  That normalization makes the
induced per-cube kernel bounded by one as well, since at any point pair
(x, y) exactly one coefficient pair is active.
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
)

__all__ = [
    "HaarFunction",
    "HaarShift",
    "GridEnsemble",
    "HilbertAverageResult",
    "build_petermichl",
    "build_random_shift",
    "build_paraproduct",
    "apply_shift",
    "maximal_truncation",
    "hilbert_direct",
    "hilbert_truncated",
    "hilbert_maximal",
    "hilbert_average",
]

_NORMALIZATION_TOL = 1e-12


def _exact_zero_sum(vals: np.ndarray) -> np.ndarray:
    """Recenter so the entries sum to exactly zero in floating point."""
    vals = vals - vals.mean()
    vals[-1] -= vals.sum()
    return vals


@dataclass(frozen=True)
class HaarFunction:
    """Function supported on a cube and constant on its children.

    `child_values` lists the constant on each child in Z-order.  Cancellative
    means orthogonal to constants, i.e. the child values sum to zero.
    """

    cube: DyadicCube
    child_values: tuple[float, ...]
    cancellative: bool

    def __post_init__(self):
        d = self.cube.grid.d
        if len(self.child_values) != (1 << d):
            raise ValueError("need one value per child")
        if self.cube.level >= self.cube.grid.N:
            raise ValueError("Haar function needs a cube with children")
        if self.cancellative:
            total = abs(sum(self.child_values))
            scale = max((abs(v) for v in self.child_values), default=0.0)
            if total > 1e-9 * max(scale, 1.0):
                raise ValueError("cancellative Haar function must sum to zero")

    @property
    def sup_norm(self) -> float:
        return max(abs(v) for v in self.child_values)

    def cell_values(self) -> np.ndarray:
        """Values on the finest cells of the supporting cube."""
        per_child = self.cube.cell_count >> self.cube.grid.d
        return np.repeat(np.asarray(self.child_values, dtype=float), per_child)

    def value_at_cell(self, cell_z: int) -> float:
        """Value at the finest cell with Z-index `cell_z` (0 outside)."""
        sl = self.cube.cell_slice
        if not (sl.start <= cell_z < sl.stop):
            return 0.0
        per_child = self.cube.cell_count >> self.cube.grid.d
        return self.child_values[(cell_z - sl.start) // per_child]


class HaarShift:
    """Haar shift operator of parameters (m, n) with per-cube coefficient pairs.

    entries maps each participating cube Q to a list of (h_in, h_out) pairs,
    h_in supported on a depth-n subcube R' of Q and h_out on a depth-m
    subcube Q'.  Complexity is max(m, n).
    """

    def __init__(self, grid: GridSpec, m: int, n: int, entries, cancellative: bool):
        if m < 0 or n < 0:
            raise ValueError("shift parameters must be non-negative")
        self.grid = grid
        self.m = m
        self.n = n
        self.cancellative = bool(cancellative)
        self.entries: dict[DyadicCube, list[tuple[HaarFunction, HaarFunction]]] = {}
        for Q, pairs in entries.items():
            kept = []
            for h_in, h_out in pairs:
                if h_in.cube.level != Q.level + n or not Q.contains(h_in.cube):
                    raise ValueError("input Haar function must sit at depth n inside Q")
                if h_out.cube.level != Q.level + m or not Q.contains(h_out.cube):
                    raise ValueError("output Haar function must sit at depth m inside Q")
                if h_in.sup_norm * h_out.sup_norm > 1.0 + _NORMALIZATION_TOL:
                    raise ValueError("joint normalization violated: |h_in| |h_out| > 1")
                kept.append((h_in, h_out))
            if kept:
                self.entries[Q] = kept
        self._packed = None

    @property
    def complexity(self) -> int:
        return max(self.m, self.n)

    def normalization_audit(self) -> float:
        """Largest sup-norm product over all coefficient pairs."""
        worst = 0.0
        for pairs in self.entries.values():
            for h_in, h_out in pairs:
                worst = max(worst, h_in.sup_norm * h_out.sup_norm)
        return worst

    # -- fast application -------------------------------------------------

    def _pack(self):
        """Group coefficients by the level of Q into flat index/value arrays."""
        if self._packed is not None:
            return self._packed
        d = self.grid.d
        fold = 1 << d
        by_level: dict[int, dict[str, list]] = {}
        for Q, pairs in sorted(
            self.entries.items(), key=lambda item: (item[0].level, item[0].zindex)
        ):
            rec = by_level.setdefault(
                Q.level, {"in_base": [], "out_base": [], "h_in": [], "h_out": []}
            )
            for h_in, h_out in pairs:
                rec["in_base"].append(h_in.cube.zindex * fold)
                rec["out_base"].append(h_out.cube.zindex * fold)
                rec["h_in"].append(h_in.child_values)
                rec["h_out"].append(h_out.child_values)
        packed = {}
        offsets = np.arange(fold)
        for level, rec in by_level.items():
            packed[level] = {
                "in_idx": np.asarray(rec["in_base"], dtype=int)[:, None] + offsets,
                "out_idx": np.asarray(rec["out_base"], dtype=int)[:, None] + offsets,
                "h_in": np.asarray(rec["h_in"], dtype=float),
                "h_out": np.asarray(rec["h_out"], dtype=float),
            }
        self._packed = packed
        return packed

    def _level_outputs(self, f: StepFunction):
        """Per-Q-level contributions as (output_level, per-cube constants)."""
        ints = level_integrals(f)
        packed = self._pack()
        d = self.grid.d
        out = []
        for level in sorted(packed):
            rec = packed[level]
            coef = (rec["h_in"] * ints[level + self.n + 1][rec["in_idx"]]).sum(axis=1)
            coef *= float(1 << (d * level))  # the 1/|Q| factor
            out_level = level + self.m + 1
            size = 1 << (d * out_level)
            contrib = np.bincount(
                rec["out_idx"].ravel(),
                weights=(coef[:, None] * rec["h_out"]).ravel(),
                minlength=size,
            )
            out.append((level, out_level, contrib))
        return out

    def apply(self, f: StepFunction) -> StepFunction:
        if f.grid != self.grid:
            raise GridMismatchError("function does not live on the shift's grid")
        acc = np.zeros(self.grid.cells)
        for _, out_level, contrib in self._level_outputs(f):
            acc += repeat_to_cells(self.grid, contrib, out_level)
        return f.with_values(acc)

    def truncation(self, f: StepFunction) -> StepFunction:
        """Pointwise sup over dyadic cutoffs of the coarse partial sums.

        One coarse-to-fine pass: cubes are added level by level and a running
        pointwise max of |partial sum| is kept; the cutoff grid is
        eps in {2^-k : 0 <= k <= N}.
        """
        if f.grid != self.grid:
            raise GridMismatchError("function does not live on the shift's grid")
        outputs = {}
        for level, out_level, contrib in self._level_outputs(f):
            outputs[level] = (out_level, contrib)
        acc = np.zeros(self.grid.cells)
        best = np.zeros(self.grid.cells)
        for level in range(self.grid.N + 1):
            if level in outputs:
                out_level, contrib = outputs[level]
                acc = acc + repeat_to_cells(self.grid, contrib, out_level)
            np.maximum(best, np.abs(acc), out=best)
        return f.with_values(best)

    def adjoint(self) -> "HaarShift":
        """Transpose with respect to the unweighted L^2 pairing."""
        entries = {
            Q: [(h_out, h_in) for (h_in, h_out) in pairs]
            for Q, pairs in self.entries.items()
        }
        return HaarShift(self.grid, self.n, self.m, entries, self.cancellative)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> str:
        items = []
        for Q, pairs in sorted(
            self.entries.items(), key=lambda item: (item[0].level, item[0].zindex)
        ):
            items.append(
                {
                    "cube": {"level": Q.level, "coords": list(Q.coords)},
                    "pairs": [
                        {
                            "rprime": {
                                "level": h_in.cube.level,
                                "coords": list(h_in.cube.coords),
                            },
                            "qprime": {
                                "level": h_out.cube.level,
                                "coords": list(h_out.cube.coords),
                            },
                            "h_vals": list(h_in.child_values),
                            "g_vals": list(h_out.child_values),
                        }
                        for h_in, h_out in pairs
                    ],
                }
            )
        return json.dumps(
            {
                "m": self.m,
                "n": self.n,
                "cancellative": self.cancellative,
                "d": self.grid.d,
                "N": self.grid.N,
                "shift": list(self.grid.shift),
                "entries": items,
            },
            separators=(",", ":"),
        )

    @classmethod
    def from_json(cls, text: str) -> "HaarShift":
        obj = json.loads(text)
        grid = GridSpec(int(obj["d"]), int(obj["N"]), tuple(obj.get("shift", ())))
        entries = {}
        for item in obj["entries"]:
            Q = grid.cube(item["cube"]["level"], item["cube"]["coords"])
            pairs = []
            for rec in item["pairs"]:
                rp = grid.cube(rec["rprime"]["level"], rec["rprime"]["coords"])
                qp = grid.cube(rec["qprime"]["level"], rec["qprime"]["coords"])
                h_in = HaarFunction(
                    rp, tuple(rec["h_vals"]), abs(sum(rec["h_vals"])) < 1e-9
                )
                h_out = HaarFunction(
                    qp, tuple(rec["g_vals"]), abs(sum(rec["g_vals"])) < 1e-9
                )
                pairs.append((h_in, h_out))
            entries[Q] = pairs
        return cls(grid, int(obj["m"]), int(obj["n"]), entries, bool(obj["cancellative"]))


def apply_shift(S: HaarShift, f: StepFunction) -> StepFunction:
    """Evaluate the shift on a step function."""
    return S.apply(f)


def maximal_truncation(S: HaarShift, f: StepFunction) -> StepFunction:
    """Pointwise maximal truncation of the shift over dyadic cutoffs."""
    return S.truncation(f)


# -- constructors ---------------------------------------------------------


def build_petermichl(grid: GridSpec) -> HaarShift:
    """The classical complexity-one shift in dimension one.

    Sends the (sup-normalized) Haar function of each interval to the
    difference of its children's Haar functions; written as an (m, n) = (1, 0)
    shift this meets the joint normalization with equality.
    """
    if grid.d != 1:
        raise ValueError("the Petermichl shift is one-dimensional")
    entries = {}
    for level in range(0, grid.N - 1):
        for Q in grid.cubes(level):
            left, right = Q.child(0), Q.child(1)
            u_Q = HaarFunction(Q, (1.0, -1.0), True)
            pairs = [
                (u_Q, HaarFunction(left, (1.0, -1.0), True)),
                (u_Q, HaarFunction(right, (-1.0, 1.0), True)),
            ]
            entries[Q] = pairs
    return HaarShift(grid, 1, 0, entries, True)


def build_random_shift(
    m: int,
    n: int,
    seed: int,
    grid: GridSpec,
    cancellative: bool = True,
) -> HaarShift:
    """Reproducible pseudo-random shift of parameters (m, n).

    Every admissible (Q', R') pair receives Gaussian child values, recentered
    when cancellative, then rescaled so the joint normalization holds with
    equality wherever the pair is nonzero.
    """
    if m < 0 or n < 0:
        raise ValueError("shift parameters must be non-negative")
    if m + n > grid.N:
        raise ValueError("shift parameters exceed the grid depth")
    top = grid.N - 1 - max(m, n)
    rng = np.random.default_rng(seed)
    fold = 1 << grid.d
    entries = {}
    for level in range(0, top + 1):
        for Q in grid.cubes(level):
            pairs = []
            for qz in range(Q.zindex << (grid.d * m), (Q.zindex + 1) << (grid.d * m)):
                qprime = grid.cube_from_zindex(level + m, qz)
                for rz in range(
                    Q.zindex << (grid.d * n), (Q.zindex + 1) << (grid.d * n)
                ):
                    rprime = grid.cube_from_zindex(level + n, rz)
                    vin = rng.standard_normal(fold)
                    vout = rng.standard_normal(fold)
                    if cancellative:
                        vin = _exact_zero_sum(vin)
                        vout = _exact_zero_sum(vout)
                    a = np.max(np.abs(vin))
                    b = np.max(np.abs(vout))
                    if a == 0.0 or b == 0.0:
                        continue
                    pairs.append(
                        (
                            HaarFunction(rprime, tuple(vin / a), cancellative),
                            HaarFunction(qprime, tuple(vout / b), cancellative),
                        )
                    )
            if pairs:
                entries[Q] = pairs
    return HaarShift(grid, m, n, entries, cancellative)


def _alternating_pattern(d: int) -> np.ndarray:
    """+1/-1 by child-index parity; sums to zero for every d."""
    idx = np.arange(1 << d)
    bits = np.zeros(1 << d, dtype=int)
    for a in range(d):
        bits ^= (idx >> a) & 1
    return np.where(bits == 0, 1.0, -1.0)


def build_paraproduct(a: dict[DyadicCube, float], grid: GridSpec) -> HaarShift:
    """Generalized type-(0,0) shift f -> sum_Q a_Q (avg_Q f) h_Q.

    The input side is the (generalized) indicator of Q; the output is a
    cancellative Haar function scaled by a_Q |Q|^(-1/2), so the coefficient
    bound |a_Q| <= sqrt(|Q|) is exactly the joint normalization.
    """
    fold = 1 << grid.d
    pattern = _alternating_pattern(grid.d)
    entries = {}
    for Q, coeff in a.items():
        if Q.grid != grid:
            raise GridMismatchError("coefficient cube from a different grid")
        if Q.level >= grid.N:
            raise ValueError("paraproduct coefficients need cubes with children")
        bound = math.sqrt(Q.volume)
        if abs(coeff) > bound * (1.0 + 1e-12):
            raise ValueError(
                f"coefficient {coeff} violates |a_Q| <= sqrt(|Q|) = {bound}"
            )
        if coeff == 0.0:
            continue
        ones = HaarFunction(Q, (1.0,) * fold, False)
        h_out = HaarFunction(
            Q, tuple(coeff / bound * pattern), True
        )
        entries.setdefault(Q, []).append((ones, h_out))
    return HaarShift(grid, 0, 0, entries, False)


# -- discretized Hilbert transform ----------------------------------------


def _hilbert_kernel_taps(M: int, eps: float | None) -> np.ndarray:
    """Convolution taps c[k] = 1/k for offsets with |k|*dx > eps (p.v. drops 0)."""
    taps = np.zeros(2 * M - 1)
    ks = np.arange(-(M - 1), M)
    nz = ks != 0
    if eps is not None:
        nz &= np.abs(ks) / M > eps
    taps[nz] = 1.0 / ks[nz]
    return taps


def _hilbert_convolve(values: np.ndarray, taps: np.ndarray) -> np.ndarray:
    # taps[m] holds 1/k at offset k = m - (M-1), so position i of the full
    # convolution at index i + M - 1 sums f_j / (i - j)
    M = values.size
    full = np.convolve(values, taps)
    return full[M - 1 : 2 * M - 1]


def hilbert_direct(f: StepFunction) -> StepFunction:
    """Discrete principal-value convolution against 1/(x - y), midpoint rule.

    The self-cell is omitted, which keeps the kernel matrix exactly
    skew-symmetric.  Serves as the quadrature oracle for the averaging
    experiments.
    """
    if f.grid.d != 1:
        raise ValueError("the Hilbert kernel is one-dimensional")
    taps = _hilbert_kernel_taps(f.grid.cells, None)
    return f.with_values(_hilbert_convolve(f.values, taps))


def hilbert_truncated(f: StepFunction, eps: float) -> StepFunction:
    """Hilbert convolution restricted to |x - y| > eps."""
    if f.grid.d != 1:
        raise ValueError("the Hilbert kernel is one-dimensional")
    taps = _hilbert_kernel_taps(f.grid.cells, eps)
    return f.with_values(_hilbert_convolve(f.values, taps))


def hilbert_maximal(f: StepFunction) -> StepFunction:
    """sup over dyadic cutoffs eps of |truncated Hilbert transform|.

    The cutoff grid is eps in {2^-k : 0 <= k <= N+1}; the finest cutoff keeps
    every off-diagonal cell, so the full principal-value sum participates.
    """
    if f.grid.d != 1:
        raise ValueError("the Hilbert kernel is one-dimensional")
    best = np.zeros(f.grid.cells)
    for k in range(0, f.grid.N + 2):
        out = hilbert_truncated(f, 2.0 ** (-k)).values
        np.maximum(best, np.abs(out), out=best)
    return f.with_values(best)


# -- averaging over translated grids ---------------------------------------


@dataclass(frozen=True)
class GridEnsemble:
    """Weighted family of translated grids used for averaging.

    Coefficients are normalized so their absolute values sum to one.
    """

    grids: tuple[GridSpec, ...]
    coefficients: tuple[float, ...]

    def __post_init__(self):
        if len(self.grids) != len(self.coefficients) or not self.grids:
            raise ValueError("need one coefficient per grid, at least one grid")
        base = self.grids[0]
        for g in self.grids:
            if (g.d, g.N) != (base.d, base.N):
                raise ValueError("ensemble grids must share dimension and depth")
        total = sum(abs(c) for c in self.coefficients)
        if total == 0.0:
            raise ValueError("ensemble coefficients must not all vanish")
        object.__setattr__(
            self, "coefficients", tuple(c / total for c in self.coefficients)
        )

    @classmethod
    def random_translations(cls, grid: GridSpec, count: int, seed: int) -> "GridEnsemble":
        """Uniform random translations, quantized to finest cells."""
        if grid.d != 1:
            raise ValueError("translation ensembles are built for d = 1")
        rng = np.random.default_rng(seed)
        offs = rng.integers(0, grid.cells, size=count)
        scale = float(grid.cells)
        grids = tuple(GridSpec(1, grid.N, (int(o) / scale,)) for o in offs)
        return cls(grids, (1.0 / count,) * count)


@dataclass(frozen=True)
class HilbertAverageResult:
    pairing: float
    oracle_pairing: float
    constant: float


def _toroidal_gap_cells(fmask: np.ndarray, gmask: np.ndarray) -> int:
    """Smallest cyclic cell distance between the two supports."""
    fi = np.flatnonzero(fmask)
    gi = np.flatnonzero(gmask)
    if fi.size == 0 or gi.size == 0:
        raise ValueError("both functions must be nonzero somewhere")
    M = fmask.size
    diff = np.abs(fi[:, None] - gi[None, :])
    return int(np.minimum(diff, M - diff).min())


def hilbert_average(
    ensemble: GridEnsemble, f: StepFunction, g: StepFunction
) -> HilbertAverageResult:
    """Average the Petermichl pairing over the ensemble's translated grids.

    For each grid, f and g are re-indexed into that grid's frame, the shift
    applied, and the L^2 pairing accumulated with the ensemble weights.
    Supports must be separated by at least one cell in the cyclic metric;
    the result carries the fitted proportionality constant against the
    quadrature pairing <Hf, g>.
    """
    base = ensemble.grids[0]
    if f.grid.d != 1 or (f.grid.d, f.grid.N) != (base.d, base.N):
        raise GridMismatchError("functions must live on the ensemble's cell grid")
    f._check(g)
    gap = _toroidal_gap_cells(f.values != 0.0, g.values != 0.0)
    if gap < 1:
        raise ValueError("overlapping supports: the averaged pairing needs separation")
    frame = GridSpec(base.d, base.N)
    shift_op = build_petermichl(frame)
    vol = frame.cell_volume
    # pairings only depend on the translation offset; compute each offset once
    weights: dict[int, float] = {}
    for grid, coeff in zip(ensemble.grids, ensemble.coefficients):
        weights[grid.shift_cells[0]] = weights.get(grid.shift_cells[0], 0.0) + coeff
    total = 0.0
    for off, coeff in sorted(weights.items()):
        fs = StepFunction(frame, np.roll(f.values, -off))
        gs = np.roll(g.values, -off)
        total += coeff * float(np.dot(shift_op.apply(fs).values, gs) * vol)
    oracle = float(np.dot(hilbert_direct(StepFunction(frame, f.values)).values, g.values) * vol)
    constant = total / oracle if oracle != 0.0 else math.nan
    return HilbertAverageResult(total, oracle, constant)
