"""Experiment runner: verb dispatch, deterministic seeding, CSV/JSON output.

Every run writes its result files plus a manifest echoing the config, the
library version, wall time, and the derived constants of the run.  With a
fixed config and seed the numerical result files are byte-identical across
reruns; the manifest differs only in its wall-time field.  Floats are
emitted with 17 significant digits so values round-trip exactly.

Exit codes: 0 success, 2 invalid configuration, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .characteristics import ainfty_characteristic, ap_characteristic, dual_weight, joint_ap
from .config import ConfigError, ExperimentConfig, load_config
from .dyadics import DyadicCube, GridSpec, StepFunction
from .families import cascade_weight, random_step, weight_from_spec
from .lerner import lerner_decompose
from .normlab import NonConvergenceError, SWEEP_CSV_HEADER, sharpness_sweep
from .positive import TauCoefficients, sawyer_testing
from .shifts import (
    GridEnsemble,
    HaarShift,
    build_paraproduct,
    build_petermichl,
    build_random_shift,
    hilbert_average,
    maximal_truncation,
)
from .stopping import build_stopping_family

__all__ = ["main", "run"]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_text(out_dir: str, name: str, text: str) -> str:
    path = os.path.join(out_dir, name)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return name


def _write_csv(out_dir: str, name: str, header: str, rows: list[list[str]]) -> str:
    lines = [header]
    lines.extend(",".join(row) for row in rows)
    return _write_text(out_dir, name, "\n".join(lines) + "\n")


def _cube_dict(Q: DyadicCube) -> dict:
    return {"level": Q.level, "coords": list(Q.coords)}


def _x_left(grid: GridSpec, cell_index: int) -> float:
    # left endpoint along the first axis, shift applied on the torus
    coord = 0
    for b in range(grid.N):
        coord |= ((cell_index >> (b * grid.d)) & 1) << b
    return (coord / (1 << grid.N) + grid.shift[0]) % 1.0


def _build_operator(grid: GridSpec, spec: dict, default_seed: int | None = None) -> HaarShift:
    kind = spec["kind"]
    if kind == "petermichl":
        return build_petermichl(grid)
    if kind == "random":
        seed = spec.get("seed", default_seed)
        if seed is None:
            raise ConfigError("params.operator.seed is required for random operators")
        return build_random_shift(
            int(spec.get("m", 1)),
            int(spec.get("n", 1)),
            int(seed),
            grid,
            bool(spec.get("cancellative", True)),
        )
    if kind == "paraproduct":
        coeffs = {
            grid.cube(item["cube"]["level"], item["cube"]["coords"]): float(item["a"])
            for item in spec["coefficients"]
        }
        return build_paraproduct(coeffs, grid)
    raise ConfigError(f"unknown operator kind {kind!r}")


def _load_step_function(path: str, grid: GridSpec) -> StepFunction:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            f = StepFunction.from_json(fh.read())
    except FileNotFoundError as exc:
        raise ConfigError(f"input file not found: {path}") from exc
    if (f.grid.d, f.grid.N) != (grid.d, grid.N):
        raise ConfigError("input function does not match the configured grid")
    return f


# -- verb implementations ----------------------------------------------------


def _run_characteristics(cfg: ExperimentConfig, out_dir: str, threads: int):
    grid = GridSpec(cfg.d, cfg.N)
    w = weight_from_spec(grid, cfg.params.get("weight", {"kind": "constant", "value": 1.0}), cfg.seed)
    p_list = [float(p) for p in cfg.params.get("p", [2.0])]
    mode = cfg.params.get("ainfty_mode", "dyadic")
    rows = []
    records = []
    for p in p_list:
        rep = ap_characteristic(w, p)
        rows.append(["ap", _fmt(p), _fmt(rep.value), str(rep.witness.level), str(rep.witness.zindex)])
        records.append({"quantity": "ap", "p": p, "value": rep.value, "witness": _cube_dict(rep.witness)})
        sigma = dual_weight(w, p)
        repj = joint_ap(w, sigma, p)
        rows.append(["joint_ap", _fmt(p), _fmt(repj.value), str(repj.witness.level), str(repj.witness.zindex)])
        records.append({"quantity": "joint_ap", "p": p, "value": repj.value, "witness": _cube_dict(repj.witness)})
        reps = ainfty_characteristic(sigma, mode)
        rows.append(["ainfty_sigma", _fmt(p), _fmt(reps.value), str(reps.witness.level), str(reps.witness.zindex)])
        records.append({"quantity": "ainfty_sigma", "p": p, "value": reps.value, "witness": _cube_dict(reps.witness)})
    repi = ainfty_characteristic(w, mode)
    rows.append(["ainfty_w", "inf", _fmt(repi.value), str(repi.witness.level), str(repi.witness.zindex)])
    records.append({"quantity": "ainfty_w", "p": "inf", "value": repi.value, "witness": _cube_dict(repi.witness)})
    outputs = [
        _write_csv(out_dir, "characteristics.csv", "quantity,p,value,witness_level,witness_zindex", rows)
    ]
    if cfg.out_format == "json":
        outputs.append(
            _write_text(out_dir, "characteristics.json", json.dumps(records, separators=(",", ":")) + "\n")
        )
    return outputs, {"ainfty_mode": mode}


def _run_shift_apply(cfg: ExperimentConfig, out_dir: str, threads: int):
    grid = GridSpec(cfg.d, cfg.N)
    if "input" not in cfg.params:
        raise ConfigError("params.input (a step-function JSON file) is required")
    f = _load_step_function(cfg.params["input"], grid)
    S = _build_operator(f.grid, cfg.params.get("operator", {"kind": "petermichl"}), cfg.seed)
    sf = S.apply(f)
    snat = maximal_truncation(S, f)
    rows = [
        [str(i), _fmt(_x_left(f.grid, i)), _fmt(sf.values[i]), _fmt(snat.values[i])]
        for i in range(f.grid.cells)
    ]
    outputs = [_write_csv(out_dir, "shift_apply.csv", "cell_index,x_left,sf,snat", rows)]
    if cfg.out_format == "json":
        outputs.append(
            _write_text(
                out_dir,
                "shift_apply.json",
                json.dumps(
                    {"sf": sf.values.tolist(), "snat": snat.values.tolist()},
                    separators=(",", ":"),
                )
                + "\n",
            )
        )
    return outputs, {}


_DEFAULT_PAIRS = [
    [2 / 32, 5 / 32, 7 / 32, 10 / 32],
    [18 / 32, 21 / 32, 23 / 32, 26 / 32],
    [2 / 64, 5 / 64, 7 / 64, 10 / 64],
    [26 / 64, 29 / 64, 31 / 64, 34 / 64],
    [42 / 128, 48 / 128, 52 / 128, 58 / 128],
]


def _run_hilbert_approx(cfg: ExperimentConfig, out_dir: str, threads: int):
    if cfg.d != 1:
        raise ConfigError("hilbert-approx requires grid.d = 1")
    grid = GridSpec(1, cfg.N)
    count = int(cfg.params.get("count", 10_000))
    pairs = cfg.params.get("pairs", _DEFAULT_PAIRS)
    ensemble = GridEnsemble.random_translations(grid, count, cfg.seed)
    M = grid.cells
    results = []
    for spec in pairs:
        f_lo, f_hi, g_lo, g_hi = (float(v) for v in spec)
        fv = np.zeros(M)
        fv[int(round(f_lo * M)) : int(round(f_hi * M))] = 1.0
        gv = np.zeros(M)
        gv[int(round(g_lo * M)) : int(round(g_hi * M))] = 1.0
        res = hilbert_average(ensemble, StepFunction(grid, fv), StepFunction(grid, gv))
        results.append((spec, res))
    avgs = np.array([r.pairing for _, r in results])
    oras = np.array([r.oracle_pairing for _, r in results])
    fitted = float(avgs @ oras / (oras @ oras))
    rows = []
    max_resid = 0.0
    for i, (spec, res) in enumerate(results):
        resid = abs(res.pairing - fitted * res.oracle_pairing) / abs(fitted * res.oracle_pairing)
        max_resid = max(max_resid, resid)
        rows.append(
            [str(i)]
            + [_fmt(v) for v in spec]
            + [_fmt(res.pairing), _fmt(res.oracle_pairing), _fmt(res.constant), _fmt(resid)]
        )
    outputs = [
        _write_csv(
            out_dir,
            "hilbert_approx.csv",
            "pair,f_lo,f_hi,g_lo,g_hi,avg_pairing,oracle_pairing,pair_constant,residual",
            rows,
        )
    ]
    constants = {"fitted_constant": fitted, "max_residual": max_resid, "grid_count": count}
    return outputs, constants


def _build_tau(grid: GridSpec, spec, seed) -> TauCoefficients:
    if isinstance(spec, list):
        return TauCoefficients(
            grid,
            {
                grid.cube(item["cube"]["level"], item["cube"]["coords"]): float(item["tau"])
                for item in spec
            },
        )
    rng = np.random.default_rng(seed)
    density = float(spec.get("density", 0.5))
    scale = float(spec.get("scale", 1.0))
    table = {}
    for Q in grid.all_cubes():
        if rng.random() < density:
            table[Q] = scale * float(rng.random())
    return TauCoefficients(grid, table)


def _run_sawyer_test(cfg: ExperimentConfig, out_dir: str, threads: int):
    grid = GridSpec(cfg.d, cfg.N)
    p = float(cfg.params.get("p", 2.0))
    if not 1.0 < p < math.inf:
        raise ConfigError("params.p must lie in (1, infinity)")
    w = weight_from_spec(grid, cfg.params.get("w", {"kind": "constant", "value": 1.0}), cfg.seed)
    sig_seed = None if cfg.seed is None else cfg.seed + 1
    sigma = weight_from_spec(grid, cfg.params.get("sigma", {"kind": "constant", "value": 1.0}), sig_seed)
    tau = _build_tau(grid, cfg.params.get("tau", {"kind": "random"}), None if cfg.seed is None else cfg.seed + 2)
    first = sawyer_testing(tau, w, sigma, p)
    second = sawyer_testing(tau, sigma, w, p / (p - 1.0))
    payload = {
        "T_pprime": first.value,
        "T_p": second.value,
        "proxy": first.value + second.value,
        "witnesses": {
            "T_pprime": _cube_dict(first.witness),
            "T_p": _cube_dict(second.witness),
        },
    }
    outputs = [
        _write_text(out_dir, "sawyer_test.json", json.dumps(payload, separators=(",", ":"), sort_keys=True) + "\n")
    ]
    return outputs, {"proxy": payload["proxy"]}


def _run_lerner_decompose(cfg: ExperimentConfig, out_dir: str, threads: int):
    grid = GridSpec(cfg.d, cfg.N)
    if "input" in cfg.params:
        phi = _load_step_function(cfg.params["input"], grid)
    else:
        spec = cfg.params.get("function", {"kind": "random", "spikes": 2})
        if spec["kind"] == "values":
            phi = StepFunction(grid, spec["values"])
        else:
            phi = random_step(grid, cfg.seed, int(spec.get("spikes", 0)))
    dec = lerner_decompose(phi, grid.root())
    outputs = [_write_text(out_dir, "lerner_decompose.json", dec.to_json() + "\n")]
    rows = [
        [str(i), _fmt(_x_left(grid, i)), _fmt(dec.residual.values[i])]
        for i in range(grid.cells)
    ]
    outputs.append(_write_csv(out_dir, "lerner_residual.csv", "cell_index,x_left,residual", rows))
    return outputs, {"c_lerner": dec.empirical_constant(), "generations": len(dec.generations)}


def _run_stopping_audit(cfg: ExperimentConfig, out_dir: str, threads: int):
    grid = GridSpec(cfg.d, cfg.N)
    count = int(cfg.params.get("count", 50))
    spec = cfg.params.get("weight", {"kind": "cascade", "volatility": 0.6})
    rows = []
    worst_pack = 0.0
    worst_carleson = 0.0
    for i in range(count):
        seed_i = cfg.seed + i
        w = weight_from_spec(grid, dict(spec, seed=seed_i), seed_i)
        family = build_stopping_family(w, grid.root())
        margins = family.packing_margins()
        pack = max(margins.values())
        ainf = ainfty_characteristic(w).value
        carleson = sum(w.integral(S) for S in family.cubes) / (ainf * w.integral())
        depth = max((S.level for S in family.cubes), default=0)
        worst_pack = max(worst_pack, pack)
        worst_carleson = max(worst_carleson, carleson)
        rows.append(
            [str(i), _fmt(pack), _fmt(carleson), _fmt(ainf), str(len(family.cubes)), str(depth)]
        )
    outputs = [
        _write_csv(
            out_dir,
            "stopping_audit.csv",
            "sample,packing_max,carleson_ratio,ainfty,family_size,depth",
            rows,
        )
    ]
    return outputs, {"max_packing": worst_pack, "max_carleson_ratio": worst_carleson}


def _run_sharpness_sweep(cfg: ExperimentConfig, out_dir: str, threads: int):
    if cfg.d != 1:
        raise ConfigError("sharpness-sweep requires grid.d = 1 (Hilbert-kernel rows)")
    operators = tuple(cfg.params.get("operators", ["petermichl", "random2a", "random2b"]))
    p_list = tuple(float(p) for p in cfg.params.get("p", [1.5, 2.0, 3.0]))
    N_list = tuple(int(n) for n in cfg.params.get("N", [min(cfg.N, 8), cfg.N]))
    budget = int(cfg.params.get("budget", 6))
    random_starts = int(cfg.params.get("random_starts", 16))
    rows = sharpness_sweep(
        operator_kinds=operators,
        p_list=p_list,
        N_list=N_list,
        seed=cfg.seed,
        budget=budget,
        random_starts=random_starts,
        threads=threads,
    )
    csv_rows = [
        [
            r.family,
            r.param,
            _fmt(r.p),
            str(r.N),
            _fmt(r.joint_ap),
            _fmt(r.ainfty_w),
            _fmt(r.ainfty_sigma),
            _fmt(r.norm),
            _fmt(r.rhs),
            _fmt(r.ratio),
            _fmt(r.buckley_rhs),
        ]
        for r in rows
    ]
    outputs = [_write_csv(out_dir, "sweep.csv", SWEEP_CSV_HEADER, csv_rows)]
    mirror = [r.__dict__ for r in rows]
    outputs.append(
        _write_text(out_dir, "sweep.json", json.dumps(mirror, separators=(",", ":")) + "\n")
    )
    by_N = {}
    for r in rows:
        by_N[r.N] = max(by_N.get(r.N, 0.0), r.ratio)
    constants = {"ratio_max": max(by_N.values()), "ratio_max_by_N": {str(k): v for k, v in sorted(by_N.items())}}
    return outputs, constants


def _run_invariant_suite(cfg: ExperimentConfig, out_dir: str, threads: int):
    from .characteristics import maximal_function

    grid = GridSpec(cfg.d, cfg.N)
    samples = int(cfg.params.get("samples", 100))
    rows = []
    constants = {}

    worst_ap = math.inf
    worst_dual = 0.0
    ainfty_over_ap = 0.0
    for i in range(samples):
        w = cascade_weight(grid, cfg.seed + i, 0.6)
        p = (1.5, 2.0, 3.0)[i % 3]
        ap = ap_characteristic(w, p)
        worst_ap = min(worst_ap, ap.value)
        sigma = dual_weight(w, p)
        pprime = p / (p - 1.0)
        dual_ap = ap_characteristic(sigma, pprime).value
        rel = abs(dual_ap - ap.value ** (pprime - 1.0)) / ap.value ** (pprime - 1.0)
        worst_dual = max(worst_dual, rel)
        if p == 2.0:
            ainfty_over_ap = max(ainfty_over_ap, ainfty_characteristic(w).value / ap.value)
    rows.append(["ap_at_least_one", str(samples), _fmt(worst_ap), _fmt(1.0), str(worst_ap >= 1.0)])
    rows.append(["dual_identity_rel_err", str(samples), _fmt(worst_dual), _fmt(1e-9), str(worst_dual <= 1e-9)])
    rows.append(["ainfty_over_ap_p2", str(samples), _fmt(ainfty_over_ap), _fmt(1.0), str(ainfty_over_ap <= 1.0 + 1e-12)])
    constants["ainfty_over_ap_p2"] = ainfty_over_ap

    sub_viol = 0.0
    for i in range(samples):
        f = random_step(grid, cfg.seed + 1000 + 2 * i)
        g = random_step(grid, cfg.seed + 1000 + 2 * i + 1)
        lhs = maximal_function(f + g).values
        rhs = maximal_function(f).values + maximal_function(g).values
        sub_viol = max(sub_viol, float((lhs - rhs).max()))
    rows.append(["maximal_sublinear_violation", str(samples), _fmt(sub_viol), _fmt(0.0), str(sub_viol <= 1e-12)])

    pack = 0.0
    for i in range(samples):
        w = cascade_weight(grid, cfg.seed + 2000 + i, 0.7)
        fam = build_stopping_family(w, grid.root())
        pack = max(pack, max(fam.packing_margins().values()))
    rows.append(["stopping_packing_max", str(samples), _fmt(pack), _fmt(0.25), str(pack < 0.25)])
    constants["stopping_packing_max"] = pack

    failures = 0
    for i in range(samples):
        phi = random_step(grid, cfg.seed + 3000 + i, spikes=1)
        try:
            lerner_decompose(phi, grid.root())
        except AssertionError:
            failures += 1
    rows.append(["lerner_certificate_failures", str(samples), str(failures), "0", str(failures == 0)])

    outputs = [
        _write_csv(out_dir, "invariants.csv", "invariant,samples,statistic,threshold,pass", rows)
    ]
    return outputs, constants


_VERB_RUNNERS = {
    "characteristics": _run_characteristics,
    "shift-apply": _run_shift_apply,
    "hilbert-approx": _run_hilbert_approx,
    "sawyer-test": _run_sawyer_test,
    "lerner-decompose": _run_lerner_decompose,
    "stopping-audit": _run_stopping_audit,
    "sharpness-sweep": _run_sharpness_sweep,
    "invariant-suite": _run_invariant_suite,
}


def run(cfg: ExperimentConfig, out_dir: str, threads: int = 1) -> dict:
    """Execute a validated config, write artifacts, and return the manifest."""
    os.makedirs(out_dir, exist_ok=True)
    start = time.perf_counter()
    outputs, constants = _VERB_RUNNERS[cfg.verb](cfg, out_dir, threads)
    manifest = {
        "verb": cfg.verb,
        "config": cfg.to_dict(),
        "version": __version__,
        "wall_time_s": time.perf_counter() - start,
        "constants": constants,
        "outputs": outputs,
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="czlab",
        description="Dyadic weighted-norm laboratory: batch experiment runner.",
    )
    parser.add_argument("verb", choices=sorted(_VERB_RUNNERS))
    parser.add_argument("--config", required=True, help="path to a JSON config file")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--threads", type=int, default=None, help="worker threads (or CZLAB_THREADS)")
    args = parser.parse_args(argv)

    threads = args.threads
    if threads is None:
        env = os.environ.get("CZLAB_THREADS")
        threads = int(env) if env else 1
    if threads < 1:
        print("config error: --threads must be at least 1", file=sys.stderr)
        return 2

    try:
        cfg = load_config(args.config, args.verb)
        if args.seed is not None:
            cfg = ExperimentConfig(
                cfg.verb, cfg.d, cfg.N, args.seed, cfg.params, cfg.out_format, cfg.out_path
            )
        out_dir = args.out or cfg.out_path or "czlab-out"
        run(cfg, out_dir, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NonConvergenceError as exc:
        lo, hi = exc.bracket
        print(
            f"numerical non-convergence: {exc} (value bracket [{lo}, {hi}])",
            file=sys.stderr,
        )
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
