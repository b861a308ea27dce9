"""Command-line front end.

Subcommands
-----------
``synth``
    Single-point synthesis; writes the response blocks as ``.fir``
    dumps plus ``result.json``.
``sweep``
    Locality/horizon/delay grid; writes ``sweep.csv`` and a summary
    ``result.json`` with monotonicity diagnostics.
``simulate``
    Closed-loop trace under configured perturbations; writes
    ``trace.csv``.
``verify``
    Internal-stability verification of a stored (``--response DIR``)
    or freshly synthesized response.
``qi-check``
    Boolean quadratic-invariance test on two sparsity-pattern files.

All commands read a JSON config (``--config``).  Matrices are dense
CSV (comma separated, no header); FIR dumps are text blocks separated
by ``# t=<index>`` markers.  Exit codes: 0 success, 2 for a negative
check (infeasible problem, failed verification, non-QI pattern),
1 for usage or input errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from itertools import product
from typing import Dict, Optional, Tuple

import numpy as np

from .controller import (
    Perturbations,
    realize,
    simulate,
    verify_internal_stability,
)
from .plant import PlantModel, build_chain, hop_distances
from .response import Fir, SystemResponse
from .slc import (
    SlcSet,
    delay_slc,
    fir_slc,
    intersect,
    is_qi,
    locality_slc,
    pattern_slc,
)
from .synth import (
    SynthesisProblem,
    centralized_baseline,
    synthesize_of_h2,
    synthesize_sf_h2,
)

__all__ = ["main"]


class CliError(Exception):
    """Input or configuration problem reportable to the user."""


# ---------------------------------------------------------------------------
# file formats


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_fir(path: str, fir: Fir) -> None:
    buf = io.StringIO()
    buf.write(f"# rows={fir.rows} cols={fir.cols} horizon={fir.horizon}\n")
    for t in range(fir.horizon + 1):
        buf.write(f"# t={t}\n")
        for row in fir.coeffs[t]:
            buf.write(" ".join(repr(float(v)) for v in row) + "\n")
    _atomic_write(path, buf.getvalue())


def _read_fir(path: str) -> Fir:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0].startswith("# rows="):
        raise CliError(f"{path}: not a FIR dump (missing header)")
    head = dict(part.split("=") for part in lines[0][2:].split())
    rows, cols, horizon = int(head["rows"]), int(head["cols"]), int(head["horizon"])
    coeffs = np.zeros((horizon + 1, rows, cols))
    t = -1
    r = 0
    for ln in lines[1:]:
        if not ln.strip():
            continue
        if ln.startswith("# t="):
            t = int(ln[4:])
            r = 0
            continue
        vals = np.fromiter((float(v) for v in ln.split()), dtype=float)
        if vals.size != cols:
            raise CliError(f"{path}: row of length {vals.size}, expected {cols}")
        coeffs[t, r] = vals
        r += 1
    return Fir(coeffs)


def _load_matrix(path: str) -> np.ndarray:
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise CliError(f"cannot read matrix file {path}: {exc}") from exc


def _write_json(path: str, obj) -> None:
    _atomic_write(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# config handling


def _load_config(args) -> dict:
    if not args.config:
        raise CliError("--config is required for this command")
    try:
        with open(args.config) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise CliError(f"config file not found: {args.config}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"config is not valid JSON: {exc}") from exc


def _build_plant(cfg: dict) -> PlantModel:
    section = cfg.get("plant")
    if not isinstance(section, dict):
        raise CliError("config needs a 'plant' section")
    if "chain" in section:
        spec = dict(section["chain"])
        allowed = {"n", "kappa", "rho_target", "actuator_sites", "gamma"}
        unknown = set(spec) - allowed
        if unknown:
            raise CliError(f"unknown chain plant keys: {sorted(unknown)}")
        if "n" not in spec:
            raise CliError("plant.chain needs 'n'")
        return build_chain(**spec)
    if "files" in section:
        files = section["files"]
        base = section.get("base_dir", "")
        mats: Dict[str, np.ndarray] = {}
        for name, path in files.items():
            mats[name] = _load_matrix(os.path.join(base, path))
        required = {"A", "B1", "B2", "C1", "D11", "D12"}
        missing = required - set(mats)
        if missing:
            raise CliError(f"plant.files is missing {sorted(missing)}")
        if "C2" in mats:
            for name in ("D21", "D22"):
                if name not in mats:
                    n_rows = mats["C2"].shape[0]
                    n_cols = mats["B1"].shape[1] if name == "D21" else mats["B2"].shape[1]
                    mats[name] = np.zeros((n_rows, n_cols))
            return PlantModel(**mats)
        return PlantModel.state_feedback(**mats)
    raise CliError("plant section needs either 'chain' or 'files'")


def _resolve_mode(cfg: dict, plant: PlantModel) -> str:
    mode = cfg.get("mode")
    if mode is None:
        mode = "sf" if plant.is_state_feedback else "of"
    if mode not in ("sf", "of"):
        raise CliError(f"mode must be 'sf' or 'of', got {mode!r}")
    if mode == "sf" and not plant.is_state_feedback:
        raise CliError("mode 'sf' needs a state-feedback plant (C2=I, D21=0, D22=0)")
    return mode


def _build_slc(
    cfg: dict,
    plant: PlantModel,
    mode: str,
    override: Optional[dict] = None,
) -> Tuple[SlcSet, int]:
    section = dict(cfg.get("slc") or {})
    if override:
        section.update(override)
    if "T" not in section:
        raise CliError("slc section needs the FIR horizon 'T'")
    T = int(section["T"])
    of = mode == "of"
    graph = hop_distances(plant.A)
    parts = [fir_slc(plant, T, output_feedback=of)]
    d = section.get("d")
    if d is not None and d < plant.nx:
        parts.append(locality_slc(plant, int(d), T, graph=graph, output_feedback=of))
    t_c = float(section.get("t_c", 0.0) or 0.0)
    if t_c > 0.0:
        parts.append(delay_slc(plant, t_c, T, graph=graph, output_feedback=of))
    patterns = section.get("pattern_files")
    if patterns:
        base = section.get("base_dir", "")
        loaded = {
            key: _load_matrix(os.path.join(base, path))
            for key, path in patterns.items()
        }
        parts.append(pattern_slc(plant, loaded, T, output_feedback=of))
    return intersect(*parts), T


def _tol(args, cfg: dict) -> float:
    if args.tol is not None:
        return args.tol
    return float((cfg.get("tolerances") or {}).get("residual", 1e-8))


def _threads(args, cfg: dict) -> Optional[int]:
    if args.threads is not None:
        return args.threads
    value = cfg.get("threads")
    return int(value) if value is not None else None


def _out_dir(args) -> str:
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _dump_response(out: str, resp: SystemResponse) -> None:
    _write_fir(os.path.join(out, "phi_xx.fir"), resp.Phi_xx)
    _write_fir(os.path.join(out, "phi_ux.fir"), resp.Phi_ux)
    if resp.is_output_feedback:
        _write_fir(os.path.join(out, "phi_xy.fir"), resp.Phi_xy)
        _write_fir(os.path.join(out, "phi_uy.fir"), resp.Phi_uy)


def _load_response(dirpath: str) -> SystemResponse:
    xx = _read_fir(os.path.join(dirpath, "phi_xx.fir"))
    ux = _read_fir(os.path.join(dirpath, "phi_ux.fir"))
    xy_path = os.path.join(dirpath, "phi_xy.fir")
    if os.path.exists(xy_path):
        return SystemResponse(
            Phi_xx=xx,
            Phi_ux=ux,
            Phi_xy=_read_fir(xy_path),
            Phi_uy=_read_fir(os.path.join(dirpath, "phi_uy.fir")),
        )
    return SystemResponse(Phi_xx=xx, Phi_ux=ux)


def _synthesize(plant, slc, mode, tol, threads):
    if mode == "sf":
        problem = SynthesisProblem(plant=plant, slc=slc, mode="state-feedback")
        return synthesize_sf_h2(problem, workers=threads, feas_tol=tol)
    problem = SynthesisProblem(plant=plant, slc=slc, mode="output-feedback")
    return synthesize_of_h2(problem, feas_tol=tol)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_synth(args) -> int:
    cfg = _load_config(args)
    plant = _build_plant(cfg)
    mode = _resolve_mode(cfg, plant)
    slc, T = _build_slc(cfg, plant, mode)
    tol = _tol(args, cfg)
    t0 = time.perf_counter()
    result = _synthesize(plant, slc, mode, tol, _threads(args, cfg))
    wall_ms = (time.perf_counter() - t0) * 1e3
    out = _out_dir(args)

    payload = {
        "mode": mode,
        "horizon": T,
        "status": "ok" if result.feasible else "infeasible",
        "cost": None if np.isnan(result.cost) else result.cost,
        "residual": result.residual,
        "columns_infeasible": result.columns_infeasible,
        "wall_time_ms": round(wall_ms, 3),
    }
    if mode == "sf" and result.feasible:
        baseline = centralized_baseline(plant)
        payload["baseline_cost"] = baseline
        payload["normalized_cost"] = result.cost / baseline
    if result.feasible:
        _dump_response(out, result.response)
    _write_json(os.path.join(out, "result.json"), payload)
    print(f"status={payload['status']} cost={payload['cost']} residual={result.residual:.3e}")
    return 0 if result.feasible else 2


_SWEEP_HEADER = [
    "d",
    "T",
    "t_c",
    "status",
    "cost",
    "normalized_cost",
    "wall_time_ms",
    "columns_infeasible",
]


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    plant = _build_plant(cfg)
    mode = _resolve_mode(cfg, plant)
    if mode != "sf":
        raise CliError("sweep currently supports state-feedback mode only")
    sweep = cfg.get("sweep")
    if not isinstance(sweep, dict):
        raise CliError("config needs a 'sweep' section with 'd' and 'T' lists")
    d_values = [int(v) for v in sweep.get("d", [])]
    T_values = [int(v) for v in sweep.get("T", [])]
    tc_values = [float(v) for v in sweep.get("t_c", [0.0])]
    if not d_values or not T_values:
        raise CliError("sweep needs nonempty 'd' and 'T' lists")
    tol = _tol(args, cfg)
    threads = _threads(args, cfg)
    out = _out_dir(args)

    baseline = centralized_baseline(plant)
    rows = []
    records = []
    for t_c, d, T in product(tc_values, d_values, T_values):
        t0 = time.perf_counter()
        slc, _ = _build_slc(cfg, plant, mode, override={"d": d, "T": T, "t_c": t_c})
        result = _synthesize(plant, slc, mode, tol, threads)
        wall_ms = (time.perf_counter() - t0) * 1e3
        cost = result.cost
        norm = cost / baseline
        rows.append(
            [
                d,
                T,
                f"{t_c:g}",
                "ok" if result.feasible else "infeasible",
                repr(float(cost)),
                repr(float(norm)),
                f"{wall_ms:.3f}",
                result.columns_infeasible,
            ]
        )
        records.append({"d": d, "T": T, "t_c": t_c, "cost": cost, "feasible": result.feasible})
        print(
            f"d={d} T={T} t_c={t_c:g} status={rows[-1][3]} "
            f"normalized_cost={norm if np.isfinite(norm) else float('nan'):.6f}"
        )

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(_SWEEP_HEADER)
    writer.writerows(rows)
    _atomic_write(os.path.join(out, "sweep.csv"), buf.getvalue())

    violations = _monotonicity_violations(records)
    feasible = [r for r in records if r["feasible"]]
    payload = {
        "baseline_cost": baseline,
        "n_points": len(records),
        "n_feasible": len(feasible),
        "best_normalized_cost": (
            min(r["cost"] for r in feasible) / baseline if feasible else None
        ),
        "monotonicity_violations": violations,
    }
    _write_json(os.path.join(out, "result.json"), payload)
    print(
        f"points={len(records)} feasible={len(feasible)} "
        f"monotonicity_violations={len(violations)}"
    )
    return 0 if feasible else 2


def _monotonicity_violations(records, rtol: float = 1e-9):
    """Cost must not increase as d or T grows (other axes fixed)."""

    def check(axis, group_keys):
        out = []
        groups: Dict[tuple, list] = {}
        for r in records:
            if not r["feasible"]:
                continue
            groups.setdefault(tuple(r[k] for k in group_keys), []).append(r)
        for key, grp in groups.items():
            grp = sorted(grp, key=lambda r: r[axis])
            for lo, hi in zip(grp, grp[1:]):
                if hi["cost"] > lo["cost"] * (1 + rtol):
                    out.append(
                        {
                            "axis": axis,
                            "fixed": dict(zip(group_keys, key)),
                            "from": {axis: lo[axis], "cost": lo["cost"]},
                            "to": {axis: hi[axis], "cost": hi["cost"]},
                        }
                    )
        return out

    return check("d", ("T", "t_c")) + check("T", ("d", "t_c"))


def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    plant = _build_plant(cfg)
    sim = dict(cfg.get("simulate") or {})
    mode = _resolve_mode(cfg, plant)
    tol = _tol(args, cfg)
    out = _out_dir(args)

    if args.response:
        resp = _load_response(args.response)
    else:
        slc, _ = _build_slc(cfg, plant, mode)
        result = _synthesize(plant, slc, mode, tol, _threads(args, cfg))
        if not result.feasible:
            print("status=infeasible", file=sys.stderr)
            return 2
        resp = result.response

    kind = sim.get("kind")
    horizon = int(sim.get("horizon", 3 * resp.horizon + plant.nx))
    realization = realize(resp, kind, plant=plant, tol=tol)

    pert_spec = sim.get("impulse")
    if pert_spec:
        beta_dim = plant.nu if realization.kind == "structure1" else None
        pert = Perturbations.impulse(
            plant,
            horizon,
            pert_spec.get("channel", "dx"),
            int(pert_spec.get("coord", 0)),
            float(pert_spec.get("magnitude", 1.0)),
            beta_dim=beta_dim,
        )
    elif sim.get("random"):
        rng = np.random.default_rng(args.seed if args.seed is not None else 0)
        scale = float(sim.get("scale", 1.0))
        pert = Perturbations(
            dx=scale * rng.standard_normal((horizon + 1, plant.nx)),
            dy=scale * rng.standard_normal((horizon + 1, plant.ny)),
            du=scale * rng.standard_normal((horizon + 1, plant.nu)),
        )
    else:
        pert = Perturbations.impulse(plant, horizon, "dx", 0)

    trace = simulate(plant, realization, pert, horizon)
    trace.to_csv(os.path.join(out, "trace.csv"))
    peak = float(np.max(np.abs(trace.x)))
    tail = float(np.max(np.abs(trace.x[min(resp.horizon + 3, horizon):])))
    _write_json(
        os.path.join(out, "result.json"),
        {
            "kind": realization.kind,
            "horizon": horizon,
            "peak_state": peak,
            "tail_state": tail,
        },
    )
    print(f"kind={realization.kind} horizon={horizon} peak_state={peak:.6e}")
    return 0


def _cmd_verify(args) -> int:
    cfg = _load_config(args)
    plant = _build_plant(cfg)
    tol = _tol(args, cfg)
    out = _out_dir(args)

    if args.response:
        resp = _load_response(args.response)
    else:
        mode = _resolve_mode(cfg, plant)
        slc, _ = _build_slc(cfg, plant, mode)
        result = _synthesize(plant, slc, mode, tol, _threads(args, cfg))
        if not result.feasible:
            print("status=infeasible", file=sys.stderr)
            return 2
        resp = result.response

    horizon = cfg.get("verify", {}).get("horizon")
    report = verify_internal_stability(
        plant, resp, tol=tol, horizon=int(horizon) if horizon else None
    )
    _write_json(
        os.path.join(out, "result.json"),
        {
            "passed": report.passed,
            "tol": report.tol,
            "horizon": report.horizon,
            "max_deviation": report.max_deviation,
            "per_channel": report.per_channel,
            "n_failures": len(report.failures),
        },
    )
    print(f"passed={report.passed} max_deviation={report.max_deviation:.3e}")
    return 0 if report.passed else 2


def _cmd_qi_check(args) -> int:
    K = _load_matrix(args.k_pattern)
    P = _load_matrix(args.p_pattern)
    result = is_qi(K, P)
    if args.out:
        out = _out_dir(args)
        _write_json(os.path.join(out, "result.json"), {"qi": bool(result)})
    print(f"qi={'true' if result else 'false'}")
    return 0 if result else 2


# ---------------------------------------------------------------------------
# entry point


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slskit",
        description="Localized FIR controller synthesis and verification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--out", help="output directory (default: current)")
        p.add_argument("--threads", type=int, default=None, help="column solver threads")
        p.add_argument("--tol", type=float, default=None, help="residual tolerance")
        p.add_argument("--seed", type=int, default=None, help="RNG seed for random inputs")

    p = sub.add_parser("synth", help="single-point synthesis")
    common(p)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("sweep", help="locality/horizon tradeoff grid")
    common(p)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("simulate", help="closed-loop trace")
    common(p)
    p.add_argument("--response", help="directory with stored .fir response blocks")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("verify", help="internal-stability verification")
    common(p)
    p.add_argument("--response", help="directory with stored .fir response blocks")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("qi-check", help="quadratic invariance test on patterns")
    common(p)
    p.add_argument("k_pattern", help="controller sparsity pattern (CSV)")
    p.add_argument("p_pattern", help="plant sparsity pattern (CSV)")
    p.set_defaults(func=_cmd_qi_check)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
