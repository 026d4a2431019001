"""Command-line front end.

::

    cavitynet evolve|dark|scan|optimize --config PATH [--out DIR] [--seed N]
              [--format csv,json,svg] [--assert-fidelity X]

``--config`` takes a TOML file or the name of a bundled configuration
(``cavitynet list`` shows them).  Exit codes: 0 success, 2 configuration
error, 3 numerical-accuracy error, 4 fidelity below ``--assert-fidelity``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np
import tomli_w

from . import __version__
from .config import load_config, parse_config
from .darkstates import bond_dark_state, dark_manifold, gram_matrix, spectral_gap
from .errors import (
    CavityNetError,
    ConfigError,
    DegenerateDarkStateError,
    IntegrationAccuracyError,
    MatrixTooLargeError,
    NoGapError,
)
from .evolve import fidelity, integrate, min_gap, phase_profile, propagate
from .hamiltonian import dense_matrix, snapshot_from_omega
from .plots import line_chart, phase_wheel
from .sector import build_basis
from .tuning import optimize

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_FIDELITY = 0, 2, 3, 4
_LOSSES = ("gamma", "kappa", "kappa_f")


class FidelityBelowThreshold(Exception):
    pass


def bundled_configs():
    root = resources.files("cavitynet") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def resolve_config(name):
    path = Path(name)
    if path.exists():
        return path
    if name in bundled_configs():
        return Path(str(resources.files("cavitynet") / "configs" / f"{name}.toml"))
    raise ConfigError(f"no such file or bundled config: {name}")


# --------------------------------------------------------------------------
# output helpers


def _num(v):
    v = float(v)
    return None if not math.isfinite(v) else v


def _cplx(c):
    return [float(np.real(c)), float(np.imag(c))]


def _dump_json(path, data):
    path.write_text(json.dumps(data, indent=1, sort_keys=True, allow_nan=False) + "\n")


def _csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join("nan" if not math.isfinite(v) else f"{v:.12g}" for v in row))
    path.write_text("\n".join(lines) + "\n")


def _run_meta(cfg, protocol=None):
    protocol = protocol or cfg.protocol
    return {
        "name": cfg.name,
        "lattice": cfg.lattice.describe(),
        "params": cfg.params.to_dict(),
        "integrator": cfg.integrator.to_dict(),
        "protocol_digest": protocol.digest(),
        "duration": protocol.duration,
        "version": __version__,
    }


def _check_threshold(value, threshold, what):
    if threshold is not None and not value >= threshold:
        raise FidelityBelowThreshold(f"{what} {value:.6g} below --assert-fidelity {threshold}")


# --------------------------------------------------------------------------
# evolve


def _target_metrics(traj, protocol, lattice):
    tgt = protocol.target
    out = {}
    if tgt is None:
        return out
    if tgt.kind in ("w_state", "fourier"):
        nodes = list(tgt.nodes)
        p = traj.probs[-1, nodes]
        out["max_prob_deviation"] = float(np.max(np.abs(p - 1.0 / len(nodes))))
    if tgt.kind == "fourier":
        coords = np.asarray([lattice.coords[n] for n in tgt.nodes], dtype=float)
        steps = np.diff(coords, axis=0) @ np.asarray(tgt.q)
        spacing = float(steps[0]) if steps.size else 0.0
        prof = phase_profile(traj, traj.times[-1], reference=tgt.nodes[0], spacing=spacing, nodes=tgt.nodes)
        out["phase_spacing"] = spacing
        out["phase_equispacing"] = _num(prof.equispacing)
        out["final_phases"] = [_num(x) for x in prof.phases]
    return out


def cmd_evolve(cfg, out, formats, threshold=None):
    traj = integrate(cfg.lattice, cfg.params, cfg.protocol, cfg.integrator)
    probe = traj.times[:: max(1, traj.times.size // 200)]
    summary = {
        "command": "evolve",
        "final_fidelity": _num(traj.fidelity[-1]),
        "conditional_fidelity": _num(traj.conditional_fidelity[-1]),
        "final_probs": [float(p) for p in traj.probs[-1]],
        "final_leakage": float(traj.leakage[-1]),
        "max_leakage": float(np.max(traj.leakage)),
        "final_norm2": float(traj.norm2[-1]),
        "dark_pop_start": _num(traj.dark_pop[0]),
        "dark_pop_end": _num(traj.dark_pop[-1]),
        "min_gap": _num(min_gap(cfg.lattice, cfg.params.hermitian(), cfg.protocol, probe)),
        "nsteps": traj.meta["nsteps"],
        "dt": traj.meta["dt"],
    }
    if "norm_drift" in traj.meta:
        summary["norm_drift"] = traj.meta["norm_drift"]
    summary.update(_target_metrics(traj, cfg.protocol, cfg.lattice))
    meta = _run_meta(cfg)
    prefix = out / cfg.output["prefix"]
    if "csv" in formats:
        _csv(prefix.with_name(prefix.name + "_trajectory.csv"), traj.columns(), traj.table())
    if "json" in formats:
        rows = [[_num(v) for v in row] for row in traj.table()]
        _dump_json(prefix.with_name(prefix.name + "_trajectory.json"),
                   {"meta": meta, "columns": traj.columns(), "rows": rows,
                    "final_state": [_cplx(c) for c in traj.final.amplitudes]})
        _dump_json(prefix.with_name(prefix.name + "_summary.json"), {"meta": meta, "summary": summary})
    if "svg" in formats:
        n = cfg.lattice.n_nodes
        series = [(f"|A{i + 1}|^2", traj.probs[:, i]) for i in range(n)]
        series.append(("Q+F", traj.leakage))
        (prefix.with_name(prefix.name + "_populations.svg")).write_text(
            line_chart(traj.times, series, cfg.name, "t g", "population", ylim=(0.0, 1.0)))
        ts = np.linspace(0.0, cfg.protocol.duration, 600)
        om = np.abs(cfg.protocol.omega(ts)) if cfg.protocol.duration > 0 else np.zeros((600, n))
        (prefix.with_name(prefix.name + "_rabi.svg")).write_text(
            line_chart(ts, [(f"|Omega{i + 1}|", om[:, i]) for i in range(n)], cfg.name, "t g", "|Omega| / g"))
        (prefix.with_name(prefix.name + "_phases.svg")).write_text(
            phase_wheel(traj.phases[-1], traj.probs[-1], f"{cfg.name}: final phases"))
    _check_threshold(traj.fidelity[-1], threshold, "final fidelity")
    return summary


# --------------------------------------------------------------------------
# dark


def _dark_omega(cfg):
    block = cfg.dark
    if "omega" in block:
        vals = []
        for k, v in enumerate(block["omega"]):
            if isinstance(v, list) and len(v) == 2:
                vals.append(complex(v[0], v[1]))
            elif isinstance(v, (int, float)) and not isinstance(v, bool):
                vals.append(complex(v))
            else:
                raise ConfigError("expected a number or [re, im]", f"dark.omega[{k}]")
        return None, np.array(vals)
    at = float(block.get("at", cfg.protocol.duration / 2))
    try:
        return at, cfg.protocol.omega(at)
    except ValueError as exc:
        raise ConfigError(str(exc), "dark.at") from exc


def cmd_dark(cfg, out, formats, threshold=None):
    at, omega = _dark_omega(cfg)
    params = cfg.params.hermitian()
    basis = build_basis(cfg.lattice)
    snap = snapshot_from_omega(omega, params)
    tol = float(cfg.dark.get("tolerance", 1e-10))
    man = dark_manifold(basis, snap, params, tol)
    try:
        gap = spectral_gap(basis, snap, params, tol)
    except NoGapError:
        gap = None
    bonds, states = [], []
    for b in range(cfg.lattice.n_bonds):
        try:
            states.append(bond_dark_state(basis, snap, b, params))
            bonds.append(b)
        except DegenerateDarkStateError:
            continue
    gram = gram_matrix(states) if states else np.zeros((0, 0))
    report = {
        "command": "dark",
        "time": at,
        "omega": [_cplx(c) for c in omega],
        "s": [_cplx(c) for c in snap.s],
        "dimension": man.dimension,
        "n_bonds": cfg.lattice.n_bonds,
        "tolerance": tol,
        "gap": gap,
        "basis": [[_cplx(c) for c in v] for v in man.vectors],
        "slots": basis.slot_names(),
        "bond_states": bonds,
        "gram": [[_cplx(c) for c in row] for row in gram],
        "gram_rank": int(np.linalg.matrix_rank(gram)) if states else 0,
    }
    if cfg.dark.get("matrix", False):
        report["matrix"] = [[_cplx(c) for c in row] for row in dense_matrix(basis, snap, params)]
    if "json" in formats:
        _dump_json(out / f"{cfg.output['prefix']}_dark.json", {"meta": _run_meta(cfg), "report": report})
    return report


# --------------------------------------------------------------------------
# scan


def _scan_point(args):
    lattice, params, protocol, config, target, assignments = args
    for name, value in assignments:
        if name == "ramp_scale":
            protocol = protocol.scaled(value)
        else:
            params = params.replace(**{name: value})
    psi = propagate(lattice, params, protocol, config)
    f = fidelity(psi, target)
    n2 = psi.norm2()
    cond = f / n2 if n2 > 0 else float("nan")
    return f, cond, n2


def cmd_scan(cfg, out, formats, threshold=None):
    block = cfg.scan
    if not block:
        raise ConfigError("missing [scan] block", "scan")
    if cfg.protocol.target is None:
        raise ConfigError("scans need a protocol target", "protocol.target")
    names = [block["parameter"]] + ([block["series_parameter"]] if "series_parameter" in block else [])
    for name in names:
        if name in _LOSSES and not cfg.params.dissipative:
            raise ConfigError(f"scanning {name} needs params.dissipative = true", "scan.parameter")
    values = [float(v) for v in block["values"]]
    series = [float(v) for v in block.get("series_values", [None])] if "series_values" in block else [None]
    jobs = []
    for sv in series:
        for v in values:
            assign = [(block["parameter"], v)]
            if sv is not None:
                assign.insert(0, (block["series_parameter"], sv))
            jobs.append((cfg.lattice, cfg.params, cfg.protocol, cfg.integrator, cfg.protocol.target, assign))
    workers = int(block.get("workers", 1))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_scan_point, jobs))
    else:
        results = [_scan_point(j) for j in jobs]

    header = ([block["series_parameter"]] if series[0] is not None else []) + [
        block["parameter"], "fidelity", "conditional_fidelity", "norm2"]
    rows = []
    for job, res in zip(jobs, results):
        rows.append([a[1] for a in job[5]] + list(res))
    prefix = out / cfg.output["prefix"]
    if "csv" in formats:
        _csv(prefix.with_name(prefix.name + "_scan.csv"), header, rows)
    if "json" in formats:
        _dump_json(prefix.with_name(prefix.name + "_scan.json"),
                   {"meta": _run_meta(cfg), "columns": header, "rows": [[_num(v) for v in r] for r in rows]})
    if "svg" in formats:
        k = len(values)
        curves = []
        for m, sv in enumerate(series):
            label = "F" if sv is None else f"{block['series_parameter']}={sv:g}"
            curves.append((label, [results[m * k + j][0] for j in range(k)]))
        (prefix.with_name(prefix.name + "_scan.svg")).write_text(
            line_chart(values, curves, cfg.name, block["parameter"] + " / g", "fidelity"))
    fids = [r[0] for r in results]
    summary = {"command": "scan", "points": len(rows), "min_fidelity": float(min(fids)),
               "max_fidelity": float(max(fids))}
    _check_threshold(min(fids), threshold, "minimum scan fidelity")
    return summary


# --------------------------------------------------------------------------
# optimize


def _tuned_config(cfg, protocol):
    data = {k: v for k, v in cfg.raw.items()}
    proto = protocol.to_dict()
    proto["generator"] = "explicit"
    data["protocol"] = proto
    data["name"] = f"{cfg.name}_tuned"
    return data


def cmd_optimize(cfg, out, formats, threshold=None, seed=None):
    block = cfg.optimize
    if not block:
        raise ConfigError("missing [optimize] block", "optimize")
    seed = block.get("seed", 0) if seed is None else seed
    res = optimize(cfg.protocol, cfg.lattice, cfg.params, block.get("free", []),
                   budget=block.get("budget", 200), seed=seed, restarts=block.get("restarts", 3),
                   config=cfg.integrator, stop_at=block.get("stop_at"))
    tuned = _tuned_config(cfg, res.protocol)
    parse_config(tuned)
    prefix = out / cfg.output["prefix"]
    (prefix.with_name(prefix.name + "_tuned.toml")).write_text(tomli_w.dumps(tuned))
    report = {
        "command": "optimize",
        "initial_fidelity": res.initial_fidelity,
        "fidelity": res.fidelity,
        "evaluations": res.evaluations,
        "free_params": list(block.get("free", [])),
        "x": [float(v) for v in res.x],
        "seed": seed,
    }
    if "json" in formats:
        _dump_json(prefix.with_name(prefix.name + "_optimize.json"),
                   {"meta": _run_meta(cfg, res.protocol), "report": report, "history": res.history})
    _check_threshold(res.fidelity, threshold, "optimised fidelity")
    return report


COMMANDS = {"evolve": cmd_evolve, "dark": cmd_dark, "scan": cmd_scan, "optimize": cmd_optimize}


def build_parser():
    ap = argparse.ArgumentParser(prog="cavitynet", description="Dark-state adiabatic passage on cavity networks.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML file or bundled config name")
        p.add_argument("--out", default=None, help="output directory (default: output.dir)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--format", default=None, help="comma-separated subset of csv,json,svg")
        p.add_argument("--assert-fidelity", type=float, default=None, dest="assert_fidelity")
    sub.add_parser("list", help="list bundled configurations")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "list":
        print("\n".join(bundled_configs()))
        return EXIT_OK
    t0 = time.perf_counter()
    try:
        cfg = load_config(resolve_config(args.config))
        formats = cfg.output["formats"] if args.format is None else [f.strip() for f in args.format.split(",") if f.strip()]
        bad = [f for f in formats if f not in ("csv", "json", "svg")]
        if bad:
            raise ConfigError(f"unknown format {bad[0]!r}", "--format")
        out = Path(args.out if args.out is not None else cfg.output["dir"])
        out.mkdir(parents=True, exist_ok=True)
        kwargs = {"seed": args.seed} if args.command == "optimize" else {}
        result = COMMANDS[args.command](cfg, out, formats, args.assert_fidelity, **kwargs)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationAccuracyError, MatrixTooLargeError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FidelityBelowThreshold as exc:
        print(f"fidelity check failed: {exc}", file=sys.stderr)
        return EXIT_FIDELITY
    except (CavityNetError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "dark":
        print(json.dumps(result, sort_keys=True))
    else:
        line = dict(result, elapsed_s=round(time.perf_counter() - t0, 3))
        print(json.dumps(line, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
