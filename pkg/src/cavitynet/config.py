"""TOML run configurations.

A configuration has the blocks ``lattice``, ``params``, ``protocol``,
``integrator``, ``output`` and, for the matching subcommands, ``dark``,
``scan`` and ``optimize``.  Node indices are 0-based.  All rates are in
units of g, times in units of 1/g.  Unknown keys are errors, reported
with their dotted path.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import CavityNetError, ConfigError
from .evolve import IntegratorConfig
from .hamiltonian import SystemParams
from .lattice import build_chain, build_custom, build_square
from .sector import build_basis
from .protocol import (
    Protocol,
    empty_protocol,
    fourier_protocol,
    split_protocol,
    transfer_protocol,
    w_state_protocol,
)
from .targets import TargetSpec

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

__all__ = ["RunConfig", "load_config", "parse_config", "SCAN_PARAMETERS"]

NUM = (int, float)
SCAN_PARAMETERS = ("gamma", "kappa", "kappa_f", "w", "delta", "ramp_scale")

_SCHEMA = {
    "": {
        "name": str, "description": str, "lattice": dict, "params": dict, "protocol": dict,
        "integrator": dict, "output": dict, "dark": dict, "scan": dict, "optimize": dict,
    },
    "lattice": {"type": str, "n": int, "nx": int, "ny": int, "periodic": bool, "edges": list,
                "coords": list},
    "params": {"delta": NUM, "w": NUM, "gamma": NUM, "kappa": NUM, "kappa_f": NUM,
               "dissipative": bool, "w_bonds": list, "gamma_mode": str},
    "integrator": {"dt": NUM, "method": str, "sample_every": int, "norm_drift_tol": NUM,
                   "max_step_norm": NUM},
    "output": {"dir": str, "formats": list, "prefix": str},
    "dark": {"at": NUM, "omega": list, "tolerance": NUM, "matrix": bool},
    "scan": {"parameter": str, "values": list, "series_parameter": str, "series_values": list,
             "workers": int},
    "optimize": {"free": list, "budget": int, "restarts": int, "seed": int, "stop_at": NUM},
}

_RAMP_KEYS = {"omega_max": NUM, "rate": NUM, "overlap": NUM, "fast_rate": NUM, "target": dict}
_GENERATORS = {
    "transfer": {"path": list},
    "split": {"source": list, "destination": list},
    "w_state": {"start": int, "nodes": list},
    "fourier": {"phi0": NUM, "start": int, "nodes": list},
    "empty": {"initial": (int, list), "duration": NUM, "target": dict},
    "explicit": {"duration": NUM, "initial": list, "nodes": list, "target": dict},
}
_TARGET_KEYS = {"kind": str, "nodes": list, "q": list, "amplitudes": list}
_NODE_KEYS = {"node": int, "phase": NUM, "segments": list}
_SEGMENT_KEYS = {"kind": str, "start": NUM, "end": NUM, "amplitude": NUM, "rate": NUM,
                 "center": NUM, "phase": NUM}


def _type_ok(value, types):
    types = types if isinstance(types, tuple) else (types,)
    if isinstance(value, bool):
        return bool in types
    return isinstance(value, types)


def _check_block(block, schema, where, required=()):
    if not isinstance(block, dict):
        raise ConfigError("expected a table", where)
    for key, value in block.items():
        path = f"{where}.{key}" if where else key
        if key not in schema:
            raise ConfigError(f"unknown key (allowed: {', '.join(sorted(schema))})", path)
        if not _type_ok(value, schema[key]):
            raise ConfigError(f"wrong type {type(value).__name__}", path)
    for key in required:
        if key not in block:
            raise ConfigError("missing required key", f"{where}.{key}" if where else key)


@dataclass
class RunConfig:
    name: str
    lattice: object
    params: SystemParams
    protocol: Protocol
    integrator: IntegratorConfig
    output: dict
    dark: dict = field(default_factory=dict)
    scan: dict = field(default_factory=dict)
    optimize: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)
    source: str | None = None


def _lattice(block):
    _check_block(block, _SCHEMA["lattice"], "lattice", ("type",))
    kind = block["type"]
    periodic = block.get("periodic", False)
    try:
        if kind in ("chain", "ring"):
            if "n" not in block:
                raise ConfigError("missing required key", "lattice.n")
            return build_chain(block["n"], periodic or kind == "ring")
        if kind == "square":
            for k in ("nx", "ny"):
                if k not in block:
                    raise ConfigError("missing required key", f"lattice.{k}")
            return build_square(block["nx"], block["ny"], periodic)
        if kind == "custom":
            if "n" not in block or "edges" not in block:
                raise ConfigError("custom lattices need 'n' and 'edges'", "lattice")
            edges = [tuple(e) for e in block["edges"]]
            coords = [tuple(c) for c in block["coords"]] if "coords" in block else None
            return build_custom(block["n"], edges, coords)
    except ConfigError:
        raise
    except (CavityNetError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc), "lattice") from exc
    raise ConfigError(f"unknown lattice type {kind!r} (chain, ring, square, custom)", "lattice.type")


def _params(block):
    _check_block(block, _SCHEMA["params"], "params")
    try:
        return SystemParams(**block)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), "params") from exc


def _integrator(block):
    _check_block(block, _SCHEMA["integrator"], "integrator")
    kw = dict(block)
    if "dt" in kw:
        kw["step"] = kw.pop("dt")
    try:
        return IntegratorConfig(**kw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc), "integrator") from exc


def _weights(items, where):
    out = {}
    for k, item in enumerate(items):
        if not isinstance(item, list) or len(item) not in (2, 3) or not all(_type_ok(v, NUM) for v in item):
            raise ConfigError("expected [node, re] or [node, re, im]", f"{where}[{k}]")
        node = item[0]
        if not isinstance(node, int):
            raise ConfigError("node index must be an integer", f"{where}[{k}]")
        out[node] = complex(item[1], item[2] if len(item) == 3 else 0.0)
    return out


def _target(block, where):
    _check_block(block, _TARGET_KEYS, where, ("kind",))
    try:
        if block["kind"] == "explicit":
            return TargetSpec.explicit(_weights(block.get("amplitudes", []), f"{where}.amplitudes"))
        return TargetSpec(block["kind"], tuple(block.get("nodes", ())), tuple(block.get("q", (0.0, 0.0))))
    except ValueError as exc:
        raise ConfigError(str(exc), where) from exc


def _explicit(block, lattice):
    for k, node in enumerate(block.get("nodes", [])):
        _check_block(node, _NODE_KEYS, f"protocol.nodes[{k}]", ("node",))
        for m, seg in enumerate(node.get("segments", [])):
            _check_block(seg, _SEGMENT_KEYS, f"protocol.nodes[{k}].segments[{m}]", ("kind", "start", "end"))
    initial = []
    for k, item in enumerate(block["initial"]):
        if not isinstance(item, list) or len(item) not in (2, 3) or not isinstance(item[0], str):
            raise ConfigError("expected [label, re] or [label, re, im]", f"protocol.initial[{k}]")
        initial.append([item[0], float(item[1]), float(item[2]) if len(item) == 3 else 0.0])
    data = {"duration": block["duration"], "initial": initial, "nodes": block.get("nodes", [])}
    return Protocol.from_dict(data, lattice.n_nodes)


def _protocol(block, lattice):
    if not isinstance(block, dict):
        raise ConfigError("expected a table", "protocol")
    gen = block.get("generator")
    if gen not in _GENERATORS:
        raise ConfigError(f"unknown or missing generator (one of {', '.join(_GENERATORS)})", "protocol.generator")
    schema = {"generator": str, **_GENERATORS[gen]}
    if gen not in ("empty", "explicit"):
        schema.update(_RAMP_KEYS)
    required = {
        "transfer": ("path",),
        "split": ("source", "destination"),
        "w_state": ("start", "nodes"),
        "fourier": ("phi0",),
        "empty": ("initial",),
        "explicit": ("duration", "initial"),
    }[gen]
    _check_block(block, schema, "protocol", required)
    ramp = {k: float(block[k]) for k in ("omega_max", "rate", "overlap", "fast_rate") if k in block}
    try:
        if gen == "transfer":
            proto = transfer_protocol(lattice, block["path"], **ramp)
        elif gen == "split":
            proto = split_protocol(lattice, _weights(block["source"], "protocol.source"),
                                   _weights(block["destination"], "protocol.destination"), **ramp)
        elif gen == "w_state":
            proto = w_state_protocol(lattice, block["start"], block["nodes"], **ramp)
        elif gen == "fourier":
            proto = fourier_protocol(lattice, float(block["phi0"]), block.get("start", 0),
                                     block.get("nodes"), **ramp)
        elif gen == "empty":
            init = block["initial"]
            init = init if isinstance(init, int) else {f"p{n}": c for n, c in _weights(init, "protocol.initial").items()}
            proto = empty_protocol(lattice, init, float(block.get("duration", 0.0)))
        else:
            proto = _explicit(block, lattice)
    except ConfigError:
        raise
    except (CavityNetError, ValueError, TypeError, KeyError, IndexError) as exc:
        raise ConfigError(str(exc), "protocol") from exc
    if "target" in block:
        proto = replace(proto, target=_target(block["target"], "protocol.target"), meta=dict(proto.meta))
    try:
        proto.initial_vector(build_basis(lattice))
        if proto.target is not None:
            proto.target.weights(lattice)
    except (CavityNetError, ValueError, IndexError) as exc:
        raise ConfigError(str(exc), "protocol") from exc
    return proto


def _output(block, name):
    _check_block(block, _SCHEMA["output"], "output")
    formats = block.get("formats", ["csv", "json"])
    for f in formats:
        if f not in ("csv", "json", "svg"):
            raise ConfigError(f"unknown format {f!r} (csv, json, svg)", "output.formats")
    return {"dir": block.get("dir", "out"), "formats": list(formats), "prefix": block.get("prefix", name)}


def _scan(block):
    _check_block(block, _SCHEMA["scan"], "scan", ("parameter", "values"))
    for key in ("parameter", "series_parameter"):
        if key in block and block[key] not in SCAN_PARAMETERS:
            raise ConfigError(f"cannot scan {block[key]!r} (one of {', '.join(SCAN_PARAMETERS)})", f"scan.{key}")
    for key in ("values", "series_values"):
        if key in block and not all(_type_ok(v, NUM) for v in block[key]):
            raise ConfigError("values must be numbers", f"scan.{key}")
    if not block["values"]:
        raise ConfigError("empty values list", "scan.values")
    if ("series_parameter" in block) != ("series_values" in block):
        raise ConfigError("series_parameter and series_values go together", "scan")
    if "series_values" in block and not block["series_values"]:
        raise ConfigError("empty values list", "scan.series_values")
    if block.get("workers", 1) < 1:
        raise ConfigError("workers must be >= 1", "scan.workers")
    return dict(block)


def _optimize(block, protocol):
    _check_block(block, _SCHEMA["optimize"], "optimize")
    if not all(isinstance(f, str) for f in block.get("free", [])):
        raise ConfigError("free parameters must be strings", "optimize.free")
    if block.get("budget", 0) < 0:
        raise ConfigError("budget must be nonnegative", "optimize.budget")
    if not 0 < block.get("stop_at", 1.0) <= 1:
        raise ConfigError("stop_at must lie in (0, 1]", "optimize.stop_at")
    from .tuning import parse_free_params

    try:
        parse_free_params(protocol, block.get("free", []))
    except ConfigError as exc:
        raise ConfigError(str(exc), "optimize.free") from exc
    return dict(block)


def parse_config(data, source=None):
    """Validate a decoded TOML document and build the run objects."""
    _check_block(data, _SCHEMA[""], "", ("lattice", "protocol"))
    name = data.get("name") or (Path(source).stem if source else "run")
    lattice = _lattice(data["lattice"])
    params = _params(data.get("params", {}))
    if params.w_bonds is not None and len(params.w_bonds) != lattice.n_bonds:
        raise ConfigError(f"{len(params.w_bonds)} entries for {lattice.n_bonds} bonds", "params.w_bonds")
    protocol = _protocol(data["protocol"], lattice)
    integrator = _integrator(data.get("integrator", {}))
    output = _output(data.get("output", {}), name)
    dark = data.get("dark", {})
    _check_block(dark, _SCHEMA["dark"], "dark")
    if "omega" in dark and len(dark["omega"]) != lattice.n_nodes:
        raise ConfigError(f"needs {lattice.n_nodes} Rabi values", "dark.omega")
    scan = _scan(data["scan"]) if "scan" in data else {}
    opt = _optimize(data["optimize"], protocol) if "optimize" in data else {}
    return RunConfig(name, lattice, params, protocol, integrator, output, dark, scan, opt, data, source)


def load_config(path):
    """Read and validate a TOML configuration file.

    Raises
    ------
    ConfigError
        With ``where`` set to ``line N`` for syntax errors or the dotted
        key path for semantic ones.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        raise ConfigError(str(exc), f"{path}:line {line}" if line else str(path)) from exc
    return parse_config(data, str(path))
