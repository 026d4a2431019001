"""Derivative-free refinement of protocol parameters.

Free parameters are named by strings:

``"scale"``
    stretch the whole protocol in time (rates shrink by the same factor);
``"omega"``
    common factor on every drive amplitude;
``"<node>:<segment>:<field>"``
    one field of one segment of a node's schedule, with ``field`` in
    ``rate`` (``r``), ``center`` (``t0``), ``amplitude`` (``omega_max``)
    or ``phase`` (``phi``).  Segment indices follow the sorted schedule.

Amplitude and phase edits spread over the contiguous pulse the segment
belongs to (abutting segments of the same node), so that the drive stays
continuous.  A candidate whose drive jumps anyway, or whose couplings
exceed the integrator's step bound, is scored as infeasible.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .errors import ConfigError, IntegrationAccuracyError, ScheduleError
from .evolve import IntegratorConfig, fidelity, propagate
from .protocol import Protocol, Schedule

__all__ = ["FreeParameter", "OptimizeResult", "parse_free_params", "optimize"]

_FIELDS = {
    "rate": "rate",
    "r": "rate",
    "center": "center",
    "t0": "center",
    "amplitude": "amplitude",
    "omega_max": "amplitude",
    "phase": "phase",
    "phi": "phase",
}
_INFEASIBLE = 2.0


@dataclass(frozen=True)
class FreeParameter:
    name: str
    node: int | None = None
    segment: int | None = None
    field: str | None = None

    def read(self, protocol):
        if self.name in ("scale", "omega"):
            return 1.0
        seg = protocol.schedules[self.node].segments[self.segment]
        if self.field == "phase":
            return protocol.schedules[self.node].phase if seg.phase is None else seg.phase
        return getattr(seg, self.field)

    def step(self, protocol, value):
        """Initial simplex displacement for this parameter."""
        if self.name in ("scale", "omega"):
            return 0.25
        if self.field == "phase":
            return 0.3
        if self.field == "center":
            seg = protocol.schedules[self.node].segments[self.segment]
            return 0.5 / seg.rate if seg.rate else 1.0
        return 0.2 * abs(value) if value else 0.1


def parse_free_params(protocol, names):
    """Resolve free-parameter names against ``protocol``.

    Raises
    ------
    ConfigError
        For unknown names, fields, nodes or segments.
    """
    out = []
    for name in names:
        if name in ("scale", "omega"):
            out.append(FreeParameter(name))
            continue
        parts = str(name).split(":")
        if len(parts) != 3:
            raise ConfigError(f"free parameter {name!r} is not 'scale', 'omega' or 'node:segment:field'")
        try:
            node, seg = int(parts[0]), int(parts[1])
        except ValueError:
            raise ConfigError(f"free parameter {name!r}: node and segment must be integers") from None
        fld = _FIELDS.get(parts[2])
        if fld is None:
            raise ConfigError(f"free parameter {name!r}: unknown field {parts[2]!r}")
        if not 0 <= node < protocol.n_nodes:
            raise ConfigError(f"free parameter {name!r}: node {node} outside 0..{protocol.n_nodes - 1}")
        segs = protocol.schedules[node].segments
        if not 0 <= seg < len(segs):
            raise ConfigError(f"free parameter {name!r}: node {node} has {len(segs)} segments")
        if fld in ("rate", "center") and segs[seg].kind not in ("turn_on", "turn_off"):
            raise ConfigError(f"free parameter {name!r}: {segs[seg].kind} segments have no {fld}")
        out.append(FreeParameter(str(name), node, seg, fld))
    return out


def _pulse(segments, k):
    """Indices of the contiguous run of abutting segments containing ``k``."""
    lo = hi = k
    while lo > 0 and abs(segments[lo - 1].end - segments[lo].start) < 1e-9:
        lo -= 1
    while hi + 1 < len(segments) and abs(segments[hi].end - segments[hi + 1].start) < 1e-9:
        hi += 1
    return range(lo, hi + 1)


def _apply(protocol, params, x):
    scheds = [list(s.segments) for s in protocol.schedules]
    base_phase = [s.phase for s in protocol.schedules]
    scale, omega = 1.0, 1.0
    for p, v in zip(params, x):
        if p.name == "scale":
            scale = v
            continue
        if p.name == "omega":
            omega = v
            continue
        segs = scheds[p.node]
        if p.field in ("amplitude", "phase"):
            for k in _pulse(segs, p.segment):
                if segs[k].kind != "off":
                    segs[k] = replace(segs[k], **{p.field: float(v)})
        else:
            segs[p.segment] = replace(segs[p.segment], **{p.field: float(v)})
    if omega != 1.0:
        scheds = [[replace(s, amplitude=s.amplitude * omega) for s in segs] for segs in scheds]
    out = replace(
        protocol,
        schedules=tuple(Schedule(tuple(segs), ph) for segs, ph in zip(scheds, base_phase)),
        meta=dict(protocol.meta),
    )
    return out.scaled(scale) if scale != 1.0 else out


@dataclass
class OptimizeResult:
    protocol: Protocol
    fidelity: float
    initial_fidelity: float
    evaluations: int
    x: np.ndarray
    history: list = field(default_factory=list)

    @property
    def improved(self):
        return self.fidelity > self.initial_fidelity


class _Exhausted(Exception):
    pass


class _Objective:
    def __init__(self, protocol, params, lattice, system, target, config, budget):
        self.protocol, self.params = protocol, params
        self.lattice, self.system, self.target, self.config = lattice, system, target, config
        self.budget = budget
        self.calls = 0
        self.best_x, self.best_f = None, np.inf
        self.history = []
        self.stop_below = 1e-12

    def value(self, x):
        try:
            cand = _apply(self.protocol, self.params, x)
        except (ScheduleError, ValueError):
            return _INFEASIBLE
        if cand.continuity_defects():
            return _INFEASIBLE
        try:
            psi = propagate(self.lattice, self.system, cand, self.config)
        except IntegrationAccuracyError:
            return _INFEASIBLE
        return 1.0 - fidelity(psi, self.target)

    def __call__(self, x):
        if self.calls >= self.budget:
            raise _Exhausted
        self.calls += 1
        x = np.array(x, dtype=float)
        f = self.value(x)
        self.history.append(float(f))
        if f < self.best_f:
            self.best_f, self.best_x = f, x.copy()
            if f <= self.stop_below:
                raise _Exhausted
        return f


def optimize(protocol, lattice, system, free_params, budget=200, seed=0, restarts=3,
             config=IntegratorConfig(), target=None, stop_at=None):
    """Nelder-Mead search for the highest terminal fidelity.

    Parameters
    ----------
    protocol : Protocol
        Starting point; its ``target`` is used unless ``target`` is given.
    free_params : list of str
        Names as described in the module docstring.
    budget : int
        Maximum number of simulations, including the one scoring the input.
        ``budget = 0`` returns the input unchanged (fidelity is still
        reported).
    seed : int
        Seeds the perturbations of restarts 2 and later; the first start
        is always the input itself.
    stop_at : float, optional
        Stop as soon as a candidate reaches this fidelity.

    Returns
    -------
    OptimizeResult
        Never worse than the input protocol.
    """
    target = target if target is not None else protocol.target
    if target is None:
        raise ValueError("optimisation needs a target state")
    if budget < 0:
        raise ValueError("budget must be nonnegative")
    params = parse_free_params(protocol, free_params)
    x0 = np.array([p.read(protocol) for p in params], dtype=float)
    obj = _Objective(protocol, params, lattice, system, target, config, max(budget, 1))
    obj.stop_below = 1e-12 if stop_at is None else 1.0 - stop_at
    try:
        obj(x0)
    except _Exhausted:
        pass
    f0 = obj.best_f
    if budget <= 1 or not params or f0 <= obj.stop_below:
        return OptimizeResult(protocol, 1.0 - f0, 1.0 - f0, obj.calls, x0, obj.history)

    obj.budget = budget
    rng = np.random.default_rng(seed)
    steps = np.array([p.step(protocol, v) for p, v in zip(params, x0)])
    for k in range(max(1, restarts)):
        start = obj.best_x.copy()
        if k > 0:
            start = start + rng.normal(scale=0.5 * steps)
        simplex = np.vstack([start, start + np.diag(steps)])
        try:
            minimize(obj, start, method="Nelder-Mead",
                     options={"initial_simplex": simplex, "maxfev": budget, "xatol": 1e-6, "fatol": 1e-10})
        except _Exhausted:
            break
        if obj.calls >= budget or obj.best_f <= obj.stop_below:
            break

    best = _apply(protocol, params, obj.best_x) if obj.best_f < f0 else protocol
    best_x = obj.best_x if obj.best_f < f0 else x0
    fid = 1.0 - min(obj.best_f, f0)
    if best is not protocol:
        best.meta["optimized"] = {"free_params": list(free_params), "seed": seed, "evaluations": obj.calls}
    return OptimizeResult(best, fid, 1.0 - f0, obj.calls, best_x, obj.history)
