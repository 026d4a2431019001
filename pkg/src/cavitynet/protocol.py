"""Control-laser schedules and protocol generators.

Every node carries a list of ramp segments.  Ramps follow a tanh profile,
``turn_on(t) = A * (1 + tanh(r (t - t0))) / 2`` and its mirror
``turn_off``; each segment is only active inside its ``[start, end]``
window and the laser is exactly off outside all windows.  Generators size
every ramp window so that the tanh tail at the window edge is below
``1e-6`` of the amplitude, which keeps the drive continuous and lets the
P state of a switched-off node act as an exact dark endpoint.

Protocols are assembled from elementary *moves* on a bond ``i -> j``.  A
move works by counterintuitive ordering: the laser on ``j`` comes up first
(while ``|p_i>`` is decoupled), then ``i`` ramps up as ``j`` ramps down,
rotating the bond dark state from ``|p_i>`` to ``|p_j>``.  A partial move
stops the rotation at a chosen mixing ratio and switches both lasers off
together, which freezes the superposition.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ScheduleError
from .targets import TargetSpec

__all__ = [
    "RampSegment",
    "Schedule",
    "Protocol",
    "evaluate",
    "empty_protocol",
    "transfer_protocol",
    "split_protocol",
    "fourier_protocol",
    "w_state_protocol",
    "DEFAULT_OMEGA_MAX",
    "DEFAULT_RATE",
]

DEFAULT_OMEGA_MAX = 1.0
DEFAULT_RATE = 0.025
DEFAULT_FAST_RATE = 0.5
# ramp windows extend this many 1/r on each side of the tanh center;
# exp(-2 * 7.5) ~ 3e-7 keeps joins continuous to 1e-6
SATURATION = 7.5
CONTINUITY_TOL = 1e-6
PARTIAL_CAP = 3.0

SEGMENT_KINDS = ("turn_on", "turn_off", "hold", "off")


@dataclass(frozen=True)
class RampSegment:
    kind: str
    start: float
    end: float
    amplitude: float = 0.0
    rate: float = 0.0
    center: float = 0.0
    phase: float | None = None

    def __post_init__(self):
        if self.kind not in SEGMENT_KINDS:
            raise ScheduleError(f"unknown segment kind {self.kind!r}")
        if not self.end >= self.start:
            raise ScheduleError(f"segment window [{self.start}, {self.end}] is reversed")
        if self.amplitude < 0:
            raise ScheduleError("segment amplitude must be nonnegative")
        if self.kind in ("turn_on", "turn_off") and not self.rate > 0:
            raise ScheduleError("ramp segments need a positive rate")

    def magnitude(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "turn_on":
            return self.amplitude * 0.5 * (1.0 + np.tanh(self.rate * (t - self.center)))
        if self.kind == "turn_off":
            return self.amplitude * 0.5 * (1.0 - np.tanh(self.rate * (t - self.center)))
        if self.kind == "hold":
            return np.full(t.shape, self.amplitude)
        return np.zeros(t.shape)

    def scaled(self, factor):
        return replace(
            self,
            start=self.start * factor,
            end=self.end * factor,
            center=self.center * factor,
            rate=self.rate / factor if self.rate else self.rate,
        )

    def to_dict(self):
        out = {"kind": self.kind, "start": self.start, "end": self.end, "amplitude": self.amplitude}
        if self.kind in ("turn_on", "turn_off"):
            out["rate"] = self.rate
            out["center"] = self.center
        if self.phase is not None:
            out["phase"] = self.phase
        return out

    @classmethod
    def from_dict(cls, data):
        return cls(
            kind=data["kind"],
            start=float(data["start"]),
            end=float(data["end"]),
            amplitude=float(data.get("amplitude", 0.0)),
            rate=float(data.get("rate", 0.0)),
            center=float(data.get("center", 0.0)),
            phase=None if data.get("phase") is None else float(data["phase"]),
        )


@dataclass(frozen=True)
class Schedule:
    """Complex Rabi frequency of one node's control laser."""

    segments: tuple = ()
    phase: float = 0.0

    def __post_init__(self):
        segs = tuple(sorted(self.segments, key=lambda s: (s.start, s.end)))
        for a, b in zip(segs, segs[1:]):
            if b.start < a.end - 1e-12:
                raise ScheduleError(f"segment windows overlap: [{a.start}, {a.end}] and [{b.start}, {b.end}]")
        object.__setattr__(self, "segments", segs)

    @property
    def omega_max(self):
        return max((s.amplitude for s in self.segments if s.kind != "off"), default=0.0)

    def evaluate(self, t):
        """Complex ``Omega(t)``; ``t`` may be a scalar or an array."""
        t_arr = np.asarray(t, dtype=float)
        out = np.zeros(t_arr.shape, dtype=complex)
        for seg in self.segments:
            if seg.kind == "off":
                continue
            mask = (t_arr >= seg.start) & (t_arr <= seg.end)
            if not np.any(mask):
                continue
            phi = self.phase if seg.phase is None else seg.phase
            out[mask] = seg.magnitude(t_arr[mask]) * np.exp(1j * phi)
        return out if t_arr.ndim else complex(out)

    def continuity_defects(self, tol=CONTINUITY_TOL):
        """Boundaries where the drive jumps by more than ``tol * omega_max``."""
        scale = self.omega_max
        if scale == 0:
            return []
        bad = []
        segs = self.segments
        for k, seg in enumerate(segs):
            phi = self.phase if seg.phase is None else seg.phase
            left = seg.magnitude(seg.start) * np.exp(1j * phi)
            right = seg.magnitude(seg.end) * np.exp(1j * phi)
            prev = segs[k - 1] if k > 0 else None
            nxt = segs[k + 1] if k + 1 < len(segs) else None
            before = _edge_value(prev, self.phase, "end") if prev is not None and abs(prev.end - seg.start) < 1e-9 else 0
            after = _edge_value(nxt, self.phase, "start") if nxt is not None and abs(nxt.start - seg.end) < 1e-9 else 0
            if abs(left - before) > tol * scale:
                bad.append((seg.start, float(abs(left - before))))
            if abs(right - after) > tol * scale:
                bad.append((seg.end, float(abs(right - after))))
        return bad

    def scaled(self, factor):
        return Schedule(tuple(s.scaled(factor) for s in self.segments), self.phase)

    def with_phase_offset(self, dphi):
        segs = tuple(s if s.phase is None else replace(s, phase=s.phase + dphi) for s in self.segments)
        return Schedule(segs, self.phase + dphi)

    def to_dict(self):
        return {"phase": self.phase, "segments": [s.to_dict() for s in self.segments]}

    @classmethod
    def from_dict(cls, data):
        return cls(tuple(RampSegment.from_dict(s) for s in data.get("segments", ())), float(data.get("phase", 0.0)))


def _edge_value(seg, default_phase, which):
    phi = default_phase if seg.phase is None else seg.phase
    t = seg.end if which == "end" else seg.start
    return complex(seg.magnitude(t) * np.exp(1j * phi))


def evaluate(schedule, t, duration=None):
    """``Omega(t)`` for one schedule, range-checked when ``duration`` is given."""
    if duration is not None:
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < -1e-9) or np.any(t_arr > duration + 1e-9):
            raise ScheduleError(f"time outside the protocol domain [0, {duration}]")
    return schedule.evaluate(t)


@dataclass(frozen=True)
class Protocol:
    """Per-node schedules over ``[0, duration]`` plus the task they solve.

    ``initial`` maps slot labels (``"p0"``, ``"q3"``, ``"f1"``) to complex
    amplitudes; it is normalised when turned into a state vector.
    """

    schedules: tuple
    duration: float
    initial: tuple
    target: TargetSpec | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "schedules", tuple(self.schedules))
        if self.duration < 0:
            raise ScheduleError("duration must be nonnegative")
        init = self.initial.items() if isinstance(self.initial, dict) else self.initial
        object.__setattr__(self, "initial", tuple((str(k), complex(v)) for k, v in init))
        for sched in self.schedules:
            for seg in sched.segments:
                if seg.start < -1e-9 or seg.end > self.duration + 1e-9:
                    raise ScheduleError(
                        f"segment [{seg.start}, {seg.end}] leaves the protocol domain [0, {self.duration}]"
                    )

    @property
    def n_nodes(self):
        return len(self.schedules)

    def omega(self, t):
        """Rabi frequencies of all nodes: shape ``(N,)`` or ``(len(t), N)``."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr < -1e-9) or np.any(t_arr > self.duration + 1e-9):
            raise ScheduleError(f"time outside the protocol domain [0, {self.duration}]")
        cols = [s.evaluate(t_arr) for s in self.schedules]
        return np.stack(cols, axis=-1)

    def omega_max(self):
        return max((s.omega_max for s in self.schedules), default=0.0)

    def initial_vector(self, basis):
        from .sector import StateVector

        amps = np.zeros(basis.dim, dtype=complex)
        for label, c in self.initial:
            amps[basis.slot(label)] += c
        nrm = np.linalg.norm(amps)
        if nrm == 0:
            raise ScheduleError("initial state has zero norm")
        return StateVector(basis, amps / nrm)

    def continuity_defects(self, tol=CONTINUITY_TOL):
        return {k: d for k, s in enumerate(self.schedules) if (d := s.continuity_defects(tol))}

    def check(self, tol=CONTINUITY_TOL):
        bad = self.continuity_defects(tol)
        if bad:
            node, defects = next(iter(bad.items()))
            raise ScheduleError(f"node {node}: drive jumps by {defects[0][1]:.3g} at t = {defects[0][0]:.6g}")
        return self

    def scaled(self, factor):
        """Stretch every time scale by ``factor`` (rates shrink by the same)."""
        if not factor > 0:
            raise ValueError("scale factor must be positive")
        return replace(
            self,
            schedules=tuple(s.scaled(factor) for s in self.schedules),
            duration=self.duration * factor,
            meta=dict(self.meta),
        )

    def with_global_phase(self, dphi):
        return replace(self, schedules=tuple(s.with_phase_offset(dphi) for s in self.schedules), meta=dict(self.meta))

    def to_dict(self):
        out = {
            "duration": self.duration,
            "initial": [[k, c.real, c.imag] for k, c in self.initial],
            "nodes": [dict(node=k, **s.to_dict()) for k, s in enumerate(self.schedules)],
        }
        if self.target is not None:
            out["target"] = self.target.to_dict()
        return out

    @classmethod
    def from_dict(cls, data, n_nodes=None):
        nodes = data.get("nodes", [])
        n = n_nodes if n_nodes is not None else (max((d["node"] for d in nodes), default=-1) + 1)
        scheds = [Schedule() for _ in range(n)]
        for d in nodes:
            k = int(d["node"])
            if not 0 <= k < n:
                raise ScheduleError(f"schedule for node {k} outside 0..{n - 1}")
            scheds[k] = Schedule.from_dict(d)
        target = TargetSpec.from_dict(data["target"]) if data.get("target") else None
        init = tuple((k, complex(re, im)) for k, re, im in data["initial"])
        return cls(tuple(scheds), float(data["duration"]), init, target)

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def empty_protocol(lattice, initial, duration=0.0, target=None):
    """All lasers off for ``duration``."""
    init = {f"p{initial}": 1.0} if isinstance(initial, (int, np.integer)) else dict(initial)
    return Protocol(tuple(Schedule() for _ in range(lattice.n_nodes)), float(duration), init, target,
                    {"generator": "empty"})


# --------------------------------------------------------------------------
# move-based construction


@dataclass
class _Timing:
    omega_max: float
    rate: float
    fast_rate: float
    overlap: float

    @property
    def slow_half(self):
        return SATURATION / self.rate + 0.5 * self.overlap

    @property
    def fast_half(self):
        return SATURATION / self.fast_rate


def _timing(omega_max, rate, overlap, fast_rate):
    if not omega_max > 0 or not rate > 0:
        raise ValueError("omega_max and rate must be positive")
    overlap = 1.5 / rate if overlap is None else float(overlap)
    fast_rate = max(DEFAULT_FAST_RATE, rate) if fast_rate is None else float(fast_rate)
    return _Timing(float(omega_max), float(rate), fast_rate, overlap)


class _Builder:
    def __init__(self, n_nodes, timing):
        self.segs = [[] for _ in range(n_nodes)]
        self.t = 0.0
        self.tm = timing

    def _ramp(self, node, kind, start, half, rate, amp, phase, offset=0.0):
        self.segs[node].append(
            RampSegment(kind, start, start + 2 * half, amp, rate, start + half + offset, phase)
        )

    def full(self, i, j, phase_src=0.0, phase_tgt=0.0):
        tm = self.tm
        t0, hf, hs = self.t, tm.fast_half, tm.slow_half
        a = tm.omega_max
        self._ramp(j, "turn_on", t0, hf, tm.fast_rate, a, phase_tgt)
        t1 = t0 + 2 * hf
        self._ramp(i, "turn_on", t1, hs, tm.rate, a, phase_src, -0.5 * tm.overlap)
        self._ramp(j, "turn_off", t1, hs, tm.rate, a, phase_tgt, 0.5 * tm.overlap)
        t2 = t1 + 2 * hs
        self._ramp(i, "turn_off", t2, hf, tm.fast_rate, a, phase_src)
        self.t = t2 + 2 * hf

    def partial(self, i, j, keep, phase_src=0.0, phase_tgt=0.0):
        """Leave a fraction ``keep`` of the weight on ``i``, move the rest to ``j``."""
        tm = self.tm
        ratio = math.sqrt((1 - keep) / keep)
        # the weaker laser sets the dark/bright gap, so it gets the full
        # amplitude; the stronger one is capped to stay in the w >> s regime
        strong = min(tm.omega_max * max(ratio, 1 / ratio), PARTIAL_CAP * tm.omega_max)
        weak = strong / max(ratio, 1 / ratio)
        a_src, a_tgt = (strong, weak) if ratio >= 1 else (weak, strong)
        t0, hf = self.t, tm.fast_half
        hs = SATURATION / tm.rate
        self._ramp(j, "turn_on", t0, hf, tm.fast_rate, a_tgt, phase_tgt)
        t1 = t0 + 2 * hf
        self._ramp(i, "turn_on", t1, hs, tm.rate, a_src, phase_src)
        self.segs[j].append(RampSegment("hold", t1, t1 + 2 * hs, a_tgt, 0.0, 0.0, phase_tgt))
        t2 = t1 + 2 * hs
        self._ramp(i, "turn_off", t2, hs, tm.rate, a_src, phase_src)
        self._ramp(j, "turn_off", t2, hs, tm.rate, a_tgt, phase_tgt)
        self.t = t2 + 2 * hs

    def protocol(self, initial, target, meta):
        scheds = tuple(Schedule(tuple(s)) for s in self.segs)
        return Protocol(scheds, self.t, initial, target, meta)


def transfer_protocol(lattice, path, omega_max=DEFAULT_OMEGA_MAX, rate=DEFAULT_RATE, overlap=None,
                      fast_rate=None):
    """Move the excitation from ``path[0]`` to ``path[-1]`` hop by hop.

    ``overlap`` is the delay between the source turn-on and the target
    turn-off centers within each hop (default ``1.5 / rate``).
    """
    path = [int(p) for p in path]
    if not path:
        raise ValueError("path must contain at least one node")
    for a, b in zip(path, path[1:]):
        if not lattice.adjacent(a, b):
            raise ValueError(f"path nodes {a} and {b} are not adjacent")
    tm = _timing(omega_max, rate, overlap, fast_rate)
    if len(path) == 1:
        return empty_protocol(lattice, path[0], 0.0, TargetSpec.site(path[0]))
    bld = _Builder(lattice.n_nodes, tm)
    for a, b in zip(path, path[1:]):
        bld.full(a, b)
    return bld.protocol({f"p{path[0]}": 1.0}, TargetSpec.site(path[-1]),
                        {"generator": "transfer", "path": path})


def _normalized(weights, what):
    w = {int(k): complex(v) for k, v in dict(weights).items() if abs(complex(v)) > 0}
    total = sum(abs(v) ** 2 for v in w.values())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"{what} weights must be normalised (sum |c|^2 = {total:.12g})")
    return w


def _route_packet(lattice, s, have, keep, demand, occupied):
    """Moves carrying the surplus of node ``s`` to open destinations.

    ``have`` is the weight on ``s`` and ``keep`` the part that stays there.
    Returns ``(moves, last_holder, notes)`` or ``None`` if no path exists;
    ``demand`` is consumed in place.
    """
    moves, notes = [], []
    holder, weight, left = s, have, keep
    surplus = have - keep
    while surplus > 1e-12:
        best = None
        for d in sorted(n for n, v in demand.items() if v > 1e-12):
            path = lattice.shortest_path(holder, d, blocked=occupied)
            if path is not None and (best is None or len(path) < len(best[1])):
                best = (d, path)
        if best is None:
            if not any(v > 1e-12 for v in demand.values()):
                notes.append(f"weight {surplus:.3g} from node {s} has no destination")
                break
            return None
        d, path = best
        for k, (a, b) in enumerate(zip(path, path[1:])):
            frac = left / weight if k == 0 else 0.0
            moves.append((a, b, frac, d if b == d else None))
        take = min(demand[d], surplus)
        if demand[d] > surplus + 1e-12:
            notes.append(f"node {d} needs weight merged from more than one packet")
        demand[d] -= take
        holder, weight, left = d, surplus, take
        surplus -= take
    return moves, holder, notes


def _plan_routes(lattice, src, dst):
    """Plan the moves mapping weights ``src`` onto ``dst``.

    Nodes present in both keep ``min`` of the two weights in place; the
    remaining surplus is routed to open destinations, nearest first, along
    shortest paths that avoid every node currently holding amplitude.  All
    orderings of the surplus nodes are tried and the shortest plan wins.
    """
    have = {n: abs(c) ** 2 for n, c in src.items()}
    need = {n: abs(c) ** 2 for n, c in dst.items()}
    keep = {n: min(have[n], need.get(n, 0.0)) for n in have}
    surplus_nodes = sorted(n for n in have if have[n] - keep[n] > 1e-12)
    base_demand = {n: need[n] - (keep.get(n, 0.0)) for n in need if need[n] - keep.get(n, 0.0) > 1e-12}

    best = None
    for order in itertools.islice(itertools.permutations(surplus_nodes), 720):
        demand = dict(base_demand)
        occupied = {n for n in have if keep[n] > 1e-12} | set(surplus_nodes)
        plan, notes, ok = [], [], True
        for s in order:
            occupied.discard(s)
            routed = _route_packet(lattice, s, have[s], keep[s], demand, occupied)
            if routed is None:
                ok = False
                break
            moves, _, extra = routed
            plan.extend(moves)
            notes.extend(extra)
            occupied |= {s} if keep[s] > 1e-12 else set()
            occupied |= {m[3] for m in moves if m[3] is not None}
        if ok and (best is None or len(plan) < len(best[0])):
            best = (plan, notes)
    if best is None:
        return [], ["no route avoids the nodes already holding amplitude"]
    return best


def _build_moves(lattice, plan, tm, src, dst, node_phases=None):
    """Turn a move plan into schedules.

    With ``node_phases`` every drive on node ``n`` carries that fixed phase.
    Otherwise phases are chosen per move so that each destination receives
    the phase of its target amplitude: a move ``i -> j`` multiplies the
    transported amplitude by ``exp(i (phi_i - phi_j))``.
    """
    bld = _Builder(lattice.n_nodes, tm)
    notes = []
    phase = {n: float(np.angle(c)) for n, c in src.items()}
    offset = 0.0
    stays = [n for n in src if n in dst]
    if stays:
        offset = float(np.angle(src[stays[0]]) - np.angle(dst[stays[0]]))
        for n in stays[1:]:
            mismatch = np.angle(np.exp(1j * (np.angle(src[n]) - np.angle(dst[n]) - offset)))
            if abs(mismatch) > 1e-9:
                notes.append(f"relative phase on node {n} cannot be changed in place")
    for i, j, keep, deposit in plan:
        if node_phases is not None:
            p_src, p_tgt = node_phases[i], node_phases[j]
        else:
            p_tgt = 0.0
            p_src = 0.0
            if deposit is not None:
                p_src = float(np.angle(dst[deposit])) + offset - phase[i]
        if keep > 1e-12:
            bld.partial(i, j, keep, p_src, p_tgt)
        else:
            bld.full(i, j, p_src, p_tgt)
        phase[j] = phase[i] + p_src - p_tgt
    return bld, notes


def split_protocol(lattice, source, destination, omega_max=DEFAULT_OMEGA_MAX, rate=DEFAULT_RATE,
                   overlap=None, fast_rate=None, node_phases=None):
    """Map a P-state superposition onto another one.

    ``source`` and ``destination`` map node -> complex amplitude and must
    each be normalised.  The construction routes amplitude packets through
    full and partial moves; weight patterns it cannot realise exactly
    (merging packets, in-place phase changes) are recorded under
    ``meta["unsupported"]`` and left for :func:`cavitynet.tuning.optimize`.
    """
    src = _normalized(source, "source")
    dst = _normalized(destination, "destination")
    for n in list(src) + list(dst):
        if not 0 <= n < lattice.n_nodes:
            raise ValueError(f"node {n} outside the lattice")
    tm = _timing(omega_max, rate, overlap, fast_rate)
    plan, notes = _plan_routes(lattice, src, dst)
    bld, more = _build_moves(lattice, plan, tm, src, dst, node_phases)
    meta = {"generator": "split", "moves": [list(m[:3]) for m in plan]}
    if notes or more:
        meta["unsupported"] = notes + more
    initial = {f"p{n}": c for n, c in src.items()}
    target = TargetSpec.explicit(dst)
    if not plan:
        return Protocol(tuple(Schedule() for _ in range(lattice.n_nodes)), 0.0, initial, target, meta)
    return bld.protocol(initial, target, meta)


def w_state_protocol(lattice, start, nodes, **kwargs):
    """Spread ``|p_start>`` evenly over ``nodes``."""
    nodes = [int(n) for n in nodes]
    amp = 1.0 / math.sqrt(len(nodes))
    proto = split_protocol(lattice, {start: 1.0}, {n: amp for n in nodes}, **kwargs)
    proto.meta["generator"] = "w_state"
    return replace(proto, target=TargetSpec.w_state(nodes))


def fourier_protocol(lattice, phi0, start=0, nodes=None, **kwargs):
    """Fourier-like state on an open chain.

    Starting from ``|p_start>`` the excitation is split over ``nodes``
    (default: every other node) with equal weights.  Each node's laser
    carries the fixed phase ``n * phi0``; a move ``n -> n + 1`` then adds
    ``-phi0`` to the transported amplitude, so the final phases step by
    ``-phi0`` along the chain.  ``phi0 = 0`` gives the uniform state.
    """
    if lattice.kind != "chain":
        raise ValueError("fourier_protocol needs an open chain lattice")
    n = lattice.n_nodes
    if nodes is None:
        nodes = [k for k in range(n) if k != start]
    nodes = sorted(int(k) for k in nodes)
    phases = [k * phi0 for k in range(n)]
    amp = 1.0 / math.sqrt(len(nodes))
    proto = split_protocol(lattice, {start: 1.0}, {k: amp for k in nodes}, node_phases=phases, **kwargs)
    proto.meta.update(generator="fourier", phi0=phi0, spacing=-phi0)
    proto.meta.pop("unsupported", None)
    return replace(proto, target=TargetSpec.fourier(nodes, -phi0))
