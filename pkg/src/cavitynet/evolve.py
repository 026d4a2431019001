"""Time evolution ``i d psi/dt = H(t) psi`` in the single-excitation sector.

The default propagator is fixed-step RK4 with the Hamiltonian sampled at
the step start, midpoint and end.  ``expm_piecewise`` holds H constant at
the step midpoint and applies the exact exponential; it exists as an
independent cross-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import _kernels
from .darkstates import dark_manifold, dark_population, spectral_gap
from .errors import IntegrationAccuracyError, NoGapError, UndefinedFidelityError
from .hamiltonian import coupling_arrays, dense_matrix, norm_bound, snapshot_from_omega
from .sector import StateVector, build_basis
from .targets import TargetSpec

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "PhaseProfile",
    "TargetSpec",
    "integrate",
    "propagate",
    "fidelity",
    "phase_profile",
    "METHODS",
]

METHODS = ("rk4_fixed", "expm_piecewise")
_CHUNK = 20000
PHASE_FLOOR = 1e-8


@dataclass(frozen=True)
class IntegratorConfig:
    """Numerical settings.

    ``max_step_norm`` caps ``dt * ||H||_bound`` before a run starts.
    ``norm_drift_tol`` bounds ``|norm^2 - 1|`` in lossless runs.
    """

    step: float = 0.01
    method: str = "rk4_fixed"
    sample_every: int = 100
    norm_drift_tol: float = 1e-8
    max_step_norm: float = 0.5

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.sample_every < 1:
            raise ValueError("sample_every must be >= 1")

    def to_dict(self):
        return {
            "dt": self.step,
            "method": self.method,
            "sample_every": self.sample_every,
            "norm_drift_tol": self.norm_drift_tol,
            "max_step_norm": self.max_step_norm,
        }


@dataclass
class Trajectory:
    """Sampled observables of one run.

    Arrays are indexed by sample; ``probs`` and ``phases`` have one column
    per node.  ``phases`` is NaN where ``|A_i| < 1e-8``.
    """

    times: np.ndarray
    states: np.ndarray
    basis: object
    probs: np.ndarray
    phases: np.ndarray
    q_total: np.ndarray
    f_total: np.ndarray
    norm2: np.ndarray
    dark_pop: np.ndarray
    fidelity: np.ndarray
    conditional_fidelity: np.ndarray
    final: StateVector
    dissipative: bool = False
    meta: dict = field(default_factory=dict)

    def state_at(self, t):
        k = int(np.argmin(np.abs(self.times - t)))
        return StateVector(self.basis, self.states[k])

    @property
    def leakage(self):
        """Cavity plus fiber photon population at every sample."""
        return self.q_total + self.f_total

    def max_norm_increase(self):
        if self.norm2.size < 2:
            return 0.0
        return float(max(0.0, np.max(np.diff(self.norm2))))

    def columns(self):
        n = self.probs.shape[1]
        return (
            ["t"]
            + [f"P{i + 1}" for i in range(n)]
            + [f"theta{i + 1}" for i in range(n)]
            + ["Qtot", "Ftot", "norm2", "dark_pop", "fidelity"]
        )

    def table(self):
        return np.column_stack(
            [self.times, self.probs, self.phases, self.q_total, self.f_total, self.norm2, self.dark_pop, self.fidelity]
        )


def _time_grid(duration, step):
    nsteps = max(1, math.ceil(duration / step - 1e-9)) if duration > 0 else 0
    dt = duration / nsteps if nsteps else step
    return nsteps, dt


def _check_step(lattice, params, protocol, dt, config):
    s_max = protocol.omega_max() / abs(params.delta)
    bound = norm_bound(lattice, params, s_max)
    if dt * bound > config.max_step_norm:
        raise IntegrationAccuracyError(
            f"dt * ||H|| = {dt * bound:.3g} exceeds {config.max_step_norm}; use dt <= {config.max_step_norm / bound:.3g}"
        )


def _bond_arrays(lattice, params):
    bi = np.array([i for i, _ in lattice.bonds], dtype=np.int64)
    bj = np.array([j for _, j in lattice.bonds], dtype=np.int64)
    return bi, bj, params.bond_couplings(lattice.n_bonds).astype(np.float64)


def _run_rk4(lattice, params, protocol, psi0, nsteps, dt, sample_every):
    bi, bj, wb = _bond_arrays(lattice, params)
    kq, kf = params.effective_kappa, params.effective_kappa_f
    psi = np.array(psi0, dtype=np.complex128)
    n_samples = nsteps // sample_every
    samples = np.empty((n_samples, psi.size), dtype=np.complex128)
    pos = 0
    done = 0
    while done < nsteps:
        m = min(_CHUNK, nsteps - done)
        t = (done + 0.5 * np.arange(2 * m + 1)) * dt
        omega = protocol.omega(np.minimum(t, protocol.duration))
        s, sb = coupling_arrays(omega, params)
        pos = _kernels.rk4_chunk(
            psi, np.ascontiguousarray(s), np.ascontiguousarray(sb), bi, bj, wb, kq, kf, dt, sample_every, done, samples, pos
        )
        done += m
    return psi, samples[:pos]


def _run_expm(lattice, params, protocol, psi0, nsteps, dt, sample_every):
    basis = build_basis(lattice)
    psi = np.array(psi0, dtype=np.complex128)
    samples = []
    mids = (np.arange(nsteps) + 0.5) * dt
    omegas = protocol.omega(mids) if nsteps else np.zeros((0, lattice.n_nodes))
    for k in range(nsteps):
        h = dense_matrix(basis, snapshot_from_omega(omegas[k], params), params)
        psi = expm(-1j * dt * h) @ psi
        if (k + 1) % sample_every == 0:
            samples.append(psi.copy())
    return psi, np.array(samples, dtype=complex).reshape(len(samples), psi.size)


def propagate(lattice, params, protocol, config=IntegratorConfig(), psi0=None):
    """Final state only; the cheap path used by scans and the optimiser."""
    basis = build_basis(lattice)
    v0 = protocol.initial_vector(basis).amplitudes if psi0 is None else _amps(psi0)
    nsteps, dt = _time_grid(protocol.duration, config.step)
    if nsteps == 0:
        return StateVector(basis, v0)
    _check_step(lattice, params, protocol, dt, config)
    run = _run_rk4 if config.method == "rk4_fixed" else _run_expm
    psi, _ = run(lattice, params, protocol, v0, nsteps, dt, nsteps + 1)
    return StateVector(basis, psi)


def _amps(psi):
    return psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi, dtype=complex)


def integrate(lattice, params, protocol, config=IntegratorConfig(), psi0=None, target=None,
              track_dark=True):
    """Propagate ``protocol`` and record observables.

    The initial state comes from ``protocol.initial`` unless ``psi0`` is
    given; fidelities refer to ``target`` or else ``protocol.target``.

    Raises
    ------
    IntegrationAccuracyError
        If ``dt`` is too coarse for the coupling scale, or the norm of a
        lossless run drifts beyond ``config.norm_drift_tol``.
    """
    basis = build_basis(lattice)
    v0 = protocol.initial_vector(basis).amplitudes if psi0 is None else _amps(psi0)
    nsteps, dt = _time_grid(protocol.duration, config.step)
    if nsteps:
        _check_step(lattice, params, protocol, dt, config)
        run = _run_rk4 if config.method == "rk4_fixed" else _run_expm
        psi, samples = run(lattice, params, protocol, v0, nsteps, dt, config.sample_every)
        steps = np.arange(1, samples.shape[0] + 1) * config.sample_every
        if not steps.size or steps[-1] != nsteps:
            samples = np.vstack([samples, psi[None, :]])
            steps = np.append(steps, nsteps)
        states = np.vstack([v0[None, :], samples])
        times = np.concatenate([[0.0], steps * dt])
    else:
        psi = v0.copy()
        states = v0[None, :].copy()
        times = np.array([0.0])

    target = target if target is not None else protocol.target
    traj = _observables(basis, params, protocol, times, states, target, track_dark)
    traj.final = StateVector(basis, psi)
    traj.meta.update(dt=dt, nsteps=nsteps, method=config.method)
    if not params.dissipative:
        drift = float(np.max(np.abs(traj.norm2 - 1.0)))
        traj.meta["norm_drift"] = drift
        if drift > config.norm_drift_tol:
            raise IntegrationAccuracyError(
                f"norm drifted by {drift:.3g} (tolerance {config.norm_drift_tol:.3g}); reduce dt"
            )
    return traj


def _observables(basis, params, protocol, times, states, target, track_dark):
    n = basis.n_nodes
    a = states[:, :n]
    probs = np.abs(a) ** 2
    phases = np.where(np.abs(a) >= PHASE_FLOOR, np.angle(a), np.nan)
    q_total = np.sum(np.abs(states[:, n : 2 * n]) ** 2, axis=1)
    f_total = np.sum(np.abs(states[:, 2 * n :]) ** 2, axis=1)
    norm2 = np.sum(np.abs(states) ** 2, axis=1)
    if target is not None:
        tv = target.vector(basis).amplitudes
        fid = np.abs(states.conj() @ tv) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            cond = np.where(norm2 > 0, fid / norm2, np.nan)
    else:
        fid = np.full(times.shape, np.nan)
        cond = np.full(times.shape, np.nan)
    dark = np.full(times.shape, np.nan)
    if track_dark:
        omegas = protocol.omega(np.minimum(times, protocol.duration))
        for k in range(times.size):
            man = dark_manifold(basis, snapshot_from_omega(omegas[k], params), params)
            dark[k] = dark_population(states[k], man)
    return Trajectory(
        times=times,
        states=states,
        basis=basis,
        probs=probs,
        phases=phases,
        q_total=q_total,
        f_total=f_total,
        norm2=norm2,
        dark_pop=dark,
        fidelity=fid,
        conditional_fidelity=cond,
        final=None,
        dissipative=params.dissipative,
    )


def min_gap(lattice, params, protocol, times):
    """Smallest spectral gap over the given times (skipping all-dark instants)."""
    basis = build_basis(lattice)
    gaps = []
    for om in protocol.omega(np.minimum(times, protocol.duration)):
        try:
            gaps.append(spectral_gap(basis, snapshot_from_omega(om, params), params))
        except NoGapError:
            continue
    return float(min(gaps)) if gaps else float("nan")


def fidelity(psi, target, conditional=False):
    """``|<target|psi>|^2``, optionally divided by ``<psi|psi>``.

    ``target`` may be a :class:`TargetSpec` or a :class:`StateVector`.
    """
    tv = target.vector(psi.basis) if isinstance(target, TargetSpec) else target
    overlap = abs(np.vdot(tv.amplitudes, psi.amplitudes)) ** 2
    if not conditional:
        return float(overlap)
    n2 = psi.norm2()
    if n2 == 0:
        raise UndefinedFidelityError("conditional fidelity of a zero-norm state")
    return float(overlap / n2)


@dataclass(frozen=True)
class PhaseProfile:
    """Node phases relative to a reference node, in ``(-pi, pi]``.

    ``undefined`` marks nodes whose amplitude is below ``1e-8``;
    ``equispacing`` is ``max |(theta_{k+1} - theta_k) - spacing|`` over
    consecutive defined nodes of ``nodes`` (NaN if no spacing was given).
    """

    time: float
    phases: np.ndarray
    undefined: np.ndarray
    equispacing: float


def _wrap(x):
    return (np.asarray(x) + np.pi) % (2 * np.pi) - np.pi


def phase_profile(traj, at, reference=0, spacing=None, nodes=None):
    k = int(np.argmin(np.abs(traj.times - at)))
    amps = traj.states[k, : traj.basis.n_nodes]
    undefined = np.abs(amps) < PHASE_FLOOR
    if undefined[reference]:
        raise ValueError(f"reference node {reference} has no amplitude at t = {traj.times[k]}")
    theta = _wrap(np.angle(amps) - np.angle(amps[reference]))
    theta = np.where(undefined, np.nan, theta)
    metric = float("nan")
    if spacing is not None:
        order = list(range(len(amps))) if nodes is None else list(nodes)
        steps = [
            abs(float(_wrap(theta[b] - theta[a] - spacing)))
            for a, b in zip(order, order[1:])
            if not (undefined[a] or undefined[b])
        ]
        metric = max(steps) if steps else float("nan")
    return PhaseProfile(float(traj.times[k]), theta, undefined, metric)
