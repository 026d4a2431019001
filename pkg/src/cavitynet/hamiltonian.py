"""Effective single-excitation Hamiltonian of the cavity/fiber network.

Units: hbar = 1 and the atom-cavity coupling g = 1, so every rate is in
units of g and time in units of 1/g.

Matrix elements, for node ``i`` and bond ``b = (i, j)``::

    <q_i|H|p_i> = s_i            s_i = g * Omega_i / (Delta + i*gamma)
    <p_i|H|q_i> = g * conj(Omega_i) / (Delta + i*gamma)
    <q_i|H|f_b> = <f_b|H|q_i> = w_b
    <q_i|H|q_i> = -i * kappa,    <f_b|H|f_b> = -i * kappa_f

With ``dissipative=False`` the loss rates are dropped.  ``gamma_mode``
selects how the decay of the eliminated level enters the lossy model:

``"conjugate"`` (default)
    ``s_i`` is modified first and the Hermitian conjugate taken after, so
    ``<p_i|H|q_i> = conj(s_i)``.  gamma rescales and rotates the couplings;
    photon loss comes from kappa and kappa_f only.
``"shared"``
    Both elements carry the same complex denominator and only the drive
    phase is conjugated.  The resulting anti-Hermitian part is purely
    off-diagonal, hence indefinite: some states gain norm.  Kept for
    comparison; not passive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BasisMismatchError, MatrixTooLargeError
from .sector import StateVector

__all__ = [
    "SystemParams",
    "CouplingSnapshot",
    "snapshot",
    "snapshot_from_omega",
    "coupling_arrays",
    "apply",
    "dense_matrix",
    "norm_bound",
    "DEFAULT_DENSE_CAP",
]

DEFAULT_DENSE_CAP = 2000
GAMMA_MODES = ("conjugate", "shared")


@dataclass(frozen=True)
class SystemParams:
    """Physical rates in units of g."""

    delta: float = 3.0
    w: float = 10.0
    gamma: float = 0.0
    kappa: float = 0.0
    kappa_f: float = 0.0
    dissipative: bool = False
    w_bonds: tuple | None = field(default=None)
    gamma_mode: str = "conjugate"

    def __post_init__(self):
        if not abs(self.delta) > 0:
            raise ValueError("detuning delta must be nonzero")
        if not self.w > 0:
            raise ValueError("cavity-fiber coupling w must be positive")
        for name in ("gamma", "kappa", "kappa_f"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.gamma_mode not in GAMMA_MODES:
            raise ValueError(f"gamma_mode must be one of {GAMMA_MODES}")
        if self.w_bonds is not None:
            object.__setattr__(self, "w_bonds", tuple(float(x) for x in self.w_bonds))
            if any(x <= 0 for x in self.w_bonds):
                raise ValueError("per-bond couplings must be positive")

    @property
    def effective_gamma(self):
        return self.gamma if self.dissipative else 0.0

    @property
    def effective_kappa(self):
        return self.kappa if self.dissipative else 0.0

    @property
    def effective_kappa_f(self):
        return self.kappa_f if self.dissipative else 0.0

    def bond_couplings(self, n_bonds):
        if self.w_bonds is None:
            return np.full(n_bonds, float(self.w))
        if len(self.w_bonds) != n_bonds:
            raise ValueError(f"w_bonds has {len(self.w_bonds)} entries for {n_bonds} bonds")
        return np.asarray(self.w_bonds, dtype=float)

    def hermitian(self):
        """Same couplings with every loss channel switched off."""
        return self.replace(dissipative=False)

    def replace(self, **changes):
        data = {
            "delta": self.delta,
            "w": self.w,
            "gamma": self.gamma,
            "kappa": self.kappa,
            "kappa_f": self.kappa_f,
            "dissipative": self.dissipative,
            "w_bonds": self.w_bonds,
            "gamma_mode": self.gamma_mode,
        }
        data.update(changes)
        return SystemParams(**data)

    def to_dict(self):
        out = {
            "delta": self.delta,
            "w": self.w,
            "gamma": self.gamma,
            "kappa": self.kappa,
            "kappa_f": self.kappa_f,
            "dissipative": self.dissipative,
        }
        if self.w_bonds is not None:
            out["w_bonds"] = list(self.w_bonds)
        if self.gamma_mode != "conjugate":
            out["gamma_mode"] = self.gamma_mode
        return out


@dataclass(frozen=True)
class CouplingSnapshot:
    """Couplings at one instant.

    ``s`` is the p -> q element s_i; ``s_back`` is the q -> p element,
    ``conj(s)`` except in the ``"shared"`` gamma mode.
    """

    s: np.ndarray
    s_back: np.ndarray
    omega: np.ndarray


def coupling_arrays(omega, params):
    """Vectorised ``(s, s_back)`` for Rabi values of any shape."""
    omega = np.asarray(omega, dtype=complex)
    denom = params.delta + 1j * params.effective_gamma
    s = omega / denom
    if params.gamma_mode == "shared":
        return s, np.conj(omega) / denom
    return s, np.conj(s)


def snapshot_from_omega(omega, params):
    omega = np.asarray(omega, dtype=complex)
    s, s_back = coupling_arrays(omega, params)
    return CouplingSnapshot(s, s_back, omega)


def snapshot(protocol, params, t):
    """Couplings produced by ``protocol`` at time ``t``."""
    return snapshot_from_omega(protocol.omega(t), params)


def _check(basis, snap):
    if snap.s.shape != (basis.n_nodes,):
        raise BasisMismatchError(f"snapshot has {snap.s.shape[0]} couplings for {basis.n_nodes} nodes")


def apply(basis, snap, params, psi):
    """Matrix-free ``H @ psi``; accepts a StateVector or a raw amplitude array."""
    _check(basis, snap)
    raw = isinstance(psi, np.ndarray)
    v = psi if raw else psi.amplitudes
    if v.shape != (basis.dim,):
        raise BasisMismatchError(f"state of length {v.shape[0]} on a basis of dim {basis.dim}")
    if not raw and psi.basis.lattice != basis.lattice:
        raise BasisMismatchError("state vector lives on a different lattice")
    n = basis.n_nodes
    lat = basis.lattice
    bi = np.fromiter((i for i, _ in lat.bonds), dtype=int, count=lat.n_bonds)
    bj = np.fromiter((j for _, j in lat.bonds), dtype=int, count=lat.n_bonds)
    wb = params.bond_couplings(lat.n_bonds)
    a, b, f = v[:n], v[n : 2 * n], v[2 * n :]
    out = np.empty_like(v, dtype=complex)
    out[:n] = snap.s_back * b
    rq = snap.s * a - 1j * params.effective_kappa * b
    wf = wb * f
    np.add.at(rq, bi, wf)
    np.add.at(rq, bj, wf)
    out[n : 2 * n] = rq
    out[2 * n :] = wb * (b[bi] + b[bj]) - 1j * params.effective_kappa_f * f
    return out if raw else StateVector(basis, out)


def dense_matrix(basis, snap, params, cap=DEFAULT_DENSE_CAP):
    """Dense ``dim x dim`` matrix of the Hamiltonian."""
    _check(basis, snap)
    dim = basis.dim
    if dim > cap:
        raise MatrixTooLargeError(f"dimension {dim} exceeds the dense cap {cap}")
    n = basis.n_nodes
    h = np.zeros((dim, dim), dtype=complex)
    idx = np.arange(n)
    h[n + idx, idx] = snap.s
    h[idx, n + idx] = snap.s_back
    h[n + idx, n + idx] = -1j * params.effective_kappa
    wb = params.bond_couplings(basis.n_bonds)
    for b, (i, j) in enumerate(basis.lattice.bonds):
        fb = 2 * n + b
        for k in (i, j):
            h[n + k, fb] = wb[b]
            h[fb, n + k] = wb[b]
        h[fb, fb] = -1j * params.effective_kappa_f
    return h


def norm_bound(lattice, params, s_max):
    """Cheap upper bound on the operator norm of H.

    The cavity/fiber block has norm ``w * sigma_max(K)`` for the unsigned
    incidence matrix ``K``; ``sigma_max(K)**2 <= 2 * max_degree``.
    """
    w_max = float(np.max(params.bond_couplings(lattice.n_bonds)))
    return (
        w_max * np.sqrt(2.0 * lattice.max_degree())
        + abs(s_max)
        + params.effective_kappa
        + params.effective_kappa_f
    )
