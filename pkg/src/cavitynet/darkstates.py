"""Zero-energy (dark) states of the lossless Hamiltonian.

Two views are provided: the closed-form state attached to one fiber bond,
and the numerically computed null space of the full Hamiltonian, which is
spanned by the bond states whenever every laser is on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateDarkStateError, NoGapError
from .hamiltonian import dense_matrix, snapshot_from_omega
from .sector import StateVector

__all__ = [
    "DarkManifold",
    "bond_dark_state",
    "bond_dark_states",
    "gram_matrix",
    "dark_manifold",
    "dark_population",
    "spectral_gap",
    "DEFAULT_RELATIVE_TOL",
]

DEFAULT_RELATIVE_TOL = 1e-10


@dataclass(frozen=True)
class DarkManifold:
    """Orthonormal basis of the null space of H.

    ``vectors`` has shape ``(k, dim)``; row ``m`` is the m-th basis vector.
    ``tolerance`` is the absolute eigenvalue cut that was applied.
    """

    vectors: np.ndarray
    tolerance: float
    eigenvalues: np.ndarray

    @property
    def dimension(self):
        return self.vectors.shape[0]

    def projector(self):
        return self.vectors.T @ self.vectors.conj()


def _bond_pair(basis, bond):
    if isinstance(bond, (tuple, list)):
        i, j = int(bond[0]), int(bond[1])
        b = basis.lattice.bond_index(i, j)
        if b is None:
            raise ValueError(f"nodes {i} and {j} are not bonded")
        return b, i, j
    b = int(bond)
    i, j = basis.lattice.bonds[b]
    return b, i, j


def bond_dark_state(basis, snap, bond, params):
    """Normalised dark state living on bond ``b = (i, j)``.

    Uses the form ``s_j w |p_i> - s_i s_j |f_b> + s_i w |p_j>``, which is the
    textbook ``1/s_i, -1/w, 1/s_j`` state multiplied through by
    ``s_i s_j w`` and therefore stays finite when one laser is off.  The
    global phase is fixed so the ``p_i`` amplitude is real and positive (or
    the ``p_j`` amplitude, when ``s_j = 0``).

    Raises
    ------
    DegenerateDarkStateError
        If both lasers on the bond are off.
    """
    b, i, j = _bond_pair(basis, bond)
    si, sj = complex(snap.s[i]), complex(snap.s[j])
    if si == 0 and sj == 0:
        raise DegenerateDarkStateError(f"both couplings on bond {b} = ({i}, {j}) vanish")
    w = params.bond_couplings(basis.n_bonds)[b]
    # divide through by max |s| first so tiny couplings cannot underflow
    m = max(abs(si), abs(sj))
    ui, uj = si / m, sj / m
    amps = np.zeros(basis.dim, dtype=complex)
    amps[basis.p(i)] = uj * w
    amps[basis.f(b)] = -si * uj
    amps[basis.p(j)] = ui * w
    ref = sj if sj != 0 else si
    amps *= np.conj(ref) / abs(ref)
    amps /= np.linalg.norm(amps)
    return StateVector(basis, amps)


def bond_dark_states(basis, snap, params):
    return [bond_dark_state(basis, snap, b, params) for b in range(basis.n_bonds)]


def gram_matrix(states):
    m = np.array([v.amplitudes for v in states])
    return m.conj() @ m.T


def _hermitian_snapshot(snap, params):
    if not params.dissipative:
        return snap, params
    herm = params.hermitian()
    return snapshot_from_omega(snap.omega, herm), herm


def _spectrum(basis, snap, params):
    snap, params = _hermitian_snapshot(snap, params)
    h = dense_matrix(basis, snap, params)
    return np.linalg.eigh(h)


def dark_manifold(basis, snap, params, tolerance=DEFAULT_RELATIVE_TOL):
    """Numerical null space of H.

    ``tolerance`` is relative to the largest ``|E|``.  In the lossy model
    the manifold of the lossless part is returned.
    """
    evals, evecs = _spectrum(basis, snap, params)
    scale = np.max(np.abs(evals))
    cut = tolerance * scale
    mask = np.abs(evals) <= cut
    return DarkManifold(evecs[:, mask].T.copy(), float(cut), evals)


def dark_population(psi, manifold):
    """Weight of ``psi`` inside the manifold, ``sum_k |<v_k|psi>|^2``."""
    v = psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi)
    if manifold.dimension == 0:
        return 0.0
    c = manifold.vectors.conj() @ v
    return float(np.vdot(c, c).real)


def spectral_gap(basis, snap, params, tolerance=DEFAULT_RELATIVE_TOL):
    """Smallest nonzero ``|E|``, separating dark from bright states."""
    evals, _ = _spectrum(basis, snap, params)
    mag = np.abs(evals)
    scale = mag.max()
    bright = mag[mag > tolerance * scale]
    if scale == 0 or bright.size == 0:
        raise NoGapError("every eigenvalue vanishes; there is no bright state")
    return float(bright.min())
