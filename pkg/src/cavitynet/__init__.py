"""Adiabatic passage through dark states of fiber-coupled cavity networks."""

from .darkstates import bond_dark_state, dark_manifold, dark_population, spectral_gap
from .evolve import IntegratorConfig, fidelity, integrate, phase_profile, propagate
from .hamiltonian import SystemParams, apply, dense_matrix, snapshot, snapshot_from_omega
from .lattice import Lattice, build_chain, build_custom, build_square
from .protocol import (
    Protocol,
    RampSegment,
    Schedule,
    empty_protocol,
    fourier_protocol,
    split_protocol,
    transfer_protocol,
    w_state_protocol,
)
from .sector import SectorBasis, StateVector, build_basis, inner, norm, pure_state, superpose
from .targets import TargetSpec
from .tuning import optimize

__version__ = "0.1.0"
