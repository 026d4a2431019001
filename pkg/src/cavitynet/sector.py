"""Single-excitation sector basis and state vectors.

The sector holds exactly one quantum: either one atom flipped to ``a0``
(a P state), one photon in a cavity (Q state) or one photon in a fiber
(F state).  Slots are laid out as ``[P_0..P_{N-1} | Q_0..Q_{N-1} | F_0..F_{NB-1}]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BasisMismatchError, LabelError
from .lattice import Lattice

__all__ = [
    "SectorBasis",
    "StateVector",
    "build_basis",
    "pure_state",
    "inner",
    "norm",
    "superpose",
    "p_state_superposition",
]


@dataclass(frozen=True)
class SectorBasis:
    lattice: Lattice

    @property
    def n_nodes(self):
        return self.lattice.n_nodes

    @property
    def n_bonds(self):
        return self.lattice.n_bonds

    @property
    def dim(self):
        return 2 * self.n_nodes + self.n_bonds

    def p(self, i):
        self._check(i, self.n_nodes, "p")
        return i

    def q(self, i):
        self._check(i, self.n_nodes, "q")
        return self.n_nodes + i

    def f(self, b):
        self._check(b, self.n_bonds, "f")
        return 2 * self.n_nodes + b

    @property
    def p_slice(self):
        return slice(0, self.n_nodes)

    @property
    def q_slice(self):
        return slice(self.n_nodes, 2 * self.n_nodes)

    @property
    def f_slice(self):
        return slice(2 * self.n_nodes, self.dim)

    def slot(self, label):
        """Slot index for a label such as ``("p", 3)`` or ``"f2"``."""
        if isinstance(label, str):
            kind, idx = label[0], int(label[1:])
        else:
            kind, idx = label
        try:
            return {"p": self.p, "q": self.q, "f": self.f}[kind](int(idx))
        except KeyError:
            raise LabelError(f"unknown slot kind {kind!r}") from None

    def slot_names(self):
        return (
            [f"p{i}" for i in range(self.n_nodes)]
            + [f"q{i}" for i in range(self.n_nodes)]
            + [f"f{b}" for b in range(self.n_bonds)]
        )

    def describe(self):
        return {"dim": self.dim, "slots": self.slot_names(), "lattice": self.lattice.describe()}

    @staticmethod
    def _check(idx, size, kind):
        if not 0 <= idx < size:
            raise LabelError(f"{kind}({idx}) out of range 0..{size - 1}")


class StateVector:
    """Complex amplitudes over a :class:`SectorBasis`.

    Behaves as a value: arithmetic returns new vectors and the amplitude
    array is copied on construction.
    """

    __slots__ = ("basis", "amplitudes")

    def __init__(self, basis, amplitudes):
        amps = np.array(amplitudes, dtype=complex)
        if amps.shape != (basis.dim,):
            raise BasisMismatchError(f"expected {basis.dim} amplitudes, got shape {amps.shape}")
        self.basis = basis
        self.amplitudes = amps

    @property
    def A(self):
        return self.amplitudes[self.basis.p_slice]

    @property
    def B(self):
        return self.amplitudes[self.basis.q_slice]

    @property
    def F(self):
        return self.amplitudes[self.basis.f_slice]

    def norm2(self):
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def normalized(self):
        return StateVector(self.basis, self.amplitudes / np.sqrt(self.norm2()))

    def __add__(self, other):
        _same_basis(self, other)
        return StateVector(self.basis, self.amplitudes + other.amplitudes)

    def __sub__(self, other):
        _same_basis(self, other)
        return StateVector(self.basis, self.amplitudes - other.amplitudes)

    def __mul__(self, c):
        return StateVector(self.basis, self.amplitudes * c)

    __rmul__ = __mul__

    def __repr__(self):
        return f"StateVector(dim={self.basis.dim}, norm2={self.norm2():.6g})"

    def to_json(self):
        return {
            "basis": self.basis.describe(),
            "amplitudes": [[float(a.real), float(a.imag)] for a in self.amplitudes],
        }

    @classmethod
    def from_json(cls, basis, data):
        amps = data["amplitudes"] if isinstance(data, dict) else data
        return cls(basis, [complex(re, im) for re, im in amps])


def _same_basis(a, b):
    if a.basis.dim != b.basis.dim or a.basis.lattice != b.basis.lattice:
        raise BasisMismatchError("state vectors live on different bases")


def build_basis(lattice):
    return SectorBasis(lattice)


def pure_state(basis, label):
    """Unit vector on a single slot, e.g. ``pure_state(basis, ("p", 0))``."""
    amps = np.zeros(basis.dim, dtype=complex)
    amps[basis.slot(label)] = 1.0
    return StateVector(basis, amps)


def inner(a, b):
    """``<a|b>``, conjugate-linear in ``a``."""
    _same_basis(a, b)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def norm(a):
    return float(np.sqrt(a.norm2()))


def superpose(terms, normalize=False):
    """Linear combination ``sum(c * v for c, v in terms)``."""
    terms = list(terms)
    if not terms:
        raise ValueError("superpose needs at least one term")
    basis = terms[0][1].basis
    amps = np.zeros(basis.dim, dtype=complex)
    for c, v in terms:
        _same_basis(terms[0][1], v)
        amps += c * v.amplitudes
    out = StateVector(basis, amps)
    return out.normalized() if normalize else out


def p_state_superposition(basis, weights):
    """State supported on P slots from a ``{node: amplitude}`` mapping."""
    amps = np.zeros(basis.dim, dtype=complex)
    for node, c in weights.items():
        amps[basis.p(int(node))] = c
    return StateVector(basis, amps)
