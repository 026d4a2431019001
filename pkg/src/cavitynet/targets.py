"""Target states for fidelity evaluation (all supported on P slots)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sector import p_state_superposition

__all__ = ["TargetSpec"]

_KINDS = ("site", "w_state", "fourier", "explicit")


@dataclass(frozen=True)
class TargetSpec:
    """Description of a target state.

    kind
        ``site``: ``|p_i>`` for ``nodes=(i,)``.
        ``w_state``: equal-weight superposition over ``nodes``.
        ``fourier``: ``exp(i q.R(x))`` over ``nodes`` with lattice
        coordinates ``R(x)``.
        ``explicit``: ``amplitudes`` is a tuple of ``(node, complex)``.
    """

    kind: str
    nodes: tuple = ()
    q: tuple = (0.0, 0.0)
    amplitudes: tuple = ()

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown target kind {self.kind!r}; expected one of {_KINDS}")
        object.__setattr__(self, "nodes", tuple(int(n) for n in self.nodes))
        object.__setattr__(self, "q", tuple(float(x) for x in self.q))
        if self.kind == "site" and len(self.nodes) != 1:
            raise ValueError("a site target needs exactly one node")
        if self.kind in ("w_state", "fourier") and not self.nodes:
            raise ValueError(f"{self.kind} target needs a node set")
        if self.kind == "explicit":
            amps = tuple((int(n), complex(c)) for n, c in self.amplitudes)
            if not amps:
                raise ValueError("explicit target needs amplitudes")
            object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def site(cls, i):
        return cls("site", (i,))

    @classmethod
    def w_state(cls, nodes):
        return cls("w_state", tuple(nodes))

    @classmethod
    def fourier(cls, nodes, q):
        q = (float(q), 0.0) if np.isscalar(q) else tuple(q)
        return cls("fourier", tuple(nodes), q)

    @classmethod
    def explicit(cls, weights):
        items = weights.items() if isinstance(weights, dict) else weights
        return cls("explicit", amplitudes=tuple(items))

    def weights(self, lattice):
        """Normalised ``{node: amplitude}`` mapping."""
        if self.kind == "site":
            out = {self.nodes[0]: 1.0 + 0j}
        elif self.kind == "w_state":
            out = {n: 1.0 + 0j for n in self.nodes}
        elif self.kind == "fourier":
            q = np.asarray(self.q)
            out = {n: np.exp(1j * float(q @ np.asarray(lattice.coords[n], dtype=float))) for n in self.nodes}
        else:
            out = dict(self.amplitudes)
        for n in out:
            if not 0 <= n < lattice.n_nodes:
                raise ValueError(f"target node {n} outside the lattice")
        total = np.sqrt(sum(abs(c) ** 2 for c in out.values()))
        if total == 0:
            raise ValueError("target has zero norm")
        return {n: complex(c / total) for n, c in out.items()}

    def vector(self, basis):
        return p_state_superposition(basis, self.weights(basis.lattice))

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind == "explicit":
            out["amplitudes"] = [[n, c.real, c.imag] for n, c in self.amplitudes]
        else:
            out["nodes"] = list(self.nodes)
        if self.kind == "fourier":
            out["q"] = list(self.q)
        return out

    @classmethod
    def from_dict(cls, data):
        kind = data["kind"]
        if kind == "explicit":
            return cls("explicit", amplitudes=tuple((n, complex(re, im)) for n, re, im in data["amplitudes"]))
        return cls(kind, tuple(data.get("nodes", ())), tuple(data.get("q", (0.0, 0.0))))
