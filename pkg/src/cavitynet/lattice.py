"""Cavity/fiber network topologies.

Nodes are cavities (each holding one atom), bonds are fibers.  A bond is
stored as an explicit ``(i, j)`` pair with a dense index ``b`` given by its
position in :attr:`Lattice.bonds`, so chains, rings, square lattices and
arbitrary graphs all go through the same Hamiltonian assembly.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DisconnectedGraphError, InvalidEdgeError, InvalidSizeError

__all__ = ["Lattice", "build_chain", "build_square", "build_custom"]


@dataclass(frozen=True)
class Lattice:
    """Immutable node/bond graph.

    Parameters
    ----------
    n_nodes : int
        Number of cavities ``N``.
    bonds : tuple of (int, int)
        Fiber links; bond ``b`` connects ``bonds[b][0]`` and ``bonds[b][1]``.
    coords : tuple of (int, int)
        Integer position of every node, used for Fourier phase patterns.
    kind : str
        Descriptor of the builder that produced the lattice.
    """

    n_nodes: int
    bonds: tuple
    coords: tuple
    kind: str = "custom"
    _adjacency: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        n = self.n_nodes
        if n < 2:
            raise InvalidSizeError(f"a lattice needs at least 2 nodes, got {n}")
        seen = set()
        for i, j in self.bonds:
            if not (0 <= i < n and 0 <= j < n):
                raise InvalidEdgeError(f"bond ({i}, {j}) refers to a node outside 0..{n - 1}")
            if i == j:
                raise InvalidEdgeError(f"self-loop on node {i}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise InvalidEdgeError(f"duplicate bond {key}")
            seen.add(key)
        if len(self.coords) != n:
            raise InvalidSizeError("one coordinate per node is required")
        adj = [[] for _ in range(n)]
        for b, (i, j) in enumerate(self.bonds):
            adj[i].append((j, b))
            adj[j].append((i, b))
        object.__setattr__(self, "_adjacency", tuple(tuple(a) for a in adj))
        if not self._connected():
            raise DisconnectedGraphError("lattice graph is not connected")

    @property
    def n_bonds(self):
        return len(self.bonds)

    def neighbors(self, i):
        """Nodes adjacent to ``i`` in bond order."""
        return [j for j, _ in self._adjacency[i]]

    def bonds_of(self, i):
        """Indices of the bonds touching node ``i``."""
        return [b for _, b in self._adjacency[i]]

    def bond_index(self, i, j):
        """Index of the bond joining ``i`` and ``j``, or ``None``."""
        for k, b in self._adjacency[i]:
            if k == j:
                return b
        return None

    def adjacent(self, i, j):
        return self.bond_index(i, j) is not None

    def incidence(self):
        """Unsigned node-bond incidence matrix of shape ``(N, N_B)``."""
        k = np.zeros((self.n_nodes, self.n_bonds))
        for b, (i, j) in enumerate(self.bonds):
            k[i, b] = 1.0
            k[j, b] = 1.0
        return k

    def max_degree(self):
        return max(len(a) for a in self._adjacency)

    def shortest_path(self, start, end, blocked=()):
        """Breadth-first shortest path avoiding ``blocked`` interior nodes.

        Returns the node list including both endpoints, or ``None``.
        """
        blocked = set(blocked) - {start, end}
        prev = {start: None}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            if u == end:
                break
            for v in self.neighbors(u):
                if v not in prev and v not in blocked:
                    prev[v] = u
                    queue.append(v)
        if end not in prev:
            return None
        path = [end]
        while prev[path[-1]] is not None:
            path.append(prev[path[-1]])
        return path[::-1]

    def _connected(self):
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in self.neighbors(u):
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n_nodes

    def describe(self):
        """JSON-friendly descriptor."""
        return {
            "kind": self.kind,
            "n_nodes": self.n_nodes,
            "bonds": [list(b) for b in self.bonds],
            "coords": [list(c) for c in self.coords],
        }


def build_chain(n, periodic=False):
    """Linear chain of ``n`` cavities, closed into a ring if ``periodic``."""
    if n < 2:
        raise InvalidSizeError(f"chain needs n >= 2, got {n}")
    if periodic and n < 3:
        raise InvalidSizeError(f"ring needs n >= 3, got {n}")
    bonds = [(i, i + 1) for i in range(n - 1)]
    if periodic:
        bonds.append((n - 1, 0))
    return Lattice(n, tuple(bonds), tuple((i, 0) for i in range(n)), "ring" if periodic else "chain")


def build_square(nx, ny, periodic=False):
    """Row-major ``nx`` by ``ny`` square lattice.

    Every site is bonded to its right (+x) and upper (+y) neighbour; with
    ``periodic`` the last column/row wraps around.  A periodic direction of
    length 2 would duplicate bonds and is rejected.
    """
    if nx < 1 or ny < 1 or nx * ny < 2:
        raise InvalidSizeError(f"degenerate square lattice {nx}x{ny}")
    if periodic and (nx < 3 or ny < 3):
        # a wrap on a length-2 (or 1) direction duplicates (or self-loops) a bond
        raise InvalidSizeError(f"periodic square lattice needs nx, ny >= 3, got {nx}x{ny}")
    bonds = []
    for y in range(ny):
        for x in range(nx):
            i = y * nx + x
            if x + 1 < nx:
                bonds.append((i, i + 1))
            elif periodic:
                bonds.append((i, y * nx))
            if y + 1 < ny:
                bonds.append((i, i + nx))
            elif periodic:
                bonds.append((i, x))
    coords = tuple((i % nx, i // nx) for i in range(nx * ny))
    return Lattice(nx * ny, tuple(bonds), coords, "square")


def build_custom(n, edges, coords=None):
    """Arbitrary connected graph with bond indices in input order."""
    edges = tuple((int(i), int(j)) for i, j in edges)
    if coords is None:
        coords = tuple((i, 0) for i in range(n))
    else:
        coords = tuple((int(c[0]), int(c[1])) for c in coords)
    return Lattice(int(n), edges, coords, "custom")
