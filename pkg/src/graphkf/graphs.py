"""Graph topologies and adjacency normalizations.

A topology is a simple undirected graph over ``n`` nodes given by a binary
adjacency matrix with a zero diagonal. Both normalizations used by the
models treat self-loops as implicitly present: degrees are counted on
``I + A``.
"""

import numpy as np

from .errors import DimensionError

__all__ = ["sym_normalize", "row_normalize", "GraphTopology"]


def _check_adjacency(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"adjacency must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DimensionError("adjacency has non-finite entries")
    if np.any(a < 0):
        raise DimensionError("adjacency has negative entries")
    if np.any(np.diag(a) != 0):
        raise DimensionError("adjacency diagonal must be zero (self-loops are implicit)")
    return a


def sym_normalize(a: np.ndarray) -> np.ndarray:
    """Symmetric self-loop normalization ``D^{-1/2} (I + A) D^{-1/2}``.

    ``D`` holds node degrees with the self-loop counted, i.e. the row sums
    of ``I + A``. The result is symmetric for symmetric input and its
    spectrum lies in [-1, 1]; isolated nodes normalize to a unit self-loop.
    """
    a = _check_adjacency(a)
    m = np.eye(a.shape[0]) + a
    d = m.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(d)
    return m * inv_sqrt[:, None] * inv_sqrt[None, :]


def row_normalize(a: np.ndarray) -> np.ndarray:
    """Row-stochastic normalization: each nonzero row rescaled to sum 1.

    Zero rows stay zero. Used by message-passing transitions, which expect
    neighbor averages rather than sums.
    """
    a = _check_adjacency(a)
    out = a.copy()
    sums = out.sum(axis=1)
    nz = sums > 0
    out[nz] /= sums[nz, None]
    return out


class GraphTopology:
    """Immutable wrapper holding an adjacency matrix and its normalizations.

    Attributes
    ----------
    adjacency : (n, n) ndarray
        Binary undirected adjacency, zero diagonal.
    normalized_sym : (n, n) ndarray
        ``sym_normalize(adjacency)``, cached.
    normalized_row : (n, n) ndarray
        ``row_normalize(adjacency)``, cached.
    """

    def __init__(self, adjacency: np.ndarray):
        a = _check_adjacency(adjacency)
        if not np.array_equal(a, a.T):
            raise DimensionError("adjacency must be symmetric")
        self.adjacency = a
        self.adjacency.setflags(write=False)
        self.normalized_sym = sym_normalize(a)
        self.normalized_sym.setflags(write=False)
        self.normalized_row = row_normalize(a)
        self.normalized_row.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    def edges(self) -> list[tuple[int, int]]:
        """Sorted edge list as (u, v) pairs with u < v."""
        iu, iv = np.nonzero(np.triu(self.adjacency, k=1))
        return list(zip(iu.tolist(), iv.tolist()))

    @classmethod
    def from_edges(cls, n_nodes: int, edges) -> "GraphTopology":
        a = np.zeros((n_nodes, n_nodes))
        for u, v in edges:
            a[u, v] = a[v, u] = 1.0
        return cls(a)

    def is_connected(self) -> bool:
        """Breadth-first reachability from node 0."""
        n = self.n_nodes
        seen = np.zeros(n, dtype=bool)
        stack = [0]
        seen[0] = True
        while stack:
            u = stack.pop()
            for v in np.nonzero(self.adjacency[u])[0]:
                if not seen[v]:
                    seen[v] = True
                    stack.append(int(v))
        return bool(seen.all())

    def __eq__(self, other):
        return isinstance(other, GraphTopology) and np.array_equal(self.adjacency, other.adjacency)

    def __repr__(self):
        return f"GraphTopology(n_nodes={self.n_nodes}, n_edges={len(self.edges())})"
