"""Finite-difference builders for the scenario problems.

Each builder returns a :class:`DiscreteProblem`: the matrices A, C, L and
B1..B4 of the abstract second-order system

    u'' = A u + C u'                          (interior)
    (L u)'' = B1 u + B2 u' + B3 L u + B4 L u'   (dynamic boundary)

together with a case tag that tells ``coupling`` which reduction applies.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .errors import DimensionMismatch, DisconnectedGraph, InvalidSize, RankDeficientL
from .matcore import as_cmat

CASE_TAGS = (
    "unbounded_trace",
    "bounded_trace",
    "strong_damping_unbounded",
    "strong_damping_bounded",
)


def fd_weights(z: float, nodes, order: int) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at ``z``.

    Fornberg's recursion; exact on polynomials of degree < len(nodes).
    """
    x = np.asarray(nodes, dtype=float)
    n = x.size
    if n <= order:
        raise ValueError(f"need more than {order} nodes, got {n}")
    c = np.zeros((n, order + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0] - z
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def second_difference(n: int) -> np.ndarray:
    """Dirichlet second-difference matrix tridiag(1, -2, 1)/h^2 on n interior nodes of [0, 1]."""
    h = 1.0 / (n + 1)
    return (np.diag(-2.0 * np.ones(n)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)) / h**2


@dataclass(frozen=True)
class Grid1D:
    n_interior: int

    def __post_init__(self):
        if int(self.n_interior) != self.n_interior or self.n_interior < 4:
            raise InvalidSize(f"n_interior must be an integer >= 4, got {self.n_interior}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n_interior + 1)

    @property
    def nodes(self) -> np.ndarray:
        """All n+2 nodes including both endpoints."""
        return np.arange(self.n_interior + 2) * self.h


@dataclass(frozen=True)
class NetworkGraph:
    n_vertices: int
    incidence: tuple[tuple[int, int], ...]
    edge_grids: tuple[Grid1D, ...]

    def __post_init__(self):
        inc = tuple((int(a), int(b)) for a, b in self.incidence)
        object.__setattr__(self, "incidence", inc)
        if len(self.edge_grids) != len(inc):
            raise DimensionMismatch(f"{len(inc)} edges but {len(self.edge_grids)} grids")
        if self.n_vertices < 1 or not inc:
            raise InvalidSize("a network needs at least one edge and one vertex")
        for a, b in inc:
            if not (0 <= a < self.n_vertices and 0 <= b < self.n_vertices):
                raise DimensionMismatch(f"edge ({a}, {b}) references a vertex >= {self.n_vertices}")
        rows = [a for a, _ in inc]
        cols = [b for _, b in inc]
        adj = coo_matrix((np.ones(len(inc)), (rows, cols)), shape=(self.n_vertices,) * 2)
        ncomp, _ = connected_components(adj, directed=False)
        if ncomp != 1:
            raise DisconnectedGraph(f"graph has {ncomp} connected components")

    @property
    def n_edges(self) -> int:
        return len(self.incidence)

    @classmethod
    def uniform(cls, n_vertices: int, incidence, n: int) -> "NetworkGraph":
        return cls(n_vertices, tuple(incidence), tuple(Grid1D(n) for _ in incidence))

    def incidence_weights(self) -> np.ndarray:
        """V x E matrix with 1 where an edge touches a vertex (2 for a loop)."""
        phi = np.zeros((self.n_vertices, self.n_edges))
        for j, (a, b) in enumerate(self.incidence):
            phi[a, j] += 1.0
            phi[b, j] += 1.0
        return phi


@dataclass(frozen=True)
class DiscreteProblem:
    A: np.ndarray
    C: np.ndarray
    L: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    B3: np.ndarray
    B4: np.ndarray
    case_tag: str
    metadata: dict = field(default_factory=dict)
    nodes: np.ndarray | None = None

    def __post_init__(self):
        if self.case_tag not in CASE_TAGS:
            raise ValueError(f"unknown case_tag {self.case_tag!r}")
        for name in ("A", "C", "L", "B1", "B2", "B3", "B4"):
            M = as_cmat(getattr(self, name), name)
            M.setflags(write=False)
            object.__setattr__(self, name, M)
        n, m = self.dim_X, self.dim_dX
        expect = {
            "A": (n, n), "C": (n, n), "L": (m, n),
            "B1": (m, n), "B2": (m, n), "B3": (m, m), "B4": (m, m),
        }
        for name, shape in expect.items():
            if getattr(self, name).shape != shape:
                raise DimensionMismatch(f"{name} has shape {getattr(self, name).shape}, expected {shape}")
        if m > n:
            raise DimensionMismatch("trace space larger than state space")
        if m and np.linalg.matrix_rank(self.L) < m:
            raise RankDeficientL(f"L has rank {np.linalg.matrix_rank(self.L)} < {m}")

    @property
    def dim_X(self) -> int:
        return self.A.shape[0]

    @property
    def dim_dX(self) -> int:
        return self.L.shape[0]

    @property
    def dim_dY(self) -> int:
        # B4 is bounded on dX in every scenario, so dY and dX coincide
        return self.B4.shape[0]

    @property
    def v_selector(self) -> np.ndarray | None:
        """Indices spanning ker(L) when L is a coordinate selection, else None."""
        L = self.L
        if not all(np.count_nonzero(r) == 1 and np.max(np.abs(r)) == 1.0 for r in L):
            return None
        picked = {int(np.flatnonzero(r)[0]) for r in L}
        return np.array([j for j in range(self.dim_X) if j not in picked], dtype=int)

    def with_case(self, case_tag: str) -> "DiscreteProblem":
        return replace(self, case_tag=case_tag)

    def with_feedback_scale(self, s: float) -> "DiscreteProblem":
        """Copy with B1 and B2 multiplied by ``s``."""
        meta = dict(self.metadata, feedback_scale=s)
        return replace(self, B1=s * self.B1, B2=s * self.B2, metadata=meta)


def build_custom(A, C, L, B1, B2, B3, B4, case_tag="bounded_trace", metadata=None, nodes=None) -> DiscreteProblem:
    """Validated problem from explicit matrices; L must be surjective."""
    return DiscreteProblem(A, C, L, B1, B2, B3, B4, case_tag, dict(metadata or {}), nodes)


def _row(size: int, idx, weights) -> np.ndarray:
    r = np.zeros(size)
    r[np.asarray(idx)] = weights
    return r


def build_interval_plate(n: int) -> DiscreteProblem:
    """Damped plate on [0, 1] with dynamic boundary at both ends.

    Unknowns are the n+2 nodal values u(x_i), x_i = i h, endpoints included.
    Interior rows of A apply the five-point fourth difference; the ghost
    values beyond each end come from the closure u'' = (-1)^j u' - u with
    centered differences. The endpoint rows of A and C hold fourth-order
    one-sided stencils for -u'''' and u''; they only enter the boundary
    identity L(Au + Cu'), never the dynamics.
    """
    if int(n) != n or n < 8:
        raise InvalidSize(f"plate needs n >= 8, got {n}")
    grid = Grid1D(n)
    h, x = grid.h, grid.nodes
    N = n + 2
    A = np.zeros((N, N))
    C = np.zeros((N, N))
    # ghost u_{-1} = g1 u_1 + g0 u_0 from (u_1 - 2u_0 + u_{-1})/h^2 = (u_1 - u_{-1})/(2h) - u_0
    den = 1 / h**2 + 1 / (2 * h)
    g1 = (1 / (2 * h) - 1 / h**2) / den
    g0 = (2 / h**2 - 1) / den
    stencil = np.array([1.0, -4.0, 6.0, -4.0, 1.0]) / h**4
    for i in range(1, n + 1):
        for w, j in zip(stencil, range(i - 2, i + 3)):
            if j == -1:
                A[i, 1] -= w * g1
                A[i, 0] -= w * g0
            elif j == N:
                A[i, N - 2] -= w * g1
                A[i, N - 1] -= w * g0
            else:
                A[i, j] -= w
        C[i, i - 1 : i + 2] += np.array([1.0, -2.0, 1.0]) / h**2
    for b, sgn in ((0, 1), (N - 1, -1)):
        idx = b + sgn * np.arange(8)
        A[b] = _row(N, idx, -fd_weights(x[b], x[idx], 4))
        idx = b + sgn * np.arange(6)
        C[b] = _row(N, idx, fd_weights(x[b], x[idx], 2))
    L = np.zeros((2, N))
    L[0, 0] = L[1, N - 1] = 1.0

    def deriv(b, sgn, order):
        idx = b + sgn * np.arange(order + 2)
        return _row(N, idx, fd_weights(x[b], x[idx], order))

    # endpoint j in {0, 1}: (-1)^{j+1} u''' + (-1)^j u' and (-1)^j u'
    B1 = np.array([-deriv(0, 1, 3) + deriv(0, 1, 1), deriv(N - 1, -1, 3) - deriv(N - 1, -1, 1)])
    B2 = np.array([deriv(0, 1, 1), -deriv(N - 1, -1, 1)])
    B3 = -np.eye(2)
    B4 = -np.eye(2)
    meta = {"scenario": "interval_plate", "n": int(n), "h": h}
    return DiscreteProblem(A, C, L, B1, B2, B3, B4, "bounded_trace", meta, x)


def build_network_wave(graph: NetworkGraph, M, N, P, Phi=None) -> DiscreteProblem:
    """Wave equation on a metric graph with dynamic vertex conditions.

    Unknowns: the interior nodes of every edge (edge by edge), then one shared
    value per vertex, so continuity at vertices holds by construction and L
    is the selection of the vertex block. ``Phi`` defaults to the incidence
    weights of the graph.
    """
    V, E = graph.n_vertices, graph.n_edges
    Phi = graph.incidence_weights() if Phi is None else Phi
    M, N, P, Phi = (as_cmat(X, nm) for X, nm in ((M, "M"), (N, "N"), (P, "P"), (Phi, "Phi")))
    for X, nm, shape in ((M, "M", (V, V)), (N, "N", (V, V)), (P, "P", (V, V)), (Phi, "Phi", (V, E))):
        if X.shape != shape:
            raise DimensionMismatch(f"{nm} has shape {X.shape}, expected {shape}")
    offsets = np.cumsum([0] + [g.n_interior for g in graph.edge_grids])
    n_int = int(offsets[-1])
    dim = n_int + V
    A = np.zeros((dim, dim))
    # outward normal derivative of edge j at vertex h, as a row on the state
    normal = np.zeros((V, E, dim))
    degree = np.zeros(V)
    for j, ((va, vb), g) in enumerate(zip(graph.incidence, graph.edge_grids)):
        nj, h = g.n_interior, g.h
        # local node k (0..nj+1) -> global dof
        dof = np.concatenate([[n_int + va], offsets[j] + np.arange(nj), [n_int + vb]])
        for k in range(1, nj + 1):
            A[dof[k], dof[k - 1 : k + 2]] += np.array([1.0, -2.0, 1.0]) / h**2
        xs = g.nodes
        for vert, end, sgn in ((va, 0, 1), (vb, nj + 1, -1)):
            loc = end + sgn * np.arange(4)
            A[n_int + vert, dof[loc]] += fd_weights(xs[end], xs[loc], 2)
            degree[vert] += 1
            loc = end + sgn * np.arange(3)
            # outward normal is -d/dx at x=0 and +d/dx at x=1
            normal[vert, j, dof[loc]] += -sgn * fd_weights(xs[end], xs[loc], 1)
    A[n_int:] /= degree[:, None]
    L = np.zeros((V, dim))
    L[np.arange(V), n_int + np.arange(V)] = 1.0
    B1 = P @ np.einsum("hj,hjd->hd", Phi, normal)
    meta = {
        "scenario": "network_wave",
        "n_edges": E,
        "n_vertices": V,
        "incidence": [list(e) for e in graph.incidence],
        "edge_offsets": offsets.tolist(),
    }
    return DiscreteProblem(A, np.zeros((dim, dim)), L, B1, np.zeros((V, dim)), M, N, "bounded_trace", meta)


def build_strongly_damped_interval(alpha: complex, beta, n: int) -> DiscreteProblem:
    """``u'' = alpha u_xx + u'_xx`` on (0, 1), u(0) = 0, dynamic node at x = 1.

    Unknowns are u(x_1), ..., u(x_{n+1}) with x_i = i h; the Dirichlet node
    at 0 is eliminated. The row at x = 1 is a one-sided second difference and
    u'(1) uses the three-point backward stencil.
    """
    if int(n) != n or n < 4:
        raise InvalidSize(f"strongly damped interval needs n >= 4, got {n}")
    beta = np.asarray(beta, dtype=complex).ravel()
    if beta.size != 4:
        raise DimensionMismatch(f"beta must have 4 entries, got {beta.size}")
    h = 1.0 / (n + 1)
    dim = n + 1
    x = h * np.arange(1, dim + 1)
    D2 = np.zeros((dim, dim))
    D2[:n, :n] = second_difference(n)
    D2[n - 1, n] = 1 / h**2
    idx = dim - 1 - np.arange(4)
    D2[dim - 1] = _row(dim, idx, fd_weights(1.0, x[idx], 2))
    idx = dim - 1 - np.arange(3)
    du = _row(dim, idx, fd_weights(1.0, x[idx], 1))[None, :]
    L = np.zeros((1, dim))
    L[0, -1] = 1.0
    b1, b2, b3, b4 = beta
    meta = {"scenario": "strongly_damped_interval", "n": int(n), "h": h, "alpha": complex(alpha), "beta": beta.tolist()}
    return DiscreteProblem(
        alpha * D2, D2.copy(), L, -b1 * du, -b2 * du,
        np.array([[b3]]), np.array([[b4]]), "strong_damping_bounded", meta, x,
    )
