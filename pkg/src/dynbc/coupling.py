"""Dirichlet operators, kernel compressions and the block reductions.

State vectors of the reduction matrix live on the ambient product
(u, x, v, y) = (position, boundary position, velocity, boundary velocity).
The domain constraint picks a subspace of it, which depends on the case:

    bounded_trace / strong_damping_bounded:  L u = x and L v = y
    unbounded_trace:                         L u = x and L v = 0
    strong_damping_unbounded:                L v = y

Each ``assemble_*`` returns a :class:`ReducedSystem` whose generator acts on
coordinates with a product structure, plus the maps U (ambient -> reduced)
and U_inv (reduced -> ambient) that conjugate the constrained model into it.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .discretize import DiscreteProblem
from .errors import LambdaInSpectrum, RankDeficientL, SingularMatrix, WrongCase
from .matcore import eigenvalues, operator_norm, solve_linear

FORM_FOR_CASE = {
    "unbounded_trace": "G_form",
    "bounded_trace": "G_underline",
    "strong_damping_unbounded": "H_form",
    "strong_damping_bounded": "H_underline",
}
BLOCK_NAMES = ("Y", "X", "dY", "dX")


def _ct(M: np.ndarray) -> np.ndarray:
    return M.conj().T


def kernel_basis(L) -> np.ndarray:
    """Orthonormal basis of ker(L); unit vectors when L selects coordinates."""
    L = np.asarray(L, dtype=complex)
    m, n = L.shape
    if m and np.linalg.matrix_rank(L) < m:
        raise RankDeficientL(f"L has rank {np.linalg.matrix_rank(L)} < {m}")
    if all(np.count_nonzero(r) == 1 and np.max(np.abs(r)) == 1.0 for r in L):
        picked = {int(np.flatnonzero(r)[0]) for r in L}
        rest = [j for j in range(n) if j not in picked]
        K = np.zeros((n, n - m), dtype=complex)
        K[rest, np.arange(n - m)] = 1.0
        return K
    if m == 0:
        return np.eye(n, dtype=complex)
    return sla.null_space(L).astype(complex)


def kernel_restriction(A, L) -> tuple[np.ndarray, np.ndarray]:
    """Compression ``K^H A K`` of A onto ker(L) and the basis K."""
    K = kernel_basis(L)
    return _ct(K) @ np.asarray(A, dtype=complex) @ K, K


def graph_basis(L) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal basis of the graph {(u, Lu)} split into its u- and Lu-rows.

    Built from ker(L) plus a QR of the image of L^H, which keeps the basis
    aligned with the block structure; a dense null space of [L, -I] mixes
    the blocks and costs several digits in the spectra.
    """
    L = np.asarray(L, dtype=complex)
    m, n = L.shape
    K = kernel_basis(L)
    if m == 0:
        return K, np.zeros((0, n), dtype=complex)
    Qc, _ = np.linalg.qr(np.vstack([_ct(L), L @ _ct(L)]))
    top = np.hstack([K, Qc[:n]])
    bottom = np.hstack([np.zeros((m, n - m), dtype=complex), Qc[n:]])
    return top, bottom


def default_lambda(A0) -> complex:
    """A point safely inside the resolvent set of A0.

    base + gap/2 with base = abscissa + max(1, 1e-6 ||A0||) and gap the
    distance from base to the nearest eigenvalue. The unit shift alone sits
    inside the 1e-8 ||A0|| exclusion zone once ||A0|| exceeds about 1e8.
    """
    w = eigenvalues(A0)
    if w.size == 0:
        return 1.0 + 0j
    base = max(1.0, 1e-6 * operator_norm(A0)) + float(np.max(w.real))
    gap = float(np.min(np.abs(w - base)))
    return complex(base + gap / 2)


@dataclass(frozen=True)
class DirichletOperator:
    D: np.ndarray
    lam: complex
    which: str
    residual_interior: float
    residual_trace: float


def dirichlet_operator(P: DiscreteProblem, which: str = "A_L", lam: complex | None = None) -> DirichletOperator:
    """Right inverse D of L whose columns satisfy ``K^H (Op - lam) D = 0``.

    ``Op`` is A for ``which="A_L"`` and C for ``which="C_L"``. The square system
    stacks the kernel-projected eigen-equation on top of ``L D = I``; for
    coordinate-selection L these are exactly the interior rows.
    """
    if which not in ("A_L", "C_L"):
        raise ValueError(f"which must be 'A_L' or 'C_L', got {which!r}")
    Op = P.A if which == "A_L" else P.C
    Op0, K = kernel_restriction(Op, P.L)
    lam = default_lambda(Op0) if lam is None else complex(lam)
    w = eigenvalues(Op0)
    if w.size and np.min(np.abs(w - lam)) <= 1e-8 * max(operator_norm(Op0), np.finfo(float).tiny):
        raise LambdaInSpectrum(f"lambda={lam} is within 1e-8*||Op0|| of an eigenvalue")
    n, m = P.dim_X, P.dim_dX
    S = np.vstack([_ct(K) @ (lam * np.eye(n) - Op), P.L])
    rhs = np.vstack([np.zeros((n - m, m)), np.eye(m)])
    try:
        D = solve_linear(S, rhs)
    except SingularMatrix as exc:
        raise LambdaInSpectrum(f"Dirichlet system singular at lambda={lam}") from exc
    res_trace = operator_norm(P.L @ D - np.eye(m)) if m else 0.0
    res_int = operator_norm(_ct(K) @ (Op @ D - lam * D)) if m and n > m else 0.0
    return DirichletOperator(D, lam, which, res_int, res_trace)


@dataclass(frozen=True)
class ReducedSystem:
    """Assembled generator with its block layout and similarity maps.

    ``U`` maps ambient (u, x, v, y) vectors to reduced coordinates and
    ``U_inv`` maps back; ``displacement`` and ``velocity`` recover u and its
    time derivative from a reduced state.
    """

    G: np.ndarray
    block_map: dict
    U: np.ndarray
    U_inv: np.ndarray
    lam: complex
    form_tag: str
    dirichlet: DirichletOperator
    displacement: np.ndarray
    velocity: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        stops = [s for s in self.block_map.values()]
        pos = 0
        for s in stops:
            if s.start != pos:
                raise ValueError("block_map ranges must partition the index set")
            pos = s.stop
        if pos != self.G.shape[0]:
            raise ValueError("block_map does not cover the generator")

    @property
    def dim(self) -> int:
        return self.G.shape[0]

    def block(self, row: str, col: str) -> np.ndarray:
        return self.G[self.block_map[row], self.block_map[col]]

    def inverse_defect(self) -> float:
        return operator_norm(self.U @ self.U_inv - np.eye(self.dim))


def _block_map(sizes) -> dict:
    out, pos = {}, 0
    for name, s in zip(BLOCK_NAMES, sizes):
        out[name] = slice(pos, pos + s)
        pos += s
    return out


def _require(P: DiscreteProblem, tag: str):
    if P.case_tag != tag:
        raise WrongCase(f"problem is tagged {P.case_tag!r}, this form needs {tag!r}")


def _common(P: DiscreteProblem, which: str, lam):
    Dop = dirichlet_operator(P, which, lam)
    K = kernel_basis(P.L)
    Kh = _ct(K)
    D = Dop.D
    return Dop, K, Kh, D, Kh @ D, P.dim_X, P.dim_dX


def _zeros(r, c):
    return np.zeros((r, c), dtype=complex)


def _eye(k):
    return np.eye(k, dtype=complex)


def assemble_G(P: DiscreteProblem, lam: complex | None = None) -> ReducedSystem:
    """Reduction for an unbounded trace; coordinates (alpha, beta, x, y).

    alpha = K^H (u - D x) and beta = K^H v, where v is the velocity
    component in ker(L).
    """
    _require(P, "unbounded_trace")
    Dop, K, Kh, D, Dt, n, m = _common(P, "A_L", lam)
    r = n - m
    A, C, B1, B2, B3, B4 = P.A, P.C, P.B1, P.B2, P.B3, P.B4
    G = np.block([
        [_zeros(r, r), _eye(r), _zeros(r, m), -Dt],
        [Kh @ A @ K, Kh @ C @ K, Dop.lam * Dt, _zeros(r, m)],
        [_zeros(m, r), _zeros(m, r), _zeros(m, m), _eye(m)],
        [B1 @ K, B2 @ K, B3 + B1 @ D, B4],
    ])
    U = np.block([
        [Kh, -Dt, _zeros(r, n), _zeros(r, m)],
        [_zeros(r, n), _zeros(r, m), Kh, _zeros(r, m)],
        [_zeros(m, n), _eye(m), _zeros(m, n), _zeros(m, m)],
        [_zeros(m, n), _zeros(m, m), _zeros(m, n), _eye(m)],
    ])
    U_inv = np.block([
        [K, _zeros(n, r), D, _zeros(n, m)],
        [_zeros(m, r), _zeros(m, r), _eye(m), _zeros(m, m)],
        [_zeros(n, r), K, _zeros(n, m), _zeros(n, m)],
        [_zeros(m, r), _zeros(m, r), _zeros(m, m), _eye(m)],
    ])
    return _finish(P, G, U, U_inv, Dop, "G_form", (r, r, m, m))


def _underline(P: DiscreteProblem, lam, which: str, tag: str) -> tuple:
    Dop, K, Kh, D, Dt, n, m = _common(P, which, lam)
    r = n - m
    A, C, B1, B2, B3, B4 = P.A, P.C, P.B1, P.B2, P.B3, P.B4
    lmb = Dop.lam
    if which == "A_L":
        # A D = lam D on interior rows, so the x-column carries lam * D
        col_x = lmb * Dt - Dt @ (B1 @ D + B3)
        col_y = Kh @ C @ D - Dt @ (B2 @ D + B4)
    else:
        col_x = Kh @ A @ D - Dt @ (B1 @ D + B3)
        col_y = lmb * Dt - Dt @ (B2 @ D + B4)
    G = np.block([
        [_zeros(r, r), _eye(r), _zeros(r, m), _zeros(r, m)],
        [Kh @ A @ K - Dt @ B1 @ K, Kh @ C @ K - Dt @ B2 @ K, col_x, col_y],
        [_zeros(m, r), _zeros(m, r), _zeros(m, m), _eye(m)],
        [B1 @ K, B2 @ K, B3 + B1 @ D, B4 + B2 @ D],
    ])
    U = np.block([
        [Kh, -Dt, _zeros(r, n), _zeros(r, m)],
        [_zeros(r, n), _zeros(r, m), Kh, -Dt],
        [_zeros(m, n), _eye(m), _zeros(m, n), _zeros(m, m)],
        [_zeros(m, n), _zeros(m, m), _zeros(m, n), _eye(m)],
    ])
    U_inv = np.block([
        [K, _zeros(n, r), D, _zeros(n, m)],
        [_zeros(m, r), _zeros(m, r), _eye(m), _zeros(m, m)],
        [_zeros(n, r), K, _zeros(n, m), D],
        [_zeros(m, r), _zeros(m, r), _zeros(m, m), _eye(m)],
    ])
    return _finish(P, G, U, U_inv, Dop, tag, (r, r, m, m))


def assemble_G_underline(P: DiscreteProblem, lam: complex | None = None) -> ReducedSystem:
    """Reduction for a bounded trace with the A-Dirichlet operator.

    Coordinates (alpha, beta, x, y) with alpha = K^H (u - D x) and
    beta = K^H (v - D y).
    """
    _require(P, "bounded_trace")
    return _underline(P, lam, "A_L", "G_underline")


def assemble_H_underline(P: DiscreteProblem, lam: complex | None = None) -> ReducedSystem:
    """Strongly damped analogue of :func:`assemble_G_underline` using D^{C,L}."""
    _require(P, "strong_damping_bounded")
    return _underline(P, lam, "C_L", "H_underline")


def assemble_H(P: DiscreteProblem, lam: complex | None = None) -> ReducedSystem:
    """Strongly damped reduction with unconstrained position.

    Coordinates (u, beta, x, y) with beta = K^H (v - D y), D = D^{C,L}.
    """
    _require(P, "strong_damping_unbounded")
    Dop, K, Kh, D, Dt, n, m = _common(P, "C_L", lam)
    r = n - m
    A, C, B1, B2, B3, B4 = P.A, P.C, P.B1, P.B2, P.B3, P.B4
    G = np.block([
        [_zeros(n, n), K, _zeros(n, m), D],
        [Kh @ A - Dt @ B1, Kh @ C @ K - Dt @ B2 @ K, -Dt @ B3, Dop.lam * Dt - Dt @ (B2 @ D + B4)],
        [_zeros(m, n), _zeros(m, r), _zeros(m, m), _eye(m)],
        [B1, B2 @ K, B3, B4 + B2 @ D],
    ])
    U = np.block([
        [_eye(n), _zeros(n, m), _zeros(n, n), _zeros(n, m)],
        [_zeros(r, n), _zeros(r, m), Kh, -Dt],
        [_zeros(m, n), _eye(m), _zeros(m, n), _zeros(m, m)],
        [_zeros(m, n), _zeros(m, m), _zeros(m, n), _eye(m)],
    ])
    U_inv = np.block([
        [_eye(n), _zeros(n, r), _zeros(n, m), _zeros(n, m)],
        [_zeros(m, n), _zeros(m, r), _eye(m), _zeros(m, m)],
        [_zeros(n, n), K, _zeros(n, m), D],
        [_zeros(m, n), _zeros(m, r), _zeros(m, m), _eye(m)],
    ])
    return _finish(P, G, U, U_inv, Dop, "H_form", (n, r, m, m))


def _finish(P, G, U, U_inv, Dop, tag, sizes) -> ReducedSystem:
    n, m = P.dim_X, P.dim_dX
    to_u = np.hstack([_eye(n), _zeros(n, m + n + m)])
    to_v = np.hstack([_zeros(n, n + m), _eye(n), _zeros(n, m)])
    if tag == "G_form":
        # the velocity coordinate lives in ker(L); its trace is carried by y
        to_v = to_v + np.hstack([_zeros(n, 2 * n + m), np.linalg.pinv(P.L)])
    return ReducedSystem(
        G=G, block_map=_block_map(sizes), U=U, U_inv=U_inv, lam=Dop.lam,
        form_tag=tag, dirichlet=Dop, displacement=to_u @ U_inv, velocity=to_v @ U_inv,
        meta={"case_tag": P.case_tag, "dim_X": n, "dim_dX": m},
    )


ASSEMBLERS = {
    "unbounded_trace": assemble_G,
    "bounded_trace": assemble_G_underline,
    "strong_damping_unbounded": assemble_H,
    "strong_damping_bounded": assemble_H_underline,
}


def assemble(P: DiscreteProblem, lam: complex | None = None) -> ReducedSystem:
    """Dispatch to the reduction matching ``P.case_tag``."""
    return ASSEMBLERS[P.case_tag](P, lam)


def ambient_operator(P: DiscreteProblem) -> np.ndarray:
    """The 4x4 block reduction matrix on (u, x, v, y), before any constraint."""
    n, m = P.dim_X, P.dim_dX
    return np.block([
        [_zeros(n, n), _zeros(n, m), _eye(n), _zeros(n, m)],
        [_zeros(m, n), _zeros(m, m), _zeros(m, n), _eye(m)],
        [P.A, _zeros(n, m), P.C, _zeros(n, m)],
        [P.B1, P.B3, P.B2, P.B4],
    ])


@dataclass(frozen=True)
class ConstrainedModel:
    """Reduction matrix restricted to its domain-constraint subspace.

    ``projected`` is Q times the ambient operator, where Q projects the
    velocity rows back onto the constraint (boundary rows of A are replaced
    by the dynamic boundary equation). ``basis`` is an orthonormal basis W of
    the subspace and ``matrix`` equals W^H projected W.
    """

    matrix: np.ndarray
    basis: np.ndarray
    projected: np.ndarray


def constrained_model(P: DiscreteProblem) -> ConstrainedModel:
    n, m = P.dim_X, P.dim_dX
    N = 2 * n + 2 * m
    su, sx, sv, sy = slice(0, n), slice(n, n + m), slice(n + m, 2 * n + m), slice(2 * n + m, N)
    K = kernel_basis(P.L)
    Pk = K @ _ct(K)
    Lp = np.linalg.pinv(P.L) if m else _zeros(n, 0)
    L = P.L
    top, bot = graph_basis(L)

    def cols(*parts):
        k = parts[0][1].shape[1]
        Wb = _zeros(N, k)
        for s, B in parts:
            Wb[s] = B
        return Wb

    I = np.eye(N, dtype=complex)
    tag = P.case_tag
    if tag in ("bounded_trace", "strong_damping_bounded"):
        W = np.hstack([cols((su, top), (sx, bot)), cols((sv, top), (sy, bot))])
        upos = Pk @ I[su] + Lp @ I[sx]
        uvel = Pk @ I[sv] + Lp @ I[sy]
        Q = np.vstack([upos, L @ upos, uvel, L @ uvel])
    elif tag == "unbounded_trace":
        W = np.hstack([cols((su, top), (sx, bot)), cols((sv, K)), cols((sy, _eye(m)))])
        upos = Pk @ I[su] + Lp @ I[sx]
        Q = np.vstack([upos, I[sx], Pk @ I[sv], I[sy]])
    else:
        W = np.hstack([cols((su, _eye(n))), cols((sx, _eye(m))), cols((sv, top), (sy, bot))])
        uvel = Pk @ I[sv] + Lp @ I[sy]
        Q = np.vstack([I[su], I[sx], uvel, I[sy]])
    QA = Q @ ambient_operator(P)
    return ConstrainedModel(_ct(W) @ QA @ W, W, QA)


def assemble_A_constrained(P: DiscreteProblem) -> np.ndarray:
    """Compression W^H (Q A) W of the reduction matrix onto its domain."""
    return constrained_model(P).matrix


def similarity_defect(P: DiscreteProblem, R: ReducedSystem) -> float:
    """Relative mismatch ``||U (Q A) U_inv - G|| / ||G||``."""
    QA = constrained_model(P).projected
    return operator_norm(R.U @ QA @ R.U_inv - R.G) / max(operator_norm(R.G), np.finfo(float).tiny)
