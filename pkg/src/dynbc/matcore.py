"""Dense complex linear algebra used by every other module.

Matrices are plain ``numpy.ndarray`` objects. Factorizations and the
matrix exponential are delegated to LAPACK through scipy; this module adds
the error contracts and the convolution quadrature on uniform time grids.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linear_sum_assignment

from .errors import GridMismatch, NoConvergence, NonFiniteEntries, Overflow, SingularMatrix

PIVOT_RTOL = 1e-14


def as_cmat(A, name: str = "matrix") -> np.ndarray:
    """Return ``A`` as a 2-D complex array, rejecting NaN/Inf entries."""
    M = np.atleast_2d(np.asarray(A, dtype=complex))
    if M.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise NonFiniteEntries(f"{name} has non-finite entries")
    return M


def _square(A, name="A") -> np.ndarray:
    M = as_cmat(A, name)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got {M.shape}")
    return M


def solve_linear(A, B) -> np.ndarray:
    """Solve ``A X = B`` by LU with partial pivoting.

    Raises SingularMatrix when a pivot falls below ``1e-14 * max|A|``.
    A 1-D ``B`` gives a 1-D result.
    """
    A = _square(A)
    B = np.asarray(B, dtype=complex)
    vector = B.ndim == 1
    B2 = B.reshape(-1, 1) if vector else B
    if B2.shape[0] != A.shape[0]:
        raise ValueError(f"row mismatch: A is {A.shape}, B is {B.shape}")
    n = A.shape[0]
    if n == 0:
        return np.zeros(B.shape, dtype=complex)
    scale = np.max(np.abs(A))
    if scale == 0.0:
        raise SingularMatrix("zero matrix")
    with warnings.catch_warnings():
        # exact zero pivots are reported through SingularMatrix below
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(A, check_finite=False)
    if np.min(np.abs(np.diag(lu))) < PIVOT_RTOL * scale:
        raise SingularMatrix("pivot below relative threshold 1e-14")
    X = sla.lu_solve((lu, piv), B2, check_finite=False)
    return X.ravel() if vector else X


def eigenvalues(A) -> np.ndarray:
    """Eigenvalues sorted by (real part, imaginary part).

    Real parts that agree to 1e-12 relative are treated as equal, so
    conjugate pairs are ordered by imaginary part despite rounding.
    """
    A = _square(A)
    if A.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    try:
        w = np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    w = w[np.argsort(w.real, kind="stable")].astype(complex)
    tol = 1e-12 * max(1.0, float(np.max(np.abs(w))))
    out, start = [], 0
    for i in range(1, w.size + 1):
        if i == w.size or w[i].real - w[i - 1].real > tol:
            cluster = w[start:i]
            out.append(cluster[np.argsort(cluster.imag, kind="stable")])
            start = i
    return np.concatenate(out)


def spectral_abscissa(A) -> float:
    """Largest real part of the spectrum (``-inf`` for an empty matrix)."""
    w = eigenvalues(A)
    return float(np.max(w.real)) if w.size else -np.inf


def spectral_distance(w1, w2) -> float:
    """Max deviation under the optimal one-to-one matching of two spectra.

    Lexicographic sorting is unstable for conjugate pairs whose real parts
    agree only to rounding, so the pairing is solved as an assignment problem.
    """
    w1 = np.asarray(w1, dtype=complex).ravel()
    w2 = np.asarray(w2, dtype=complex).ravel()
    if w1.size != w2.size:
        raise ValueError(f"spectra have different sizes {w1.size} and {w2.size}")
    if w1.size == 0:
        return 0.0
    cost = np.abs(w1[:, None] - w2[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


def matrix_exponential(A, t: float = 1.0) -> np.ndarray:
    """``exp(t A)`` by Pade-13 scaling and squaring."""
    A = _square(A)
    if A.shape[0] == 0:
        return np.zeros((0, 0), dtype=complex)
    with np.errstate(over="ignore", invalid="ignore"):
        E = sla.expm(t * A)
    if not np.all(np.isfinite(E)):
        raise Overflow(f"exp(tA) overflowed at t={t}")
    return E


def operator_norm(A) -> float:
    """Induced 2-norm (largest singular value)."""
    A = as_cmat(A)
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


def resolvent(A, lam: complex) -> np.ndarray:
    """``(lam I - A)^{-1}``; SingularMatrix signals ``lam`` in the spectrum."""
    A = _square(A)
    n = A.shape[0]
    return solve_linear(lam * np.eye(n) - A, np.eye(n, dtype=complex))


@dataclass(frozen=True)
class SampledMatrixFunction:
    """Samples of a matrix-valued function on a uniform grid starting at 0.

    ``samples`` has shape ``(len(time_grid), p, q)``.
    """

    time_grid: np.ndarray
    samples: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.time_grid, dtype=float)
        S = np.asarray(self.samples, dtype=complex)
        if S.ndim != 3 or S.shape[0] != t.size:
            raise GridMismatch(f"samples shape {S.shape} does not match grid of {t.size} points")
        if t.size == 0 or t[0] != 0.0:
            raise GridMismatch("time grid must start at 0")
        if t.size > 1:
            dt = np.diff(t)
            if np.any(dt <= 0) or np.max(np.abs(dt - dt[0])) > 1e-9 * max(1.0, t[-1]):
                raise GridMismatch("time grid must be strictly increasing and uniform")
        if not np.all(np.isfinite(S)):
            raise NonFiniteEntries("samples contain non-finite entries")
        object.__setattr__(self, "time_grid", t)
        object.__setattr__(self, "samples", S)

    @property
    def step(self) -> float:
        return float(self.time_grid[1] - self.time_grid[0]) if self.time_grid.size > 1 else 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.samples.shape[1:]

    def at(self, i: int) -> np.ndarray:
        return self.samples[i]

    def block(self, rows: slice, cols: slice) -> "SampledMatrixFunction":
        return SampledMatrixFunction(self.time_grid, self.samples[:, rows, cols])

    def scaled(self, alpha: complex) -> "SampledMatrixFunction":
        return SampledMatrixFunction(self.time_grid, alpha * self.samples)

    @classmethod
    def from_function(cls, f, time_grid) -> "SampledMatrixFunction":
        t = np.asarray(time_grid, dtype=float)
        return cls(t, np.array([np.atleast_2d(f(s)) for s in t], dtype=complex))


def convolve(F: SampledMatrixFunction, G: SampledMatrixFunction) -> SampledMatrixFunction:
    """Trapezoid approximation of ``(F*G)(t) = int_0^t F(t-s) G(s) ds``.

    All grid points are done at once: the full discrete convolution comes from
    a zero-padded FFT along the time axis, and the trapezoid half-weights at
    ``s = 0`` and ``s = t`` are subtracted afterwards.
    """
    tF, tG = F.time_grid, G.time_grid
    if tF.shape != tG.shape or np.max(np.abs(tF - tG)) > 1e-12 * max(1.0, tF[-1]):
        raise GridMismatch("convolution operands must share a time grid")
    if F.shape[1] != G.shape[0]:
        raise GridMismatch(f"inner dimensions differ: {F.shape} * {G.shape}")
    N = tF.size
    p, r = F.shape[0], G.shape[1]
    if N == 1 or not np.any(F.samples) or not np.any(G.samples):
        return SampledMatrixFunction(tF, np.zeros((N, p, r), dtype=complex))
    h = F.step
    n2 = 2 * N
    fF = np.fft.fft(F.samples, n=n2, axis=0)
    fG = np.fft.fft(G.samples, n=n2, axis=0)
    full = np.fft.ifft(np.einsum("tij,tjk->tik", fF, fG), axis=0)[:N]
    ends = np.einsum("tij,jk->tik", F.samples, G.samples[0]) + np.einsum("ij,tjk->tik", F.samples[0], G.samples)
    out = h * (full - 0.5 * ends)
    out[0] = 0.0
    return SampledMatrixFunction(tF, out)
