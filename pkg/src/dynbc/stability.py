"""Perturbation analysis of 2x2 block generators [[H, J], [K, Lb]].

The Dyson-Phillips terms are built by convolving the diagonal semigroups
against the off-diagonal couplings; from them we check the structural zero
pattern, the L1 bounds on each term, and the smallness certificate
``M = M1 M2 ||J|| ||K|| / (eps1 eps2) < 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .coupling import BLOCK_NAMES, ReducedSystem
from .errors import BoundsMissing, GridMismatch, PremiseViolated, UnknownCut
from .matcore import (
    SampledMatrixFunction, convolve, eigenvalues, matrix_exponential, operator_norm, spectral_abscissa,
)
from .semigroup import check_boundedness, growth_bound


@dataclass(frozen=True)
class BlockSystem2x2:
    H: np.ndarray
    J: np.ndarray
    K: np.ndarray
    Lb: np.ndarray
    bounds: tuple | None = None

    def __post_init__(self):
        H, J, K, Lb = (np.atleast_2d(np.asarray(X, dtype=complex)) for X in (self.H, self.J, self.K, self.Lb))
        p, q = H.shape[0], Lb.shape[0]
        if H.shape != (p, p) or Lb.shape != (q, q):
            raise ValueError("H and Lb must be square")
        # empty couplings come in as (1, 0) after atleast_2d
        J = J.reshape(p, q) if J.size == 0 else J
        K = K.reshape(q, p) if K.size == 0 else K
        if J.shape != (p, q) or K.shape != (q, p):
            raise ValueError(f"coupling shapes {J.shape}, {K.shape} do not fit H {H.shape} and Lb {Lb.shape}")
        for name, X in zip("HJK", (H, J, K)):
            object.__setattr__(self, name, X)
        object.__setattr__(self, "Lb", Lb)
        if self.bounds is not None:
            M1, e1, M2, e2 = (float(b) for b in self.bounds)
            if M1 < 1 or M2 < 1 or e1 > 0 or e2 > 0:
                raise ValueError(f"bounds need M >= 1 and eps <= 0, got {self.bounds}")
            object.__setattr__(self, "bounds", (M1, e1, M2, e2))

    @property
    def p(self) -> int:
        return self.H.shape[0]

    @property
    def q(self) -> int:
        return self.Lb.shape[0]

    def assembled(self) -> np.ndarray:
        return np.block([[self.H, self.J], [self.K, self.Lb]])

    def coupling(self) -> np.ndarray:
        Z = np.zeros
        return np.block([[Z((self.p, self.p)), self.J], [self.K, Z((self.q, self.q))]])

    def with_bounds(self, T_max: float = 50.0, samples: int = 64, margin: float | None = None) -> "BlockSystem2x2":
        """Attach (M1, eps1, M2, eps2) from sampled growth envelopes.

        A block whose abscissa is within 1e-12 of zero is marginal: it gets
        eps = 0 exactly (no margin), so it still meets the eps <= 0 requirement.
        """

        def envelope(X):
            a = spectral_abscissa(X)
            g = growth_bound(X, T_max, samples, -a if abs(a) <= 1e-12 else margin)
            return g.transient_M, (g.epsilon_used if abs(g.epsilon_used) > 1e-12 else 0.0)

        M1, e1 = envelope(self.H)
        M2, e2 = envelope(self.Lb)
        return replace(self, bounds=(M1, e1, M2, e2))


def _parse_cut(cut: str) -> int:
    if cut == "interior|boundary":
        return 2
    parts = cut.split("|")
    if len(parts) == 2:
        left = [s.strip() for s in parts[0].split(",") if s.strip()]
        right = [s.strip() for s in parts[1].split(",") if s.strip()]
        if left + right == list(BLOCK_NAMES) and left and right:
            return len(left)
    raise UnknownCut(f"cut {cut!r} is not a boundary of the block map {BLOCK_NAMES}")


def split_blocks(R: ReducedSystem, cut: str = "interior|boundary") -> BlockSystem2x2:
    """View ``R.G`` as a 2x2 block operator at the named cut."""
    k = _parse_cut(cut)
    names = list(R.block_map)
    i = R.block_map[names[k - 1]].stop
    G = R.G
    return BlockSystem2x2(G[:i, :i], G[:i, i:], G[i:, :i], G[i:, i:])


@dataclass(frozen=True)
class DysonPhillipsExpansion:
    terms: list
    p: int
    q: int
    partial_sum_error: float

    @property
    def time_grid(self) -> np.ndarray:
        return self.terms[0].time_grid

    def entry(self, k: int, i: int, j: int) -> SampledMatrixFunction:
        """Block (i, j), 1-based, of the k-th term."""
        rows = slice(0, self.p) if i == 1 else slice(self.p, self.p + self.q)
        cols = slice(0, self.p) if j == 1 else slice(self.p, self.p + self.q)
        return self.terms[k].block(rows, cols)

    def partial_sum(self, index: int = -1) -> np.ndarray:
        return sum(t.samples[index] for t in self.terms)


def _sampled_exp(A: np.ndarray, t: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    out = np.empty((t.size, n, n), dtype=complex)
    out[0] = np.eye(n)
    if t.size > 1:
        step = matrix_exponential(A, t[1] - t[0])
        for i in range(1, t.size):
            out[i] = step @ out[i - 1]
    return out


def dyson_phillips(sys: BlockSystem2x2, T: float, steps: int, k_max: int = 12) -> DysonPhillipsExpansion:
    """Dyson-Phillips terms S_0..S_{k_max} on the uniform grid of [0, T]."""
    if steps < 1 or T <= 0:
        raise GridMismatch("need steps >= 1 and T > 0")
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    t = np.linspace(0.0, T, steps + 1)
    p, q = sys.p, sys.q
    eH = SampledMatrixFunction(t, _sampled_exp(sys.H, t))
    eL = SampledMatrixFunction(t, _sampled_exp(sys.Lb, t))
    S0 = np.zeros((t.size, p + q, p + q), dtype=complex)
    S0[:, :p, :p] = eH.samples
    S0[:, p:, p:] = eL.samples
    terms = [SampledMatrixFunction(t, S0)]
    for _ in range(k_max):
        prev = terms[-1].samples
        Sk = np.zeros_like(prev)
        upper = SampledMatrixFunction(t, np.einsum("ij,tjk->tik", sys.J, prev[:, p:, :]))
        lower = SampledMatrixFunction(t, np.einsum("ij,tjk->tik", sys.K, prev[:, :p, :]))
        Sk[:, :p, :] = convolve(eH, upper).samples
        Sk[:, p:, :] = convolve(eL, lower).samples
        terms.append(SampledMatrixFunction(t, Sk))
    total = sum(s.samples[-1] for s in terms)
    err = operator_norm(total - matrix_exponential(sys.assembled(), T))
    return DysonPhillipsExpansion(terms, p, q, err)


def exact_dyson_terms(sys: BlockSystem2x2, T: float, k_max: int) -> list:
    """Exact S_k(T), k = 0..k_max, from one block-bidiagonal exponential.

    The matrix with diag(H, Lb) on the diagonal and the coupling on the first
    superdiagonal has the k-th iterated integral in its (0, k) block.
    """
    d = sys.p + sys.q
    Dg = np.zeros((d, d), dtype=complex)
    Dg[: sys.p, : sys.p] = sys.H
    Dg[sys.p :, sys.p :] = sys.Lb
    Pc = sys.coupling()
    big = np.zeros(((k_max + 1) * d,) * 2, dtype=complex)
    for i in range(k_max + 1):
        big[i * d : (i + 1) * d, i * d : (i + 1) * d] = Dg
        if i < k_max:
            big[i * d : (i + 1) * d, (i + 1) * d : (i + 2) * d] = Pc
    E = matrix_exponential(big, T)
    return [E[:d, k * d : (k + 1) * d] for k in range(k_max + 1)]


def verify_zero_pattern(exp: DysonPhillipsExpansion) -> dict:
    """Off-diagonal blocks of even terms and diagonal blocks of odd terms vanish."""
    worst = 0.0
    checked = 0
    for k in range(1, len(exp.terms)):
        blocks = ((1, 2), (2, 1)) if k % 2 == 0 else ((1, 1), (2, 2))
        for i, j in blocks:
            s = exp.entry(k, i, j).samples
            if s.size:
                worst = max(worst, float(np.max(np.abs(s))))
            checked += 1
    return {"max_violation": worst, "blocks_checked": checked, "passed": worst == 0.0}


def _l1(samples: np.ndarray, t: np.ndarray) -> float:
    return float(np.trapezoid(np.linalg.norm(samples, axis=1), t)) if samples.size else 0.0


def _need_bounds(sys: BlockSystem2x2, strict: bool = True):
    if sys.bounds is None:
        raise BoundsMissing("growth bounds (M1, eps1, M2, eps2) are required")
    M1, e1, M2, e2 = sys.bounds
    if strict and (e1 >= 0 or e2 >= 0):
        raise BoundsMissing(f"need eps1, eps2 < 0, got {e1}, {e2}")
    return M1, e1, M2, e2


def verify_l1_estimates(sys: BlockSystem2x2, exp: DysonPhillipsExpansion, probes, slack: float = 1e-2) -> dict:
    """Check the four L1 bounds on the Dyson-Phillips terms for each probe.

    A probe is a vector of length p + q split into (x, y). Returns the worst
    ratio of integral to bound (<= 1 + slack passes) and every violation.
    """
    M1, e1, M2, e2 = _need_bounds(sys)
    nJ, nK = operator_norm(sys.J), operator_norm(sys.K)
    M = M1 * M2 * nJ * nK / (e1 * e2)
    t = exp.time_grid
    p = sys.p
    k_max = len(exp.terms) - 1
    worst, violations, count = 0.0, [], 0
    for z in probes:
        z = np.asarray(z, dtype=complex)
        x, y = z[:p], z[p:]
        nx, ny = np.linalg.norm(x), np.linalg.norm(y)
        for n in range(k_max // 2 + 1):
            checks = [
                ("esti1", 2 * n, (1, 1), x, M**n * M1 / abs(e1) * nx),
                ("esti2", 2 * n, (2, 2), y, M**n * M2 / abs(e2) * ny),
            ]
            if 2 * n + 1 <= k_max:
                checks += [
                    ("esti3", 2 * n + 1, (1, 2), y, M**n * M1 * M2 * nJ / (e1 * e2) * ny),
                    ("esti4", 2 * n + 1, (2, 1), x, M**n * M1 * M2 * nK / (e1 * e2) * nx),
                ]
            for name, k, (i, j), vec, rhs in checks:
                lhs = _l1(np.einsum("tij,j->ti", exp.entry(k, i, j).samples, vec), t)
                count += 1
                ratio = lhs / rhs if rhs > 0 else (0.0 if lhs <= 1e-14 else np.inf)
                worst = max(worst, ratio)
                if lhs > rhs * (1 + slack) + 1e-14:
                    violations.append({"estimate": name, "n": n, "lhs": lhs, "rhs": rhs})
    return {"checks": count, "worst_ratio": float(worst), "violations": violations, "passed": not violations}


@dataclass(frozen=True)
class StabilityCertificate:
    M: float
    M0: float
    verdict: str
    evidence: dict


def smallness_criterion(sys: BlockSystem2x2, probes=None, quad_points: int = 4001) -> StabilityCertificate:
    """Certificate from ``M = M1 M2 ||J|| ||K|| / (eps1 eps2)``.

    When M < 1 the integral bound ``int_0^inf ||exp(tH)z|| dt <= M0/(1-M) ||z||``
    is checked on the probes: quadrature up to T with exp(max(eps) T) = 1e-6
    plus the analytic tail ``M0 exp(eps T)/|eps| ||z||``.
    """
    M1, e1, M2, e2 = _need_bounds(sys)
    nJ, nK = operator_norm(sys.J), operator_norm(sys.K)
    M = M1 * M2 * nJ * nK / (e1 * e2)
    M0 = M1 / abs(e1) + M2 / abs(e2) + M1 * M2 * nJ / (e1 * e2) + M1 * M2 * nK / (e1 * e2)
    Hc = sys.assembled()
    evidence = {"spectral_abscissa": spectral_abscissa(Hc), "integral_check": None}
    if M < 1 and probes is not None:
        eps = max(e1, e2)
        T = np.log(1e6) / abs(eps)
        t = np.linspace(0.0, T, quad_points)
        Z = np.column_stack([np.asarray(z, dtype=complex) for z in probes])
        E = _sampled_exp(Hc, t)
        traj = np.einsum("tij,jk->tik", E, Z)
        integrals = np.trapezoid(np.linalg.norm(traj, axis=1), t, axis=0)
        norms = np.linalg.norm(Z, axis=0)
        tail = M0 * np.exp(eps * T) / abs(eps) * norms
        rhs = M0 / (1 - M) * norms
        lhs = integrals + tail
        evidence["integral_check"] = {
            "T": float(T),
            "worst_ratio": float(np.max(lhs / rhs)),
            "passed": bool(np.all(lhs <= rhs)),
        }
    verdict = "uniformly_exponentially_stable" if M < 1 else "inconclusive"
    return StabilityCertificate(float(M), float(M0), verdict, evidence)


def coupled_boundedness(sys: BlockSystem2x2, T_max: float = 1e3) -> dict:
    """Bounded evolution for upper-triangular coupling (J = 0).

    Compares the premise (eps1 < 0 or eps2 < 0) with the observed boundedness
    and confirms that the series stops after S_1.
    """
    if operator_norm(sys.J) != 0.0:
        raise PremiseViolated("coupled_boundedness needs J = 0")
    M1, e1, M2, e2 = _need_bounds(sys, strict=False)
    premise = e1 < 0 or e2 < 0
    rep = check_boundedness(sys.assembled(), T_max)
    dp = dyson_phillips(sys, T=1.0, steps=16, k_max=3)
    tail = max((float(np.max(np.abs(s.samples))) for s in dp.terms[2:]), default=0.0)
    return {
        "premise": bool(premise),
        "bounded": rep.bounded,
        "observed_sup": rep.observed_sup,
        "trend_slope": rep.trend_slope,
        "agreement": (not premise) or rep.bounded,
        "series_terminates": tail == 0.0,
    }


def spectral_disjointness(sys: BlockSystem2x2, tol: float = 1e-8) -> dict:
    """Distance between the imaginary-axis spectra of H and Lb."""
    wH, wL = eigenvalues(sys.H), eigenvalues(sys.Lb)
    iH = wH[np.abs(wH.real) <= tol]
    iL = wL[np.abs(wL.real) <= tol]
    if iH.size and iL.size:
        dist = float(np.min(np.abs(iH[:, None] - iL[None, :])))
    else:
        dist = float("inf")
    return {
        "imaginary_H": iH.tolist(),
        "imaginary_Lb": iL.tolist(),
        "min_distance": dist,
        "disjoint": dist > tol,
    }


def random_block_system(
    rng: np.random.Generator,
    p: int,
    q: int,
    M_target: float | None = None,
    J_zero: bool = False,
    marginal: str | None = None,
    normal: bool = True,
    T_max: float = 50.0,
) -> BlockSystem2x2:
    """Random Hurwitz 2x2 block system with attached growth bounds.

    Diagonal blocks have eigenvalues with real parts in [-3, -0.5]; with
    ``normal=False`` a strictly upper-triangular part is added (transient
    growth, M1 or M2 > 1). ``marginal`` in {"H", "Lb"} makes that block
    skew-Hermitian instead. When ``M_target`` is given the couplings are
    rescaled so the composite constant equals it; with ``J_zero`` only K is set.
    """

    def block(n, skew):
        if skew:
            return np.diag(1j * rng.uniform(-3, 3, n))
        D = np.diag(rng.uniform(-3, -0.5, n) + 1j * rng.uniform(-2, 2, n))
        if not normal:
            D = D + np.triu(rng.standard_normal((n, n)), 1)
        return D

    H = block(p, marginal == "H")
    Lb = block(q, marginal == "Lb")
    J = np.zeros((p, q)) if J_zero else rng.standard_normal((p, q)) + 1j * rng.standard_normal((p, q))
    K = rng.standard_normal((q, p)) + 1j * rng.standard_normal((q, p))
    sys = BlockSystem2x2(H, J, K, Lb).with_bounds(T_max)
    if M_target is not None and not J_zero:
        M1, e1, M2, e2 = sys.bounds
        target = np.sqrt(M_target * e1 * e2 / (M1 * M2))
        sys = replace(sys, J=sys.J * target / operator_norm(sys.J), K=sys.K * target / operator_norm(sys.K))
    return sys
