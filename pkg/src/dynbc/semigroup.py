"""Time evolution and qualitative diagnostics of assembled generators."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .coupling import ReducedSystem, kernel_restriction
from .discretize import DiscreteProblem
from .errors import BlockMapMismatch, NonConvergedValidation, SingularMatrix
from .matcore import matrix_exponential, operator_norm, spectral_abscissa
from .parallel import pmap


@dataclass(frozen=True)
class EvolutionTrace:
    """States and propagator norms on a uniform time grid."""

    time_grid: np.ndarray
    states: np.ndarray
    norms: np.ndarray
    system: ReducedSystem | None = None

    def block_norms(self) -> dict:
        """Per-block Euclidean norms of the states, keyed by block name."""
        if self.system is None:
            return {}
        return {k: np.linalg.norm(self.states[:, s], axis=1) for k, s in self.system.block_map.items()}


def evolve(G, u0, T: float, steps: int, system: ReducedSystem | None = None) -> EvolutionTrace:
    """Sample ``exp(tG) u0`` at ``t_i = i T/steps`` with one matrix exponential."""
    if steps < 1 or T <= 0:
        raise ValueError("need steps >= 1 and T > 0")
    G = np.asarray(G, dtype=complex)
    u0 = np.asarray(u0, dtype=complex).ravel()
    if u0.size != G.shape[0]:
        raise BlockMapMismatch(f"state of size {u0.size} for a generator of size {G.shape[0]}")
    E = matrix_exponential(G, T / steps)
    n = G.shape[0]
    states = np.empty((steps + 1, n), dtype=complex)
    norms = np.empty(steps + 1)
    prop = np.eye(n, dtype=complex)
    states[0] = u0
    norms[0] = 1.0
    for i in range(1, steps + 1):
        prop = E @ prop
        states[i] = prop @ u0
        norms[i] = operator_norm(prop)
    return EvolutionTrace(np.linspace(0.0, T, steps + 1), states, norms, system)


def propagator_norms(G, times) -> np.ndarray:
    G = np.asarray(G, dtype=complex)
    return np.array(pmap(lambda t: operator_norm(matrix_exponential(G, t)), times))


@dataclass(frozen=True)
class GrowthBound:
    spectral_abscissa: float
    transient_M: float
    epsilon_used: float


def _growth_times(T_max: float, samples: int) -> np.ndarray:
    return np.concatenate([[0.0], np.logspace(np.log10(T_max) - 4, np.log10(T_max), samples - 1)])


def growth_bound(G, T_max: float = 50.0, samples: int = 64, margin: float | None = None) -> GrowthBound:
    """Envelope ``||exp(tG)|| <= M exp(eps t)`` on a sample grid.

    ``eps`` is the spectral abscissa plus ``margin``. M is the sampled
    maximum of ``||exp(tG)|| exp(-eps t)`` on a grid refined by a factor
    two; if refining raised the maximum by more than 5% the sampling is
    declared too coarse.
    """
    if samples < 16:
        raise ValueError("growth_bound needs samples >= 16")
    a = spectral_abscissa(G)
    if margin is None:
        margin = 1e-3 * abs(a) if a != 0 else 1e-6
    eps = a + margin
    coarse_t = _growth_times(T_max, samples)
    fine_t = _growth_times(T_max, 2 * samples - 1)
    coarse = np.max(propagator_norms(G, coarse_t) * np.exp(-eps * coarse_t))
    fine = np.max(propagator_norms(G, fine_t) * np.exp(-eps * fine_t))
    if fine > 1.05 * coarse:
        raise NonConvergedValidation(f"refined sampling raised M from {coarse:.4g} to {fine:.4g}")
    return GrowthBound(float(a), float(max(coarse, fine, 1.0)), float(eps))


@dataclass(frozen=True)
class BoundednessReport:
    bounded: bool
    observed_sup: float
    trend_slope: float
    T_max: float


def check_boundedness(G, T_max: float, bound: float = 1e8, samples: int = 200, trend_samples: int = 400) -> BoundednessReport:
    """Sup of ``||exp(tG)||`` over log-spaced t and a growth-trend test.

    The trend is the least-squares slope of ``log ||exp(tG)||`` against t on
    a uniform grid over the final decade [T_max/10, T_max]; it must not
    exceed 1e-3.
    """
    if T_max <= 0:
        raise ValueError("T_max must be positive")
    G = np.asarray(G, dtype=complex)
    t_log = np.logspace(np.log10(T_max) - 6, np.log10(T_max), samples)
    sup = max(1.0, float(np.max(propagator_norms(G, t_log))))
    t_dec = np.linspace(T_max / 10, T_max, trend_samples)
    step = matrix_exponential(G, t_dec[1] - t_dec[0])
    prop = matrix_exponential(G, t_dec[0])
    logs = np.empty(trend_samples)
    for i in range(trend_samples):
        logs[i] = np.log(max(operator_norm(prop), np.finfo(float).tiny))
        prop = step @ prop
    slope = float(np.polyfit(t_dec, logs, 1)[0])
    sup = max(sup, float(np.exp(logs.max())))
    return BoundednessReport(bool(np.isfinite(sup) and sup <= bound and slope <= 1e-3), sup, slope, float(T_max))


@dataclass(frozen=True)
class SectorialityReport:
    omega: float
    thetas: tuple
    sup_norms: dict
    verdict: str
    threshold: float
    flagged: tuple = ()

    @property
    def worst(self) -> float:
        return max(self.sup_norms.values()) if self.sup_norms else 0.0


def check_analyticity(
    G,
    omega: float,
    thetas=(85.0, 88.0, 90.0),
    radii=None,
    threshold: float = 1e3,
) -> SectorialityReport:
    """Probe ``||lam R(lam, G - omega)||`` along rays ``lam = r exp(+-i theta)``.

    Angles are in degrees. Probe points that hit the spectrum are skipped and
    listed in ``flagged``.
    """
    G = np.asarray(G, dtype=complex)
    if omega <= spectral_abscissa(G):
        raise ValueError("omega must exceed the spectral abscissa")
    radii = np.logspace(-2, 6, 81) if radii is None else np.asarray(radii, dtype=float)
    # Schur form: the resolvent norm is unitarily invariant, and triangular solves are cheap
    T, _ = sla.schur(G - omega * np.eye(G.shape[0]), output="complex")
    n = T.shape[0]
    I = np.eye(n, dtype=complex)
    rays = [s * th for th in thetas for s in (1, -1) if not (s == -1 and th == 0)]

    def probe(angle):
        sup, bad = 0.0, []
        for r in radii:
            lam = r * np.exp(1j * np.deg2rad(angle))
            M = lam * I - T
            d = np.abs(np.diag(M))
            if d.min() < 1e-14 * max(1.0, np.abs(M).max()):
                bad.append((angle, float(r)))
                continue
            R = sla.solve_triangular(M, I)
            sup = max(sup, abs(lam) * operator_norm(R))
        return angle, sup, bad

    results = pmap(probe, rays)
    sup_norms = {a: float(s) for a, s, _ in results}
    flagged = tuple(b for _, _, bl in results for b in bl)
    ok = all(v <= threshold for v in sup_norms.values())
    return SectorialityReport(
        float(omega), tuple(thetas), sup_norms,
        "consistent_with_analytic" if ok else "inconsistent", float(threshold), flagged,
    )


def energy_scaled_generator(P: DiscreteProblem, R: ReducedSystem) -> np.ndarray:
    """Generator in the energy inner product of the interior block.

    Conjugates by ``S = diag((-sym A0)^{1/2}, I, I, I)`` so the position
    coordinate is measured in the norm induced by the elastic operator.
    Needs -sym(A0) positive definite and a form whose first block is ker(L).
    """
    if R.form_tag not in ("G_form", "G_underline", "H_underline"):
        raise ValueError(f"energy scaling is not defined for {R.form_tag}")
    A0, _ = kernel_restriction(P.A, P.L)
    w, V = np.linalg.eigh(-(A0 + A0.conj().T) / 2)
    if w.min() <= 0:
        raise ValueError("-sym(A0) is not positive definite")
    r = A0.shape[0]
    S = np.eye(R.dim, dtype=complex)
    S_inv = np.eye(R.dim, dtype=complex)
    S[:r, :r] = (V * np.sqrt(w)) @ V.conj().T
    S_inv[:r, :r] = (V / np.sqrt(w)) @ V.conj().T
    return S @ R.G @ S_inv


def cosine_family(A, t: float) -> np.ndarray:
    """C(t) solving U'' = A U, U(0) = I, U'(0) = 0."""
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    Z = np.zeros((n, n), dtype=complex)
    big = np.block([[Z, np.eye(n)], [A, Z]])
    return matrix_exponential(big, t)[:n, :n]


def dalembert_check(A, t: float, s: float) -> float:
    """``||C(t+s) + C(t-s) - 2 C(t) C(s)||``."""
    Ct, Cs = cosine_family(A, t), cosine_family(A, s)
    return operator_norm(cosine_family(A, t + s) + cosine_family(A, t - s) - 2 * Ct @ Cs)


def dalembert_tolerance(A, t: float, s: float) -> float:
    return 1e-8 * (1 + operator_norm(cosine_family(A, t)) * operator_norm(cosine_family(A, s)))


def wentzell_residual(P: DiscreteProblem, trace: EvolutionTrace, index: int) -> float:
    """Boundary identity defect ``||L(Au + Cu') - B1 u - B2 u' - B3 Lu - B4 Lu'||``."""
    if index < 1:
        raise ValueError("the boundary identity is only asserted for t > 0 (index >= 1)")
    R = trace.system
    if R is None:
        raise BlockMapMismatch("trace carries no reduced system")
    if R.meta.get("dim_X") != P.dim_X or R.meta.get("dim_dX") != P.dim_dX or trace.states.shape[1] != R.dim:
        raise BlockMapMismatch("trace does not belong to this problem")
    z = trace.states[index]
    u = R.displacement @ z
    ud = R.velocity @ z
    r = P.L @ (P.A @ u + P.C @ ud) - P.B1 @ u - P.B2 @ ud - P.B3 @ (P.L @ u) - P.B4 @ (P.L @ ud)
    return float(np.linalg.norm(r))


def initial_state(R: ReducedSystem, P: DiscreteProblem, u, v) -> np.ndarray:
    """Reduced coordinates of position u and velocity v (constraint-consistent)."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    ambient = np.concatenate([u, P.L @ u, v, P.L @ v])
    return R.U @ ambient


def wentzell_scale(P: DiscreteProblem, trace: EvolutionTrace, index: int) -> float:
    """Normwise size of the terms entering the boundary identity.

    Dividing ``wentzell_residual`` by this gives a relative defect that is
    insensitive to the grid-dependent growth of ``||A||``.
    """
    R = trace.system
    if R is None:
        raise BlockMapMismatch("trace carries no reduced system")
    z = trace.states[index]
    u = R.displacement @ z
    ud = R.velocity @ z
    nu, nud = np.linalg.norm(u), np.linalg.norm(ud)
    Lu, Lud = np.linalg.norm(P.L @ u), np.linalg.norm(P.L @ ud)
    nrm = operator_norm
    return float(
        nrm(P.L) * (nrm(P.A) * nu + nrm(P.C) * nud)
        + nrm(P.B1) * nu + nrm(P.B2) * nud + nrm(P.B3) * Lu + nrm(P.B4) * Lud
    )
