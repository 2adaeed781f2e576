import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import unitary_group

from dynbc.coupling import assemble, kernel_restriction
from dynbc.discretize import build_interval_plate, build_strongly_damped_interval
from dynbc.errors import BlockMapMismatch, NonConvergedValidation
from dynbc.discretize import second_difference
from dynbc.matcore import matrix_exponential, operator_norm, spectral_abscissa
from dynbc.semigroup import (
    check_analyticity, check_boundedness, cosine_family, dalembert_check, dalembert_tolerance,
    energy_scaled_generator, evolve, growth_bound, initial_state, propagator_norms, wentzell_residual,
    wentzell_scale,
)


def smooth_data(P):
    x = P.nodes
    return np.cos(np.pi * x) + x**2, np.zeros_like(x)


def trace_for(P, T=1.0, steps=20, lam=1.0, data=None):
    R = assemble(P, lam)
    u, v = smooth_data(P) if data is None else data
    return R, evolve(R.G, initial_state(R, P, u, v), T, steps, R)


# evolve

def test_evolve_zero_generator_is_constant(rng):
    u0 = rng.standard_normal(3)
    tr = evolve(np.zeros((3, 3)), u0, 2.0, 5)
    assert np.allclose(tr.states, u0[None, :])
    assert np.allclose(tr.norms, 1.0)


def test_evolve_scalar_decay():
    tr = evolve([[-1.0]], [1.0], 1.0, 10)
    assert tr.states[-1, 0] == pytest.approx(np.exp(-1.0), rel=1e-12)
    assert np.allclose(tr.time_grid, np.linspace(0, 1, 11))


def test_evolve_matches_direct_exponential(rng):
    G = rng.standard_normal((6, 6)) - 2 * np.eye(6)
    u0 = rng.standard_normal(6)
    tr = evolve(G, u0, 3.0, 30)
    assert tr.norms[0] == pytest.approx(1.0, abs=1e-12)
    for i in (7, 30):
        ref = matrix_exponential(G, tr.time_grid[i]) @ u0
        assert np.linalg.norm(tr.states[i] - ref) <= 1e-8 * np.linalg.norm(ref)


def test_plate_decays(rng):
    # measured in the energy norm; Euclidean block coordinates show transient growth
    P = build_interval_plate(16)
    R = assemble(P, 1.0)
    assert spectral_abscissa(R.G) < 0
    S = energy_scaled_generator(P, R)
    for z0 in rng.standard_normal((5, R.dim)):
        tr = evolve(S, z0, 10.0, 50)
        assert np.linalg.norm(tr.states[-1]) < np.linalg.norm(tr.states[0])
    assert tr.norms[-1] < 1
    assert set(evolve(R.G, z0, 1.0, 2, R).block_norms()) == {"Y", "X", "dY", "dX"}


def test_evolve_rejects_bad_input():
    with pytest.raises(ValueError):
        evolve(np.eye(2), [1, 0], 1.0, 0)
    with pytest.raises(BlockMapMismatch):
        evolve(np.eye(2), [1, 0, 0], 1.0, 3)


# growth bounds

def test_growth_bound_of_minus_identity():
    g = growth_bound(-np.eye(3))
    assert g.spectral_abscissa == pytest.approx(-1.0)
    assert g.transient_M == pytest.approx(1.0, abs=1e-9)


def test_growth_bound_of_zero():
    g = growth_bound(np.zeros((1, 1)))
    assert (g.spectral_abscissa, g.transient_M) == (0.0, 1.0)
    assert g.epsilon_used == pytest.approx(1e-6)


def test_growth_bound_jordan_transient():
    G = np.array([[-1.0, 10.0], [0.0, -1.0]])
    g = growth_bound(G, T_max=50, samples=64)
    assert g.spectral_abscissa == pytest.approx(-1.0)
    # closed form: ||exp(tG)|| = exp(-t) ||[[1, 10t], [0, 1]]||
    t = np.linspace(0, 50, 20001)
    s = 10 * t
    closed = np.exp(-t) * (s + np.sqrt(s**2 + 4)) / 2
    sup_closed = np.max(closed * np.exp(-g.epsilon_used * t))
    assert g.transient_M > 1
    assert g.transient_M <= sup_closed * (1 + 1e-9)
    assert g.transient_M >= 0.95 * sup_closed


def test_growth_bound_strong_transient_and_sample_floor():
    G = np.array([[-1.0, 1e4], [0.0, -1.0]])
    g = growth_bound(G, T_max=5.0, samples=64)
    assert g.transient_M > 1e3
    with pytest.raises(ValueError):
        growth_bound(G, samples=8)


@given(st.integers(0, 2**32 - 1))
def test_growth_envelope_dominates_samples(seed):
    r = np.random.default_rng(seed)
    G = r.standard_normal((4, 4)) - 3 * np.eye(4)
    try:
        g = growth_bound(G, T_max=20, samples=32)
    except NonConvergedValidation:
        return
    assert g.epsilon_used >= g.spectral_abscissa
    t = np.concatenate([[0.0], np.logspace(np.log10(20) - 4, np.log10(20), 31)])
    assert np.all(propagator_norms(G, t) <= g.transient_M * np.exp(g.epsilon_used * t) * (1 + 1e-9))


# boundedness

def test_skew_hermitian_is_bounded_by_one(rng):
    X = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
    rep = check_boundedness(X - X.conj().T, 1e3)
    assert rep.bounded
    assert rep.observed_sup == pytest.approx(1.0, abs=1e-8)


def test_nilpotent_shear_is_unbounded():
    rep = check_boundedness(np.array([[0.0, 1.0], [0.0, 0.0]]), 1e3)
    assert not rep.bounded
    assert rep.observed_sup == pytest.approx((1e3 + np.sqrt(1e6 + 4)) / 2, rel=1e-8)


def test_slow_growth_caught_by_trend():
    rep = check_boundedness(np.array([[0.01]]), 100.0, bound=1e8)
    assert rep.observed_sup < 1e8
    assert rep.trend_slope == pytest.approx(0.01, rel=1e-6)
    assert not rep.bounded


# analyticity

def test_minus_identity_is_sectorial():
    rep = check_analyticity(-np.eye(2), omega=0.0 + 1e-3)
    assert rep.verdict == "consistent_with_analytic"
    # ||lam/(lam + 1.001)|| with |arg lam| <= 90 degrees never exceeds 1
    assert rep.worst <= 1.0 + 1e-12
    assert set(rep.sup_norms) == {85.0, -85.0, 88.0, -88.0, 90.0, -90.0}


def test_rotation_group_is_not_sectorial():
    G = np.array([[0.0, 1.0], [-1.0, 0.0]])
    rep = check_analyticity(G, omega=1e-4)
    assert rep.verdict == "inconsistent"
    # G is normal, so at lam = i the probe equals |i| / |i - (i - omega)| = 1/omega
    assert rep.sup_norms[90.0] == pytest.approx(1e4, rel=1e-9)


def test_analyticity_unitarily_invariant(rng):
    P = build_strongly_damped_interval(1.0, (1, 0, 0, -1), 16)
    G = assemble(P, 1.0).G
    Q = unitary_group.rvs(G.shape[0], random_state=7)
    omega = max(spectral_abscissa(G), 0) + 1e-3
    a = check_analyticity(G, omega)
    b = check_analyticity(Q @ G @ Q.conj().T, omega)
    assert a.verdict == b.verdict
    for k in a.sup_norms:
        assert b.sup_norms[k] == pytest.approx(a.sup_norms[k], rel=1e-6)


def test_analyticity_flags_spectral_hits():
    rep = check_analyticity(np.diag([-1.0]), omega=0.0, thetas=(0.0,), radii=[0.5, 1.0, 2.0])
    assert rep.flagged == () and rep.verdict == "consistent_with_analytic"
    rep = check_analyticity(np.diag([-1.0, 1.0]), omega=2.0, thetas=(180.0,), radii=[1.0, 2.0])
    assert (180.0, 1.0) in rep.flagged


def test_analyticity_requires_omega_above_abscissa():
    with pytest.raises(ValueError):
        check_analyticity(np.eye(2), omega=0.5)


def test_strongly_damped_interval_probe():
    P = build_strongly_damped_interval(1.0, (1, 0, 0, -1), 32)
    R = assemble(P, 1.0)
    rep = check_analyticity(R.G, max(spectral_abscissa(R.G), 0) + 1e-3)
    assert rep.verdict == "consistent_with_analytic"


def test_plate_energy_probe_is_uniform_in_grid():
    worst = []
    for n in (16, 32):
        P = build_interval_plate(n)
        R = assemble(P, 1.0)
        S = energy_scaled_generator(P, R)
        worst.append(check_analyticity(S, 1e-3).worst)
    assert max(worst) < 10
    assert worst[1] < 1.2 * worst[0]


# cosine families

def test_cosine_scalar_cases():
    assert cosine_family([[-1.0]], 0.9)[0, 0] == pytest.approx(np.cos(0.9), abs=1e-14)
    assert np.allclose(cosine_family(np.zeros((3, 3)), 2.0), np.eye(3))
    assert cosine_family([[-4.0]], np.pi / 2)[0, 0] == pytest.approx(-1.0, abs=1e-13)


def test_dalembert_identity():
    assert dalembert_check(-np.eye(2), 0.7, 0.3) <= 1e-14
    assert dalembert_check(np.diag([-3.0, 2.0]), 0.8, 0.0) == 0.0
    D2 = second_difference(16)
    assert dalembert_check(D2, 0.5, 0.25) <= dalembert_tolerance(D2, 0.5, 0.25)


@given(st.floats(-3, 3), st.integers(0, 2**32 - 1))
def test_cosine_is_even(t, seed):
    A = -np.diag(np.random.default_rng(seed).uniform(0, 5, 4))
    assert np.allclose(cosine_family(A, t), cosine_family(A, -t), atol=1e-12)


@given(st.floats(0, 2), st.floats(0, 2), st.integers(0, 2**32 - 1))
def test_semigroup_law(t1, t2, seed):
    G = np.random.default_rng(seed).standard_normal((4, 4)) - np.eye(4)
    lhs = matrix_exponential(G, t1 + t2)
    rhs = matrix_exponential(G, t1) @ matrix_exponential(G, t2)
    assert operator_norm(lhs - rhs) <= 1e-8 * operator_norm(lhs)


# Wentzell boundary identity

def test_wentzell_zero_solution():
    P = build_interval_plate(16)
    R, tr = trace_for(P, data=(np.zeros(P.dim_X), np.zeros(P.dim_X)))
    assert wentzell_residual(P, tr, 5) == 0.0


def test_wentzell_rejects_time_zero_and_foreign_trace():
    P = build_interval_plate(16)
    R, tr = trace_for(P)
    with pytest.raises(ValueError):
        wentzell_residual(P, tr, 0)
    with pytest.raises(BlockMapMismatch):
        wentzell_residual(build_interval_plate(18), tr, 3)
    with pytest.raises(BlockMapMismatch):
        wentzell_residual(P, evolve(R.G, tr.states[0], 1.0, 2), 1)


def test_wentzell_strongly_damped_relative():
    P = build_strongly_damped_interval(1.0, (1, 0, 0, -1), 32)
    R, tr = trace_for(P)
    rel = wentzell_residual(P, tr, 20) / wentzell_scale(P, tr, 20)
    assert rel <= 1e-6


def test_wentzell_strongly_damped_non_increasing():
    P = build_strongly_damped_interval(1.0, (1, 0, 0, -1), 32)
    R, tr = trace_for(P, T=4.0, steps=40)
    assert spectral_abscissa(R.G) < 0
    res = np.array([wentzell_residual(P, tr, i) for i in range(1, 41)])
    assert np.all(res[1:] <= 1.1 * res[:-1])


def test_wentzell_plate_envelope_decays():
    # complex boundary modes make the residual oscillate; its envelope still decays
    P = build_interval_plate(32)
    R, tr = trace_for(P, T=20.0, steps=200)
    res = np.array([wentzell_residual(P, tr, i) for i in range(1, 201)])
    assert res[100:].max() < res[:100].max()
    assert res[150:].max() < res[50:100].max()


def test_wentzell_plate_refines():
    res = []
    for n in (32, 64):
        P = build_interval_plate(n)
        _, tr = trace_for(P)
        res.append(wentzell_residual(P, tr, 20))
    assert res[1] <= 1e-4
    assert np.log2(res[0] / res[1]) >= 1.5


def test_initial_state_roundtrip():
    P = build_interval_plate(16)
    R = assemble(P)
    u, v = smooth_data(P)
    # project to the constraint-consistent subspace used by the reduction
    z = initial_state(R, P, u, v)
    assert np.allclose(R.displacement @ z, u, atol=1e-10)
