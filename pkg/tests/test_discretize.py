import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dynbc.discretize import (
    Grid1D, NetworkGraph, build_custom, build_interval_plate, build_network_wave,
    build_strongly_damped_interval, fd_weights, second_difference,
)
from dynbc.errors import DimensionMismatch, DisconnectedGraph, InvalidSize, RankDeficientL


def test_fd_weights_classic_stencils():
    assert np.allclose(fd_weights(0.0, [-1, 0, 1], 2), [1, -2, 1])
    assert np.allclose(fd_weights(0.0, [0, 1, 2], 1), [-1.5, 2, -0.5])


def test_grid_invariants():
    g = Grid1D(9)
    assert g.h * (g.n_interior + 1) == pytest.approx(1.0)
    with pytest.raises(InvalidSize):
        Grid1D(3)


# plate

def test_plate_boundary_signs_at_left_end():
    # force at x=j is (-1)^{j+1} u''' + (-1)^j u'; B2 carries (-1)^j u', so
    # B1 - B2 isolates the u''' term, and the stencils are exact on these data
    P = build_interval_plate(16)
    x = P.nodes
    third = ((P.B1 - P.B2) @ x**3).real
    assert third == pytest.approx([-6.0, 6.0], rel=1e-8)
    assert (P.B1 @ x).real == pytest.approx([1.0, -1.0], rel=1e-9)
    assert np.allclose(P.B3, -np.eye(2)) and np.allclose(P.B4, -np.eye(2))
    assert P.case_tag == "bounded_trace" and P.dim_dX == P.dim_dY == 2


def test_plate_annihilates_constants_on_interior_stencil_rows():
    n = 16
    P = build_interval_plate(n)
    u = np.ones(n + 2)
    # rows away from the ghost closure use the pure five-point stencil
    assert np.allclose((P.A @ u)[3 : n - 1], 0, atol=1e-6)


def test_five_point_stencil_exact_on_quartic():
    # hand computation with exact rationals for n=8 gives 24 on every row
    n = 8
    P = build_interval_plate(n)
    x = P.nodes
    assert np.allclose(-(P.A @ x**4)[3 : n - 1].real, 24.0, rtol=1e-8)


def test_plate_interior_block_symmetric_negative_definite():
    P = build_interval_plate(20)
    inner = P.A[3:-3, 3:-3].real
    assert np.allclose(inner, inner.T)
    assert np.max(np.linalg.eigvalsh(inner)) < 0


def test_plate_rejects_small_n():
    with pytest.raises(InvalidSize):
        build_interval_plate(6)


# second difference

def test_second_difference_converges_at_second_order():
    errs = []
    for n in (16, 32, 64):
        h = 1.0 / (n + 1)
        x = h * np.arange(1, n + 1)
        s = np.sin(np.pi * x)
        err = np.max(np.abs(second_difference(n) @ s + np.pi**2 * s))
        assert err <= np.pi**4 / 12 * h**2 * np.max(np.abs(s))
        errs.append(err)
    assert np.log2(errs[0] / errs[1]) >= 1.9 and np.log2(errs[1] / errs[2]) >= 1.9


# network

def single_edge(n=8):
    return NetworkGraph.uniform(2, [(0, 1)], n)


def test_single_edge_normal_derivatives_of_linear_data():
    g = single_edge()
    P = build_network_wave(g, np.zeros((2, 2)), np.zeros((2, 2)), np.eye(2))
    x = g.edge_grids[0].nodes
    u = np.concatenate([x[1:-1], [x[0], x[-1]]])
    assert np.allclose(P.B1 @ u, [-1.0, 1.0], atol=1e-12)


def test_single_edge_degenerate_case_is_plain_interval():
    n = 8
    g = single_edge(n)
    P = build_network_wave(g, np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((2, 2)))
    assert np.all(P.B1 == 0) and np.all(P.B3 == 0) and np.all(P.C == 0)
    # hand-built: interior rows of D2 with the endpoints moved to the last two dofs
    h = 1.0 / (n + 1)
    A = np.zeros((n + 2, n + 2))
    A[:n, :n] = second_difference(n)
    A[0, n] = A[n - 1, n + 1] = 1 / h**2
    xs = np.arange(n + 2) * h
    A[n, [n, 0, 1, 2]] = fd_weights(xs[0], xs[:4], 2)
    A[n + 1, [n + 1, n - 1, n - 2, n - 3]] = fd_weights(xs[-1], xs[::-1][:4], 2)
    assert np.array_equal(P.A.real, A)
    L = np.zeros((2, n + 2))
    L[0, n] = L[1, n + 1] = 1
    assert np.array_equal(P.L.real, L)


def test_zero_feedback_decouples_vertex_dynamics():
    g = NetworkGraph.uniform(3, [(0, 1), (1, 2)], 6)
    Z = np.zeros((3, 3))
    P = build_network_wave(g, Z, Z, Z)
    u = np.random.default_rng(0).standard_normal(P.dim_X)
    acc = P.B1 @ u + P.B2 @ u + P.B3 @ (P.L @ u) + P.B4 @ (P.L @ u)
    assert np.all(acc == 0)


def test_network_errors():
    with pytest.raises(DisconnectedGraph):
        NetworkGraph.uniform(4, [(0, 1), (2, 3)], 6)
    with pytest.raises(DimensionMismatch):
        NetworkGraph.uniform(2, [(0, 2)], 6)
    g = single_edge()
    with pytest.raises(DimensionMismatch):
        build_network_wave(g, np.zeros((3, 3)), np.zeros((2, 2)), np.zeros((2, 2)))


# strongly damped interval

def test_strongly_damped_feedback_on_linear_function():
    P = build_strongly_damped_interval(1.0, (2.5, 0, 0, 0), 8)
    assert (P.B1 @ P.nodes)[0] == pytest.approx(-2.5)
    assert P.case_tag == "strong_damping_bounded" and P.dim_dX == 1


def test_strongly_damped_alpha_zero_gives_zero_A():
    P = build_strongly_damped_interval(0.0, (1, 1, 1, 1), 8)
    assert np.all(P.A == 0)


def test_strongly_damped_rejects_small_n():
    with pytest.raises(InvalidSize):
        build_strongly_damped_interval(1.0, (0, 0, 0, 0), 3)


# custom

def custom_fields(L):
    n = 4
    m = np.atleast_2d(L).shape[0]
    return dict(A=np.eye(n), C=np.eye(n), L=L, B1=np.zeros((m, n)), B2=np.zeros((m, n)), B3=np.zeros((m, m)), B4=np.zeros((m, m)))


def test_custom_accepts_surjective_L():
    P = build_custom(**custom_fields([[1, 0, 0, 0]]))
    assert P.dim_dX == 1 and list(P.v_selector) == [1, 2, 3]


def test_custom_rejects_zero_row():
    with pytest.raises(RankDeficientL):
        build_custom(**custom_fields([[0, 0, 0, 0]]))


def test_custom_rejects_duplicated_rows():
    with pytest.raises(RankDeficientL):
        build_custom(**custom_fields([[1, 2, 0, 0], [1, 2, 0, 0]]))


@given(st.integers(8, 24), st.floats(-2, 2), st.floats(-2, 2))
def test_builders_are_deterministic(n, a, b):
    for make in (
        lambda: build_interval_plate(n),
        lambda: build_strongly_damped_interval(a, (b, a, b, a), n),
        lambda: build_network_wave(NetworkGraph.uniform(3, [(0, 1), (1, 2), (2, 0)], n), -np.eye(3), -np.eye(3), b * np.eye(3)),
    ):
        P1, P2 = make(), make()
        for name in ("A", "C", "L", "B1", "B2", "B3", "B4"):
            assert np.array_equal(getattr(P1, name), getattr(P2, name))
