import numpy as np
import pytest

from keflow.bianchi import (ABCState, BianchiParams, CLOSED_FORM_CASES,
                            ClosedFormConstants, abc_rhs, closed_form,
                            closed_form_derivative, closed_form_params,
                            heisenberg_invariants, integrate,
                            kahler_form_components, metric_components,
                            torus_metric_grid, trajectory_states)
from keflow.curvature import einstein_residual, riemann_max
from keflow.errors import DomainError
from keflow.grids import Axis

CONSTS = ClosedFormConstants(k=1.2, w3=0.8, alpha=0.3, a0=1.1, b0=0.9, c0=1.3)
WINDOWS = {"poincare": (0.375, 1.5), "torus": (-2.0, 2.0),
           "heisenberg": (0.5, 3.0), "euclidean": (0.5, 3.0)}


def test_params_validation():
    with pytest.raises(DomainError):
        BianchiParams(1.0, 1.0, 0.0, lam=-1.0, alpha0=0.1)
    with pytest.raises(DomainError):
        BianchiParams(1.0, 1.0, 0.0, lam=0.0)  # alpha0 required
    with pytest.raises(DomainError):
        BianchiParams(1.0, 0.0, 1.0, lam=-1.0, alpha0=0.2)  # alpha0 forbidden
    p = BianchiParams(1.0, 0.0, 1.0, lam=-1.0)
    assert p.alpha(2.0, 3.0) == pytest.approx(36.0)


def test_state_positivity():
    with pytest.raises(DomainError):
        ABCState(0.0, 1.0, -0.5, 1.0)
    with pytest.raises(DomainError):
        ABCState(0.0, 1.0, np.inf, 1.0)


def test_closed_form_domains():
    with pytest.raises(DomainError):
        closed_form("poincare", CONSTS, CONSTS.t0)  # u = 0 endpoint
    with pytest.raises(DomainError):
        closed_form("heisenberg", CONSTS, CONSTS.t0 - 0.1)
    with pytest.raises(DomainError):
        closed_form("nonsense", CONSTS, 1.0)


def test_closed_form_solves_flow():
    # analytic derivative of each family equals the flow's right-hand side
    for case in CLOSED_FORM_CASES:
        params = closed_form_params(case, CONSTS)
        lo, hi = WINDOWS[case]
        worst = 0.0
        for t in np.linspace(lo, hi, 60):
            s = closed_form(case, CONSTS, float(t))
            d_an = np.array(closed_form_derivative(case, CONSTS, float(t)))
            d_fl = np.array(abc_rhs(params, s))
            worst = max(worst, float(np.max(np.abs(d_an - d_fl))))
        assert worst < 1e-10, f"{case}: {worst}"


def test_integrate_tracks_closed_form():
    params = closed_form_params("euclidean", CONSTS)
    s0 = closed_form("euclidean", CONSTS, 1.0)
    traj = integrate(params, s0, 3.0, tol=1e-10)
    assert not traj.blow_up
    dev = 0.0
    for t, row in zip(traj.t, traj.states):
        ref = closed_form("euclidean", CONSTS, float(t))
        dev = max(dev, float(np.max(np.abs(row - [ref.a, ref.b, ref.c]))))
    assert dev < 5e-9


def test_poincare_collapse_detected():
    params = closed_form_params("poincare", CONSTS)
    endpoint = CONSTS.t0 + 0.5 * np.pi / CONSTS.w3
    s0 = closed_form("poincare", CONSTS, 0.5 * endpoint)
    traj = integrate(params, s0, endpoint + 1.0, tol=1e-10)
    assert traj.blow_up
    assert traj.t[-1] <= endpoint + 1e-6


def test_heisenberg_invariants_conserved():
    params = BianchiParams(0.0, 0.0, 1.0, lam=-1.0)
    traj = integrate(params, ABCState(0.0, 0.5, 0.5, 0.4), 5.0, tol=1e-10)
    assert not traj.blow_up
    states = trajectory_states(traj)
    inv0 = heisenberg_invariants(states[0])
    for s in states:
        iv = heisenberg_invariants(s)
        assert abs(iv[0] - inv0[0]) < 1e-8
        assert abs(iv[1] - inv0[1]) < 1e-8


def test_torus_metric_flat_for_any_alpha():
    # the torus family is locally flat even away from alpha = a0 b0
    cone = ClosedFormConstants(alpha=0.5, a0=1.1, b0=0.9)
    g = torus_metric_grid(cone, Axis("t", 0.5 - 3e-3, 1e-3, 7))
    assert riemann_max(g) < 1e-5
    assert einstein_residual(g, 0.0) < 1e-5


def test_metric_and_kahler_components():
    s = ABCState(0.7, 1.1, 0.8, 1.3)
    params = BianchiParams(1.0, 0.0, 1.0, lam=-1.0)
    comps = metric_components(params, s)
    vol = s.a * s.b * s.c
    assert comps[0] == pytest.approx(vol * vol)
    assert comps[1:] == (pytest.approx(s.a ** 2), pytest.approx(s.b ** 2),
                         pytest.approx(s.c ** 2))
    w = kahler_form_components(s)
    assert w[0] == pytest.approx(vol * s.c)
    assert w[1] == pytest.approx(s.a * s.b)


def test_trajectory_meta_round_trip():
    params = closed_form_params("torus", CONSTS)
    s0 = closed_form("torus", CONSTS, 0.0)
    traj = integrate(params, s0, 1.0, tol=1e-10)
    assert traj.meta["p3"] == 0.0
    assert traj.meta["alpha0"] == CONSTS.alpha
