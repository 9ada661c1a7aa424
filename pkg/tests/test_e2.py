import math

import numpy as np
import pytest

from keflow import e2flow as e2
from keflow.curvature import (convergence_order, einstein_residual,
                              exterior_derivative_closedness)
from keflow.errors import DomainError
from keflow.grids import Axis
from keflow.odes import Trajectory


@pytest.fixture(scope="module")
def shoot100():
    return e2.shoot_unstable(1.0, 1e-5, b_max=100.0, tol=1e-12)


def test_rhs_and_jacobian_consistent():
    a, b, c = 0.9, 0.4, 1.1
    J = e2.e2_jacobian(a, b, c)
    eps = 1e-7
    for j, dv in enumerate(np.eye(3) * eps):
        fd = (np.array(e2.e2_rhs(a + dv[0], b + dv[1], c + dv[2]))
              - np.array(e2.e2_rhs(a - dv[0], b - dv[1], c - dv[2]))) / (2 * eps)
        assert np.max(np.abs(fd - J[:, j])) < 1e-6


def test_saddle_spectrum():
    for q in (1.0, 1.7):
        lin = e2.linearization(q)
        np.testing.assert_allclose(lin.eigenvalues,
                                   [q * q, 0.0, -2.0 * q * q], atol=1e-12)
        v = lin.unstable_direction
        np.testing.assert_allclose(np.abs(v), [0.0, 1.0, 0.0], atol=1e-12)


def test_degenerate_equilibrium_has_zero_jacobian():
    lin = e2.linearization(1.3, e2.EQUILIBRIUM_DEGENERATE)
    assert np.max(np.abs(lin.matrix)) == 0.0
    with pytest.raises(DomainError):
        lin.unstable_direction


def test_classify_start():
    assert e2.classify_start(1.0, 0.1, 1.0) == "trapped"
    assert e2.classify_start(1.0, 0.1, 0.9) == "a-blowup"
    assert e2.classify_start(1.0, 0.1, 1.4) == "c-blowup"


def test_shoot_reaches_target_and_stays_trapped(shoot100):
    traj = shoot100
    assert traj.stop_reason == "event:b_max"
    assert abs(traj.column("b")[-1] - 100.0) < 1e-6
    diag = e2.diagnose(traj)
    assert diag.region_ok
    assert diag.nullcline_ok
    assert all(diag.monotone_ok.values())
    assert not diag.inconclusive


def test_shoot_off_curve_flagged():
    traj = e2.shoot_unstable(1.0, b_max=5.0, start=(2.0, 0.5, 0.3))
    diag = e2.diagnose(traj)
    assert not diag.region_ok
    assert "unstable curve" in diag.notes


def test_scaling_map_symmetry(shoot100):
    k = 2.0
    sc = e2.scaling_map(shoot100, k)
    t = shoot100.t[5]
    orig = np.asarray(shoot100.sample([t])).ravel()
    mapped = np.asarray(sc.sample([t / (k * k)])).ravel()
    assert abs(mapped[0] - k * orig[0]) < 1e-10
    assert abs(mapped[1] - orig[1]) < 1e-10
    assert abs(mapped[2] - k * orig[2]) < 1e-10
    with pytest.raises(DomainError):
        e2.scaling_map(shoot100, -1.0)


def test_arclength_needs_dense_output(shoot100):
    back = Trajectory.from_csv(shoot100.to_csv())
    with pytest.raises(DomainError):
        e2.bolt_profile(back, r_max=0.1)


def test_bolt_profile_and_smoothness(shoot100):
    prof = e2.bolt_profile(shoot100, r_max=0.4, n=160)
    assert prof.r[0] < 1e-4 and prof.r[-1] == pytest.approx(0.4)
    sm = e2.bolt_smoothness(prof, r0=0.2)
    assert abs(sm.db_dr_limit - 1.0) < 1e-4
    assert sm.a2c2_refinement_change < 0.01 * abs(sm.a2c2_limit)
    assert sm.crab_refinement_change < 0.01 * abs(sm.crab_limit)
    # csv round trip feeds the spline path of the extrapolation
    prof2 = e2.BoltProfile.from_csv(prof.to_csv())
    sm2 = e2.bolt_smoothness(prof2, r0=0.2)
    assert abs(sm2.db_dr_limit - sm.db_dr_limit) < 1e-6


def test_bolt_needs_room_for_ladder(shoot100):
    prof = e2.bolt_profile(shoot100, r_max=0.4, n=160)
    with pytest.raises(DomainError):
        e2.bolt_smoothness(prof, r0=2.0 * prof.r[0])


def test_distance_between_slices_matches_growth(shoot100):
    d = e2.distance_between_b_slices(shoot100, 10.0, 100.0)
    k2 = 2.0 * math.sqrt(1.5)
    assert d >= 0.9 * k2 * math.log(10.0)
    assert d <= 1.1 * k2 * math.log(10.0)


def test_e2_metric_is_einstein(shoot100):
    bvals = shoot100.column("b")
    tmid = shoot100.t[int(np.searchsorted(bvals, 1.0))]
    resids = []
    hs = [4e-3, 2e-3, 1e-3]
    for h in hs:
        t_axis = Axis("t", tmid - 3 * h, h, 7)
        th_axis = Axis("theta", 0.7 - 3 * h, h, 7)
        x_axis = Axis("x", -2 * h, h, 5)
        y_axis = Axis("y", -2 * h, h, 5)
        g = e2.e2_metric_grid(shoot100, t_axis, th_axis, x_axis, y_axis)
        resids.append(einstein_residual(g, -1.0))
    assert resids[-1] < 5e-3
    fit = convergence_order(hs, resids)
    assert 1.8 <= fit.order <= 2.2


def test_e2_kahler_form_closed(shoot100):
    # the residual is pure stencil truncation, so it must refine at order 2
    bvals = shoot100.column("b")
    tmid = shoot100.t[int(np.searchsorted(bvals, 1.0))]
    hs = [4e-3, 2e-3, 1e-3]
    res = []
    for h in hs:
        w = e2.e2_kahler_form_grid(shoot100, Axis("t", tmid - 3 * h, h, 7),
                                   Axis("theta", 0.7 - 3 * h, h, 7))
        res.append(exterior_derivative_closedness(w))
    assert res[-1] < 1e-4
    assert 1.8 <= convergence_order(hs, res).order <= 2.2
