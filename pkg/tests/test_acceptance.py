"""Acceptance checks: one test per headline guarantee of the package.

Run with -v to get a single pass/fail line per criterion. Each test asserts
the advertised tolerance exactly; helper fixtures share the expensive
shooting runs. Bounds here are the contract, so they are written out
literally rather than imported from the library.
"""

import math
import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from keflow import bianchi as bi
from keflow import e2flow as e2
from keflow import leafpde as lp
from keflow.bianchi import ABCState, BianchiParams, bianchi_frame_coefficients
from keflow.curvature import (convergence_order, einstein_residual,
                              exterior_derivative_closedness,
                              gauss_curvature_2d, riemann_max)
from keflow.frame_algebra import (PQRSState, from_pqrs,
                                  integrability_residuals,
                                  kahler_relation_residuals,
                                  lambda_constraint, sys_rhs, to_pqrs)
from keflow.grids import Axis, MetricGrid, interior

K2 = 2.0 * math.sqrt(1.5)


def verdict(num, label, checks):
    failed = [name for name, ok in checks if not ok]
    status = "FAIL" if failed else "PASS"
    print(f"[{status}] criterion {num:02d} {label}")
    assert not failed, f"criterion {num:02d} failed: {failed}"


@pytest.fixture(scope="module")
def shot_b100():
    t0 = time.perf_counter()
    traj = e2.shoot_unstable(1.0, 1e-5, b_max=100.0, tol=1e-12)
    return traj, time.perf_counter() - t0


@pytest.fixture(scope="module")
def shot_b1000():
    return e2.shoot_unstable(1.0, 1e-5, b_max=1000.0, tol=1e-12)


def test_criterion_01_closed_form_families():
    t0 = time.perf_counter()
    cc = bi.ClosedFormConstants(k=1.2, w3=0.8, alpha=0.3, t0=0.0,
                                a0=1.1, b0=0.9, c0=1.3)
    windows = {"poincare": (0.3 / 0.8, 1.2 / 0.8), "torus": (-2.0, 2.0),
               "heisenberg": (0.5, 3.0), "euclidean": (0.5, 3.0)}
    checks = []
    for case in bi.CLOSED_FORM_CASES:
        params = bi.closed_form_params(case, cc)
        lo, hi = windows[case]
        worst = 0.0
        for t in np.linspace(lo, hi, 200):
            s = bi.closed_form(case, cc, float(t))
            d_an = np.array(bi.closed_form_derivative(case, cc, float(t)))
            d_fl = np.array(bi.abc_rhs(params, s))
            worst = max(worst, float(np.max(np.abs(d_an - d_fl))))
        checks.append((f"{case} rhs residual {worst:.1e} < 1e-10",
                       worst < 1e-10))

    tol = 1e-10
    for case, cset, span in [
        ("euclidean", bi.ClosedFormConstants(k=1.0, w3=1.0, alpha=0.0),
         (1.0, 2.0)),
        ("euclidean", bi.ClosedFormConstants(k=1.2, w3=0.8, alpha=0.3),
         (1.0, 2.0)),
        ("heisenberg", bi.ClosedFormConstants(k=1.0, w3=1.0, alpha=0.2),
         (1.0, 2.0)),
        ("poincare", bi.ClosedFormConstants(k=1.0, w3=1.0, alpha=0.1),
         (0.4, 1.1)),
        ("torus", bi.ClosedFormConstants(alpha=0.99, a0=1.1, b0=0.9, c0=1.0),
         (0.0, 2.0)),
    ]:
        params = bi.closed_form_params(case, cset)
        traj = bi.integrate(params, bi.closed_form(case, cset, span[0]),
                            span[1], tol=tol)
        dev = 0.0
        for t, row in zip(traj.t, traj.states):
            ref = bi.closed_form(case, cset, float(t))
            dev = max(dev, abs(row[0] - ref.a), abs(row[1] - ref.b),
                      abs(row[2] - ref.c))
        checks.append((f"{case} integrate dev {dev:.1e} < {10 * tol:.0e}",
                       dev < 10 * tol))
    elapsed = time.perf_counter() - t0
    checks.append((f"runtime {elapsed:.2f}s < 5s", elapsed < 5.0))
    verdict(1, "closed-form families solve the flow", checks)


def torus_grid(h, counts=(7, 5, 5, 7)):
    cset = bi.ClosedFormConstants(alpha=0.6, a0=0.8, b0=0.75, c0=1.0)
    return bi.torus_metric_grid(
        cset,
        Axis("t", -h * (counts[0] // 2), h, counts[0]),
        Axis("x", -h * (counts[1] // 2), h, counts[1]),
        Axis("y", -h * (counts[2] // 2), h, counts[2]),
        Axis("z", -h * (counts[3] // 2), h, counts[3]))


def test_criterion_02_torus_alpha_ab_is_flat():
    hs = [4e-3, 2e-3, 1e-3]
    vals = [riemann_max(torus_grid(h)) for h in hs]
    fit = convergence_order(hs, vals)
    verdict(2, "alpha = a0 b0 torus metric is flat", [
        (f"riemann_max {vals[-1]:.1e} < 1e-6 at h=1e-3", vals[-1] < 1e-6),
        (f"order {fit.order:.3f} in [1.8, 2.2]", 1.8 <= fit.order <= 2.2),
    ])


def test_criterion_03_saddle_linearization():
    lin = e2.linearization(1.0)
    ev_err = float(np.max(np.abs(lin.eigenvalues
                                 - np.array([1.0, 0.0, -2.0]))))
    vec_err = float(np.max(np.abs(np.abs(lin.unstable_direction)
                                  - np.array([0.0, 1.0, 0.0]))))
    verdict(3, "linearization at (1,0,1)", [
        (f"eigenvalues {{1,0,-2}} err {ev_err:.1e} < 1e-12", ev_err < 1e-12),
        (f"unstable direction (0,1,0) err {vec_err:.1e} < 1e-12",
         vec_err < 1e-12),
    ])


def test_criterion_04_shoot_to_b_100(shot_b100):
    traj, elapsed = shot_b100
    diag = e2.diagnose(traj)
    a, b, c = (traj.column(k) for k in "abc")
    lower = float((c ** 2 - a ** 2).min())
    upper = float((2 * a ** 2 * b ** 2 - (c ** 2 - a ** 2)).min())
    env = 1.0 / np.sqrt(1.0 + b ** 2)
    ratio = a / c
    env_slack = float((ratio - env).min())
    ac_max = float(ratio.max())
    mono = []
    for f in (a * b, b * c, a * c, b):
        mono.append(float(np.diff(f).min()) >= -1e-10 * float(np.abs(f).max()))
    verdict(4, "unstable-curve shoot stays in the trapping region", [
        (f"reached b=100 ({traj.stop_reason})",
         traj.stop_reason == "event:b_max"),
        (f"0 <= c^2-a^2 slack {lower:.1e} >= -1e-10", lower >= -1e-10),
        (f"c^2-a^2 <= 2a^2b^2 slack {upper:.1e} >= -1e-10", upper >= -1e-10),
        ("ab, bc, ac, b nondecreasing", all(mono)),
        (f"a/c above 1/sqrt(1+b^2), slack {env_slack:.1e} >= -1e-8",
         env_slack >= -1e-8),
        (f"a/c <= 1 (max {ac_max:.12f})", ac_max <= 1.0),
        ("diagnostics agree",
         diag.region_ok and diag.nullcline_ok
         and all(diag.monotone_ok.values())),
        (f"runtime {elapsed:.2f}s < 10s", elapsed < 10.0),
    ])


def test_criterion_05_linear_distance_growth(shot_b1000):
    diag = e2.diagnose(shot_b1000)
    d0, d1 = diag.k2_decades
    d_10_100 = e2.distance_between_b_slices(shot_b1000, 10.0, 100.0)
    bound = 0.9 * K2 * math.log(10.0)
    verdict(5, "distance grows like K2 log b toward the end", [
        (f"tail gap {diag.dist_tail_gap:.1e} < 1e-8",
         diag.dist_tail_gap < 1e-8),
        (f"dist(b=10 -> 100) {d_10_100:.4f} >= {bound:.4f}",
         d_10_100 >= bound),
        (f"fitted K2 positive ({d0:.4f}, {d1:.4f})", d0 > 0 and d1 > 0),
        (f"decade fits within 10% ({abs(d1 - d0) / d0:.2%})",
         abs(d1 - d0) / d0 <= 0.10),
    ])


def test_criterion_06_bolt_smoothness(shot_b100):
    traj, _ = shot_b100
    prof = e2.bolt_profile(traj, r_max=0.4, n=160)
    sm = e2.bolt_smoothness(prof, r0=0.2)
    rel_a2c2 = abs(sm.a2c2_refinement_change / sm.a2c2_limit)
    rel_crab = abs(sm.crab_refinement_change / sm.crab_limit)
    verdict(6, "metric closes smoothly on the bolt", [
        (f"|db/dr(0) - 1| = {sm.db_dr_error:.1e} < 1e-4",
         sm.db_dr_error < 1e-4),
        (f"(a^2-c^2)/r^2 limit {sm.a2c2_limit:.6f} finite",
         math.isfinite(sm.a2c2_limit)),
        (f"(cr-ab)/r^3 limit {sm.crab_limit:.6f} finite",
         math.isfinite(sm.crab_limit)),
        (f"limit shifts under refinement {rel_a2c2:.2%}, {rel_crab:.2%} < 1%",
         rel_a2c2 < 0.01 and rel_crab < 0.01),
    ])


def test_criterion_07_e2_metric_is_einstein(shot_b100):
    traj, _ = shot_b100
    bvals = traj.column("b")
    tmid = traj.t[int(np.searchsorted(bvals, 1.0))]
    counts = (7, 5, 5, 7)

    def grid(h):
        return e2.e2_metric_grid(
            traj,
            Axis("t", tmid - h * (counts[0] // 2), h, counts[0]),
            Axis("theta", 0.7 - h * (counts[3] // 2), h, counts[3]),
            Axis("x", -h * (counts[1] // 2), h, counts[1]),
            Axis("y", -h * (counts[2] // 2), h, counts[2]))

    hs = [4e-3, 2e-3, 1e-3]
    resids = [einstein_residual(grid(h), -1.0) for h in hs]
    fit = convergence_order(hs, resids)
    verdict(7, "shooting solution gives an einstein 4-metric", [
        (f"einstein residual {resids[-1]:.1e} < 5e-3 at h=1e-3",
         resids[-1] < 5e-3),
        (f"order {fit.order:.3f} in [1.8, 2.2]", 1.8 <= fit.order <= 2.2),
    ])


def test_criterion_08_heisenberg_first_integrals():
    params = BianchiParams(0.0, 0.0, 1.0, lam=-1.0)
    s0 = ABCState(0.0, 0.5, 0.5, 0.4)
    inv0 = bi.heisenberg_invariants(s0)
    traj = bi.integrate(params, s0, 5.0, tol=1e-10)
    drift = [0.0, 0.0]
    for t, row in zip(traj.t, traj.states):
        inv = bi.heisenberg_invariants(ABCState(float(t), *row))
        drift[0] = max(drift[0], abs(inv[0] - inv0[0]))
        drift[1] = max(drift[1], abs(inv[1] - inv0[1]))
    verdict(8, "nilpotent-family first integrals are conserved", [
        (f"a/b drift {drift[0]:.1e} < 1e-8", drift[0] < 1e-8),
        (f"ab(c^2 - 2(ab)^2/3) drift {drift[1]:.1e} < 1e-8",
         drift[1] < 1e-8),
    ])


def test_criterion_09_leaf_identities_on_fine_grid():
    n = 257
    xa = Axis("x", 0.0, 1.0 / (n - 1), n)
    ya = Axis("y", 1.0, 1.0 / (n - 1), n)
    spec = lp.leaf_spec(xa, ya, h="x")
    g2, K = lp.leaf_metric(spec)
    dev_K = float(np.nanmax(np.abs(interior(gauss_curvature_2d(g2) - K,
                                            1, 2))))
    rep = lp.leaf_pde_residual(g2, K)
    gK = MetricGrid((xa, ya), g2.components * K[..., None, None])
    dev_conf = float(np.nanmax(np.abs(interior(gauss_curvature_2d(gK), 1, 2)
                                      + 2.0)))
    verdict(9, "leaf curvature and conformal identities", [
        (f"|K_fd - e^h l^1.5| = {dev_K:.1e} < 1e-5", dev_K < 1e-5),
        (f"|lap(log K) - 6K| = {rep.max_residual:.1e} < 1e-4",
         rep.max_residual < 1e-4),
        (f"curvature of K*g is -2, dev {dev_conf:.1e} < 1e-4",
         dev_conf < 1e-4),
    ])


def leaf_pipeline(h, span=None):
    # conformal factor varies along the geodesic coordinate only, so the
    # source metric samples exactly and cross-geodesic differences stay
    # at machine precision
    if span is None:
        npx = npy = 13
        span = 12 * h
    else:
        npx = npy = int(round(span / h)) + 1
    nsx = int(round((0.75 * span + 0.2) / h)) + 1
    nsy = int(round((span + 0.24) / h)) + 1
    sx = Axis("x", 1.0, h, nsx)
    sy = Axis("y", 0.0, h, nsy)
    ell = np.broadcast_to(1.0 / (2.0 * sx.nodes[:, None] ** 2),
                          (nsx, nsy)).copy()
    spec = lp.leaf_spec(sx, sy, h="-x", ell=ell,
                        curvature_tol=max(1e-2, 50 * h * h))
    g2s, _ = lp.leaf_metric(spec)
    cp = lp.geodesic_parallel_profile(g2s, Axis("x", 0.0, h, npx),
                                      Axis("y", 0.12, h, npy))
    flds = lp.reduced_fields(cp)
    sol = lp.integrate_vecsys(lp.vecsys_coefficients(flds), cp)
    g4, w4 = lp.assemble_four_metric(sol, cp)
    return sol, g4, w4


def test_criterion_10_local_construction():
    hs = [2e-2, 1e-2, 5e-3]
    compat, dets = [], []
    for h in hs:
        sol, _, _ = leaf_pipeline(h, span=0.48)
        compat.append(sol.compat_residual)
        dets.append(sol.det_drift)
    fit = convergence_order(hs, compat)

    sol, g4, w4 = leaf_pipeline(1e-3)
    gg = g4.components
    uv_ok = bool(np.all(gg == gg[:, :, :1, :1]))
    eres = einstein_residual(g4, 0.0)
    dw = exterior_derivative_closedness(w4)
    verdict(10, "local ricci-flat construction", [
        (f"det drift max {max(dets):.1e} < 1e-8 across sweep",
         max(dets) < 1e-8),
        (f"compat residual order {fit.order:.3f} in [1.8, 2.2]",
         1.8 <= fit.order <= 2.2),
        (f"einstein residual {eres:.1e} < 5e-3 at h=1e-3", eres < 5e-3),
        (f"pinned det drift {sol.det_drift:.1e} < 1e-8",
         sol.det_drift < 1e-8),
        (f"d(omega) = {dw:.1e} < 1e-10", dw < 1e-10),
        ("metric independent of u, v exactly", uv_ok),
    ])


def test_criterion_11_frame_algebra_identities():
    rng = np.random.default_rng(11)
    n = 10000

    worst_rt = 0.0
    vals = rng.uniform(-2.0, 2.0, size=(n, 4))
    radii = rng.uniform(0.0, 2.5, size=n)
    phases = rng.uniform(-math.pi, math.pi, size=n)
    for (p, q, l, nn), r, s in zip(vals, radii, phases):
        st = PQRSState(P=p, Q=q, R=r, S=s if r > 0 else None, L=l, N=nn)
        back = to_pqrs(from_pqrs(st))
        worst_rt = max(worst_rt, abs(back.P - st.P), abs(back.Q - st.Q),
                       abs(back.R - st.R))
        if st.R > 0:
            worst_rt = max(worst_rt,
                           abs(math.sin(back.S) - math.sin(st.S)),
                           abs(math.cos(back.S) - math.cos(st.S)))

    param_pool = [BianchiParams(1.0, 0.0, 1.0, lam=-1.0),
                  BianchiParams(0.0, 0.0, 1.0, lam=-1.0),
                  BianchiParams(1.0, 1.0, 1.0, lam=-1.0),
                  BianchiParams(1.0, 1.0, 0.0, lam=0.0, alpha0=0.5)]
    abc = rng.uniform(0.2, 2.0, size=(n, 3))
    worst_id = 0.0
    for i, (a, b, c) in enumerate(abc):
        params = param_pool[i % len(param_pool)]
        fc = bianchi_frame_coefficients(params, ABCState(0.0, a, b, c))
        worst_id = max(worst_id,
                       max(abs(r) for r in kahler_relation_residuals(fc)),
                       max(abs(r) for r in integrability_residuals(fc)))
        st = to_pqrs(fc)
        expected_R = abs(params.p1 * a ** 2 - params.p2 * b ** 2) / (a * b * c)
        worst_id = max(worst_id, abs(st.Q),
                       abs(st.R - expected_R) / max(1.0, expected_R))
        if st.R > 0:
            # the shear vector may point either way along the pi/4 axis
            s_dev = abs(((st.S - math.pi / 4.0 + math.pi / 2.0) % math.pi)
                        - math.pi / 2.0)
            worst_id = max(worst_id, s_dev)

    drift = 0.0
    for start in [
        PQRSState(P=0.4, Q=0.3, R=0.8, S=0.2, L=0.5, N=-0.6),
        PQRSState(P=-0.2, Q=0.1, R=0.5, S=1.0, L=-0.3, N=0.4),
        PQRSState(P=0.0, Q=0.0, R=1.2, S=-0.5, L=0.2, N=0.3),
        PQRSState(P=0.3, Q=-0.4, R=0.6, S=2.0, L=0.0, N=-0.2),
    ]:
        lam0 = lambda_constraint(start)

        def rhs(t, y, q=start.Q):
            return sys_rhs(PQRSState(P=y[3], Q=q, R=y[2], S=y[4],
                                     L=y[1], N=y[0]))

        sol = solve_ivp(rhs, (0.0, 1.0),
                        [start.N, start.L, start.R, start.P, start.S],
                        rtol=1e-11, atol=1e-13)
        assert sol.success
        for col in sol.y.T:
            cur = PQRSState(P=col[3], Q=start.Q, R=col[2], S=col[4],
                            L=col[1], N=col[0])
            drift = max(drift, abs(lambda_constraint(cur) - lam0))

    verdict(11, "frame algebra identities", [
        (f"round trip worst {worst_rt:.1e} < 1e-12 over 10^4 states",
         worst_rt < 1e-12),
        (f"diagonal coefficient identities worst {worst_id:.1e} < 1e-12",
         worst_id < 1e-12),
        (f"lambda constant along flows, drift {drift:.1e} < 1e-8",
         drift < 1e-8),
    ])
