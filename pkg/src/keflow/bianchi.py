"""Diagonal cohomogeneity-one flows for unimodular 3-group orbits.

The metric g = (abc)^2 dt^2 + a^2 s1^2 + b^2 s2^2 + c^2 s3^2 evolves by a
first-order flow in (a, b, c) driven by the structure constants (p1, p2, p3)
and a coefficient alpha. The Einstein condition fixes alpha = -(lam/p3)(ab)^2
when p3 != 0; when p3 = 0 it forces lam = 0 and leaves alpha a free constant,
and the flow admits the four explicit one-parameter families implemented in
closed_form (named by their orbit group: poincare, torus, heisenberg,
euclidean). In all p3 = 0 families w3 = a*b is a first integral.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .frame_algebra import FrameCoefficients
from .grids import Axis, MetricGrid
from .odes import Trajectory, integrate_flow

SQRT2 = math.sqrt(2.0)

CLOSED_FORM_CASES = ("poincare", "torus", "heisenberg", "euclidean")

_CASE_STRUCTURE = {
    "poincare": (1.0, -1.0),
    "torus": (0.0, 0.0),
    "heisenberg": (1.0, 0.0),
    "euclidean": (1.0, 1.0),
}


@dataclass(frozen=True)
class BianchiParams:
    """Structure constants, Einstein constant and (if free) alpha."""

    p1: float
    p2: float
    p3: float
    lam: float = 0.0
    alpha0: float | None = None

    def __post_init__(self) -> None:
        if self.p3 == 0.0:
            if self.lam != 0.0:
                raise DomainError(
                    "p3 = 0 forces lam = 0 (the Einstein closure has no other option)")
            if self.alpha0 is None:
                raise DomainError("p3 = 0 leaves alpha free; alpha0 is required")
        else:
            if self.alpha0 is not None:
                raise DomainError(
                    "p3 != 0 determines alpha = -(lam/p3)(ab)^2; alpha0 must be None")

    def alpha(self, a: float, b: float) -> float:
        if self.p3 == 0.0:
            return float(self.alpha0)
        return -(self.lam / self.p3) * (a * b) ** 2


@dataclass(frozen=True)
class ABCState:
    """A point of the (a, b, c) flow; components are strictly positive."""

    t: float
    a: float
    b: float
    c: float

    def __post_init__(self) -> None:
        vals = (self.t, self.a, self.b, self.c)
        if not all(math.isfinite(v) for v in vals):
            raise DomainError("non-finite state component")
        if min(self.a, self.b, self.c) <= 0.0:
            raise DomainError(
                f"a, b, c must be positive; got ({self.a}, {self.b}, {self.c})")


@dataclass(frozen=True)
class ClosedFormConstants:
    """Free constants of the explicit p3 = 0 families."""

    k: float = 1.0
    w3: float = 1.0
    alpha: float = 0.0
    t0: float = 0.0
    a0: float = 1.0
    b0: float = 1.0
    c0: float = 1.0


def abc_rhs(params: BianchiParams, s: ABCState) -> tuple[float, float, float]:
    """Flow derivatives (a', b', c')."""
    a2, b2, c2 = s.a * s.a, s.b * s.b, s.c * s.c
    alpha = params.alpha(s.a, s.b)
    da = 0.5 * s.a * (-params.p1 * a2 + params.p2 * b2 + params.p3 * c2)
    db = 0.5 * s.b * (params.p1 * a2 - params.p2 * b2 + params.p3 * c2)
    dc = 0.5 * s.c * (params.p1 * a2 + params.p2 * b2 - params.p3 * c2 + 2.0 * alpha)
    return (da, db, dc)


def closed_form_params(case: str, consts: ClosedFormConstants) -> BianchiParams:
    if case not in _CASE_STRUCTURE:
        raise DomainError(f"unknown closed-form case {case!r}; "
                          f"expected one of {CLOSED_FORM_CASES}")
    p1, p2 = _CASE_STRUCTURE[case]
    return BianchiParams(p1=p1, p2=p2, p3=0.0, lam=0.0, alpha0=consts.alpha)


def closed_form(case: str, consts: ClosedFormConstants, t: float) -> ABCState:
    """Evaluate the explicit family `case` at time t.

    Domains: poincare needs w3 (t - t0) in (0, pi/2); heisenberg and euclidean
    need t > t0; torus is entire. Evaluation at or beyond an endpoint raises
    DomainError naming the endpoint.
    """
    if case not in _CASE_STRUCTURE:
        raise DomainError(f"unknown closed-form case {case!r}; "
                          f"expected one of {CLOSED_FORM_CASES}")
    dt = t - consts.t0
    k, w3, alpha = consts.k, consts.w3, consts.alpha
    if case == "torus":
        return ABCState(t=t, a=consts.a0, b=consts.b0,
                        c=consts.c0 * math.exp(alpha * dt))
    if w3 <= 0.0 or k <= 0.0:
        raise DomainError("closed forms need k > 0 and w3 > 0")
    if case == "poincare":
        u = w3 * dt
        if u <= 0.0 or u >= 0.5 * math.pi:
            raise DomainError(
                f"poincare domain is w3 (t - t0) in (0, pi/2); got {u}")
        return ABCState(t=t,
                        a=math.sqrt(w3 / math.tan(u)),
                        b=math.sqrt(w3 * math.tan(u)),
                        c=k * math.exp(alpha * dt)
                        * math.sqrt(math.sin(2.0 * u) / (2.0 * w3)))
    if dt <= 0.0:
        raise DomainError(f"{case} domain is t > t0; got t - t0 = {dt}")
    if case == "heisenberg":
        return ABCState(t=t,
                        a=1.0 / math.sqrt(dt),
                        b=w3 * math.sqrt(dt),
                        c=k * math.exp(alpha * dt) * math.sqrt(dt))
    # euclidean
    u = w3 * dt
    return ABCState(t=t,
                    a=math.sqrt(w3 / math.tanh(u)),
                    b=math.sqrt(w3 * math.tanh(u)),
                    c=k * math.exp(alpha * dt)
                    * math.sqrt(math.sinh(2.0 * u) / (2.0 * w3)))


def closed_form_derivative(case: str, consts: ClosedFormConstants,
                           t: float) -> tuple[float, float, float]:
    """Analytic (a', b', c') of the explicit family `case` at time t.

    Differentiates the displayed formulas directly, so comparing against
    abc_rhs at closed_form(t) tests the solution property without any
    finite differencing.
    """
    s = closed_form(case, consts, t)  # validates case and domain
    dt = t - consts.t0
    k, w3, alpha = consts.k, consts.w3, consts.alpha
    if case == "torus":
        return (0.0, 0.0, alpha * s.c)
    if case == "poincare":
        u = w3 * dt
        da = -w3 * w3 / (2.0 * s.a * math.sin(u) ** 2)
        db = w3 * w3 / (2.0 * s.b * math.cos(u) ** 2)
        dc = s.c * (alpha + w3 * math.cos(2.0 * u) / math.sin(2.0 * u))
        return (da, db, dc)
    if case == "heisenberg":
        return (-s.a / (2.0 * dt), s.b / (2.0 * dt),
                s.c * (alpha + 0.5 / dt))
    u = w3 * dt
    da = -w3 * w3 / (2.0 * s.a * math.sinh(u) ** 2)
    db = w3 * w3 / (2.0 * s.b * math.cosh(u) ** 2)
    dc = s.c * (alpha + w3 * math.cosh(2.0 * u) / math.sinh(2.0 * u))
    return (da, db, dc)


def metric_components(params: BianchiParams, s: ABCState) -> tuple[float, float, float, float]:
    """Diagonal metric coefficients ((abc)^2, a^2, b^2, c^2)."""
    abc = s.a * s.b * s.c
    return (abc * abc, s.a * s.a, s.b * s.b, s.c * s.c)


def kahler_form_components(s: ABCState) -> tuple[float, float]:
    """Coefficients (a b c^2, a b) of the closed 2-form along the flow."""
    return (s.a * s.b * s.c * s.c, s.a * s.b)


def torus_metric_grid(consts: ClosedFormConstants, t_axis: Axis,
                      x_axis: Axis | None = None, y_axis: Axis | None = None,
                      z_axis: Axis | None = None,
                      manifest: dict | None = None) -> MetricGrid:
    """Coordinate 4-metric of the torus family on a (t, x, y, z) grid.

    The torus case has abelian structure constants, so the invariant coframe
    is dx, dy, dz and the coordinate metric is the diagonal one. With
    alpha = a0 b0 the metric is flat; that is what curvature checks probe.
    """
    if x_axis is None:
        x_axis = Axis("x", 0.0, t_axis.step, 5)
    if y_axis is None:
        y_axis = Axis("y", 0.0, t_axis.step, 5)
    if z_axis is None:
        z_axis = Axis("z", 0.0, t_axis.step, 5)
    c = np.array([closed_form("torus", consts, t).c for t in t_axis.nodes])
    c = c[:, None, None, None]
    shape = (t_axis.count, x_axis.count, y_axis.count, z_axis.count)
    g = np.zeros(shape + (4, 4))
    g[..., 0, 0] = np.broadcast_to((consts.a0 * consts.b0 * c) ** 2, shape)
    g[..., 1, 1] = consts.a0 ** 2
    g[..., 2, 2] = consts.b0 ** 2
    g[..., 3, 3] = np.broadcast_to(c ** 2, shape)
    return MetricGrid((t_axis, x_axis, y_axis, z_axis), g, manifest=manifest)


def heisenberg_invariants(s: ABCState) -> tuple[float, float]:
    """First integrals of the p = (0,0,1), lam = -1 flow.

    Both a/b and a b (c^2 - (2/3) a^2 b^2) are conserved.
    """
    ab = s.a * s.b
    return (s.a / s.b, ab * (s.c * s.c - (2.0 / 3.0) * ab * ab))


def bianchi_frame_coefficients(params: BianchiParams, s: ABCState) -> FrameCoefficients:
    """Frame bracket coefficients of the diagonal flow at state s.

    Denominators carry a, b, c; ABCState enforces positivity, so degenerate
    states (a bolt, say) must be handled before calling.
    """
    da, db, dc = abc_rhs(params, s)
    a, b, c = s.a, s.b, s.c
    a_coef = -da / (SQRT2 * a * a * b * c)
    d_coef = -db / (SQRT2 * a * b * b * c)
    l_coef = -dc / (SQRT2 * a * b * c * c)
    return FrameCoefficients(
        A=a_coef,
        B=-b * params.p2 / (SQRT2 * a * c),
        C=a * params.p1 / (SQRT2 * b * c),
        D=d_coef,
        E=-a_coef,
        F=-b * params.p2 / (SQRT2 * a * c),
        G=a * params.p1 / (SQRT2 * b * c),
        H=-d_coef,
        L=l_coef,
        N=-c * params.p3 / (SQRT2 * a * b),
    )


def integrate(params: BianchiParams, s0: ABCState, t_end: float,
              tol: float = 1e-10) -> Trajectory:
    """Adaptively integrate the flow from s0 to t_end (blow-up flagged)."""

    def rhs(t, y):
        a, b, c = y
        a2, b2, c2 = a * a, b * b, c * c
        if params.p3 == 0.0:
            alpha = params.alpha0
        else:
            alpha = -(params.lam / params.p3) * (a * b) ** 2
        return (0.5 * a * (-params.p1 * a2 + params.p2 * b2 + params.p3 * c2),
                0.5 * b * (params.p1 * a2 - params.p2 * b2 + params.p3 * c2),
                0.5 * c * (params.p1 * a2 + params.p2 * b2 - params.p3 * c2
                           + 2.0 * alpha))

    return integrate_flow(rhs, s0.t, (s0.a, s0.b, s0.c), t_end,
                          columns=("a", "b", "c"), rtol=tol, atol=tol * 1e-3,
                          positive_components=(0, 1, 2),
                          meta={"p1": params.p1, "p2": params.p2,
                                "p3": params.p3, "lam": params.lam,
                                "alpha0": params.alpha0})


def trajectory_states(traj: Trajectory) -> list[ABCState]:
    return [ABCState(t=float(ti), a=float(a), b=float(b), c=float(c))
            for ti, (a, b, c) in zip(traj.t, traj.states)]
