"""The Euclidean-group flow: unstable curve, completeness evidence, bolt.

Specialization p = (1, 0, 1), lam = -1 of the diagonal flow. The equilibrium
(q, 0, q) has a one-dimensional unstable manifold along (0, 1, 0); shooting
from (q, eps, q) tracks it. Diagnostics check the trapping region
0 <= c^2 - a^2 <= 2 a^2 b^2, monotone products, the nullcline bound
a/c >= 1/sqrt(1+b^2), and the two distance statements: finite arclength back
toward the equilibrium and logarithmic-in-b growth forward. Arclength from
the t -> -infinity end uses the asymptotics a ~ q, b ~ k e^{q^2 t}, c ~ q,
whose tail integral of a b c is a b c / q^2 at the cutoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .bianchi import BianchiParams
from .errors import DomainError
from .grids import Axis, MetricGrid, TwoFormGrid
from .odes import Trajectory, integrate_flow

E2_PARAMS = BianchiParams(p1=1.0, p2=0.0, p3=1.0, lam=-1.0)

EQUILIBRIUM_SADDLE = "q0q"
EQUILIBRIUM_DEGENERATE = "0q0"


def e2_rhs(a: float, b: float, c: float) -> tuple[float, float, float]:
    """Flow derivatives; defined for all real (a, b, c), equilibria included."""
    a2, c2 = a * a, c * c
    return (0.5 * a * (c2 - a2),
            0.5 * b * (a2 + c2),
            0.5 * c * (a2 - c2 + 2.0 * a2 * b * b))


def e2_jacobian(a: float, b: float, c: float) -> np.ndarray:
    a2, b2, c2 = a * a, b * b, c * c
    return np.array([
        [0.5 * (c2 - 3.0 * a2), 0.0, a * c],
        [a * b, 0.5 * (a2 + c2), b * c],
        [a * c * (1.0 + 2.0 * b2), 2.0 * a2 * b * c,
         0.5 * (a2 - 3.0 * c2 + 2.0 * a2 * b2)],
    ])


@dataclass(frozen=True)
class Linearization:
    """Jacobian spectrum at an equilibrium; eigenvalues sorted descending."""

    point: tuple[float, float, float]
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, matching eigenvalues

    @property
    def unstable_direction(self) -> np.ndarray:
        if self.eigenvalues[0] <= 0.0:
            raise DomainError("no positive eigenvalue at this equilibrium")
        v = self.eigenvectors[:, 0]
        return v / np.linalg.norm(v)


def linearization(q: float, which: str = EQUILIBRIUM_SADDLE) -> Linearization:
    """Linearize at (q, 0, q) (saddle) or (0, q, 0) (fully degenerate)."""
    if q <= 0.0:
        raise DomainError("q must be positive")
    if which == EQUILIBRIUM_SADDLE:
        point = (q, 0.0, q)
    elif which == EQUILIBRIUM_DEGENERATE:
        point = (0.0, q, 0.0)
    else:
        raise DomainError(f"unknown equilibrium {which!r}")
    mat = e2_jacobian(*point)
    vals, vecs = np.linalg.eig(mat)
    order = np.argsort(vals.real)[::-1]
    vals = vals.real[order]
    vecs = vecs.real[:, order]
    return Linearization(point=point, matrix=mat, eigenvalues=vals,
                         eigenvectors=vecs)


def classify_start(a: float, b: float, c: float) -> str:
    """Which trapping-region alternative a start point falls in.

    'trapped' points stay in 0 <= c^2-a^2 <= 2a^2b^2; below it a blows up in
    finite time, above it c does.
    """
    gap = c * c - a * a
    if gap < 0.0:
        return "a-blowup"
    if gap > 2.0 * a * a * b * b:
        return "c-blowup"
    return "trapped"


def shoot_unstable(q: float, eps: float | None = None,
                   b_max: float | None = 100.0, t_max: float = 500.0,
                   tol: float = 1e-12,
                   start: tuple[float, float, float] | None = None) -> Trajectory:
    """Integrate from (q, eps, q) (or a custom start) until b reaches b_max.

    The time origin is t = 0 at the start, which pins the asymptotic
    constant k = eps in b ~ k e^{q^2 t}. Blow-up against t_max without
    reaching b_max is flagged on the trajectory.

    A fourth column r carries arclength along the transverse direction,
    r' = a b c, integrated with the same step control as the flow. On the
    unstable curve it is seeded with the tail value a b c / q^2 at the
    start, so r measures distance from the t -> -infinity end and r = 0
    there; for a custom start the seed is 0 (meta key r_origin says which).
    """
    if q <= 0.0:
        raise DomainError("q must be positive")
    if eps is None:
        eps = 1e-5 * q
    if eps <= 0.0:
        raise DomainError("eps must be positive")
    if start is None:
        abc0 = (q, eps, q)
        r0 = q * eps * q / (q * q)
        r_origin = "tail"
    else:
        abc0 = tuple(float(v) for v in start)
        if min(abc0) <= 0.0:
            raise DomainError("custom start must have positive components")
        r0 = 0.0
        r_origin = "start"

    events = []
    if b_max is not None:
        def hit_b(t, y, _b=b_max):
            return y[1] - _b
        hit_b.terminal = True
        hit_b.direction = 1.0
        hit_b.name = "b_max"
        events.append(hit_b)

    def rhs(t, y):
        da, db, dc = e2_rhs(y[0], y[1], y[2])
        return (da, db, dc, y[0] * y[1] * y[2])

    return integrate_flow(rhs, 0.0, abc0 + (r0,), t_max,
                          columns=("a", "b", "c", "r"),
                          rtol=tol, atol=tol * 1e-2, events=events,
                          positive_components=(0, 1, 2),
                          meta={"q": q, "eps": eps, "k": eps,
                               "start": list(abc0), "b_max": b_max,
                               "r_origin": r_origin})


# ---------------------------------------------------------------------------
# Arclength bookkeeping. The r column of shoot_unstable integrates
# r' = a b c alongside the flow, measured from the t -> -infinity end, so
# r = 0 at the bolt end and r(0) = eps exactly on the unstable curve (a c
# = q^2 at the start and the tail integral collapses to a b c / q^2).

def _arclength(traj: Trajectory):
    """Dense r(t) of a shoot_unstable trajectory; returns (r_of_t, r0)."""
    if "r" not in traj.columns:
        raise DomainError("trajectory has no arclength column; reshoot")
    if traj.interpolant is None:
        raise DomainError("arclength needs dense output (CSV round trip?)")
    idx = traj.columns.index("r")

    def r_of_t(t):
        return float(traj.sample(t)[idx])

    return r_of_t, float(traj.states[0, idx])


def _t_at_b(traj: Trajectory, b_target: float) -> float:
    """Time of the first crossing of b = b_target (b is monotone here)."""
    b = traj.column("b")
    if not (b[0] <= b_target <= b[-1]):
        raise DomainError(f"b = {b_target} outside the trajectory range")

    def f(t):
        return float(traj.sample(t)[1]) - b_target

    return brentq(f, traj.t[0], traj.t[-1])


def _tail_gap(traj: Trajectory, tol: float = 1e-12) -> float:
    """Cauchy gap between two arclength tail estimates (cutoff b0 vs b0/10)."""
    q = traj.meta["q"]
    a0, b0, c0 = traj.states[0, :3]
    est1 = a0 * b0 * c0 / (q * q)

    def rhs(t, y):
        da, db, dc = e2_rhs(y[0], y[1], y[2])
        return (da, db, dc, y[0] * y[1] * y[2])

    def cut(t, y, _b=b0 / 10.0):
        return y[1] - _b
    cut.terminal = True
    cut.direction = -1.0

    sol = solve_ivp(rhs, (traj.t[0], traj.t[0] - 200.0), (a0, b0, c0, 0.0),
                    method="RK45", rtol=tol, atol=1e-20, events=[cut],
                    dense_output=False)
    if not sol.t_events[0].size:
        raise DomainError("backward leg did not reach the b0/10 cutoff")
    ac, bc_, cc, rneg = sol.y[:, -1]
    est2 = ac * bc_ * cc / (q * q) + (-rneg)
    return abs(est1 - est2)


@dataclass
class E2Diagnostics:
    """Trapping-region, monotonicity and distance evidence for one shoot."""

    monotone_ok: dict
    region_ok: bool
    nullcline_ok: bool
    kp_fit: float | None
    dist_to_minus_inf: float
    dist_tail_gap: float
    dist_growth_slope: float
    k2_decades: tuple[float, float] | None
    region_min_lower: float
    region_min_upper: float
    nullcline_min_slack: float
    ac_ratio_max: float
    inconclusive: bool
    notes: str = ""

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["k2_decades"] = list(self.k2_decades) if self.k2_decades else None
        return d


def diagnose(traj: Trajectory, region_slack: float = 1e-10,
             monotone_slack: float = 1e-10, nullcline_slack: float = 1e-8,
             transient_drop: float = 1e-6) -> E2Diagnostics:
    """Evaluate the invariant-region, monotonicity and distance diagnostics."""
    a, b, c = traj.column("a"), traj.column("b"), traj.column("c")
    lower = c * c - a * a
    upper = 2.0 * a * a * b * b - lower
    region_ok = bool(lower.min() >= -region_slack and upper.min() >= -region_slack)

    monotone_ok = {}
    for name, v in (("ab", a * b), ("bc", b * c), ("ac", a * c), ("b", b)):
        rel = np.diff(v) / np.maximum(np.abs(v[:-1]), np.finfo(float).tiny)
        monotone_ok[name] = bool(rel.min() >= -monotone_slack)

    ratio = a / c
    bound = 1.0 / np.sqrt(1.0 + b * b)
    nullcline_min_slack = float((ratio - bound).min())
    nullcline_ok = bool(nullcline_min_slack >= -nullcline_slack
                        and ratio.max() <= 1.0)

    kp_fit = None
    drop = np.nonzero(ratio < 1.0 - transient_drop)[0]
    if drop.size:
        b_p = b[drop[0]]
        sel = b >= b_p
        for k in np.arange(2.0, 20.5, 0.5):
            if np.all(ratio[sel] <= np.sqrt(k * k / (k * k + b[sel] ** 2))):
                kp_fit = float(k)
                break

    inconclusive = False
    notes = []
    dist = math.nan
    tail_gap = math.nan
    slope = math.nan
    decades = None
    if "q" not in traj.meta:
        inconclusive = True
        notes.append("no shooting metadata; distance diagnostics skipped")
    else:
        q = traj.meta["q"]
        start_gap = abs(a[0] - q) + abs(c[0] - q)
        if start_gap > 1e-6 * q:
            inconclusive = True
            notes.append("start not on the unstable curve; tail estimate invalid")
            dist = math.nan
        else:
            dist = a[0] * b[0] * c[0] / (q * q)
            tail_gap = _tail_gap(traj)
        r_of_t, r0 = _arclength(traj)
        b_end = b[-1]
        if b_end < 100.0 * b[0]:
            inconclusive = True
            notes.append("trajectory spans fewer than two b-decades")
        else:
            r_end = r_of_t(traj.t[-1])
            r_mid = r_of_t(_t_at_b(traj, b_end / 10.0))
            slope = (r_end - r_mid) / math.log(10.0)
            if b_end >= 1000.0 * b[0]:
                r_low = r_of_t(_t_at_b(traj, b_end / 100.0))
                decades = ((r_mid - r_low) / math.log(10.0), slope)

    return E2Diagnostics(
        monotone_ok=monotone_ok, region_ok=region_ok, nullcline_ok=nullcline_ok,
        kp_fit=kp_fit, dist_to_minus_inf=dist, dist_tail_gap=tail_gap,
        dist_growth_slope=slope, k2_decades=decades,
        region_min_lower=float(lower.min()), region_min_upper=float(upper.min()),
        nullcline_min_slack=nullcline_min_slack, ac_ratio_max=float(ratio.max()),
        inconclusive=inconclusive, notes="; ".join(notes))


def distance_between_b_slices(traj: Trajectory, b_lo: float, b_hi: float) -> float:
    """Arclength between the first crossings of b = b_lo and b = b_hi."""
    r_of_t, _ = _arclength(traj)
    return r_of_t(_t_at_b(traj, b_hi)) - r_of_t(_t_at_b(traj, b_lo))


@dataclass
class BoltProfile:
    """Arclength-parametrized samples (r, a, b, c) with r = 0 at the bolt."""

    r: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    meta: dict = field(default_factory=dict)
    interpolant: object = None  # callable r -> (a, b, c), in-memory only

    def to_csv(self) -> str:
        lines = [f"# meta {k}: {self.meta[k]!r}" for k in sorted(self.meta)]
        lines.append("r,a,b,c")
        for row in zip(self.r, self.a, self.b, self.c):
            lines.append(",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "BoltProfile":
        import ast
        meta, rows = {}, []
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("meta ") and ":" in body:
                    key, _, val = body[5:].partition(":")
                    try:
                        meta[key.strip()] = ast.literal_eval(val.strip())
                    except (ValueError, SyntaxError):
                        meta[key.strip()] = val.strip()
                continue
            if line.startswith("r,"):
                continue
            rows.append([float(p) for p in line.split(",")])
        data = np.asarray(rows)
        return cls(r=data[:, 0], a=data[:, 1], b=data[:, 2], c=data[:, 3],
                   meta=meta)

    def sample(self, r):
        r = np.asarray(r, dtype=np.float64)
        if np.any(r < self.r[0]) or np.any(r > self.r[-1]):
            raise DomainError("sample radius outside the profile range")
        if self.interpolant is not None:
            return self.interpolant(r)
        from scipy.interpolate import CubicSpline
        values = np.column_stack([self.a, self.b, self.c])
        return CubicSpline(self.r, values)(r).T


def bolt_profile(traj: Trajectory, r_max: float = 0.4, n: int = 200) -> BoltProfile:
    """Reparametrize a shoot by arclength r measured from the bolt.

    Samples are log-spaced in r between the start value (= eps on the
    unstable curve) and r_max.
    """
    r_of_t, r0 = _arclength(traj)
    r_span_end = r_of_t(traj.t[-1])
    if r_max >= r_span_end:
        raise DomainError(
            f"r_max {r_max} beyond the trajectory arclength {r_span_end}")

    def t_at_r(rt):
        return brentq(lambda tt: r_of_t(tt) - rt, traj.t[0], traj.t[-1])

    targets = np.geomspace(r0, r_max, n)
    samples = np.array([traj.sample(t_at_r(rt))[:3] for rt in targets])

    def interpolant(rq):
        rq = np.asarray(rq, dtype=np.float64)
        flat = np.atleast_1d(rq)
        out = np.array([traj.sample(t_at_r(float(rv)))[:3] for rv in flat]).T
        return out.reshape((3,) + rq.shape)

    meta = dict(traj.meta)
    meta["r_origin"] = "arclength from the t -> -infinity end"
    return BoltProfile(r=targets, a=samples[:, 0], b=samples[:, 1],
                       c=samples[:, 2], meta=meta, interpolant=interpolant)


@dataclass(frozen=True)
class BoltSmoothness:
    """Richardson-extrapolated r -> 0 behavior at the bolt."""

    db_dr_limit: float
    db_dr_error: float
    a2c2_limit: float
    a2c2_refinement_change: float
    crab_limit: float
    crab_refinement_change: float
    r0: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def bolt_smoothness(profile: BoltProfile, r0: float | None = None) -> BoltSmoothness:
    """Extrapolate db/dr, (a^2-c^2)/r^2 and (c r - a b)/r^3 to r = 0.

    Each quantity has an even expansion in r, so the two-level Richardson
    value (4 f(r/2) - f(r)) / 3 removes the r^2 term; the refinement change
    compares the ladders anchored at r0 and r0/2.
    """
    if r0 is None:
        r0 = profile.r[-1] / 2.0
    if r0 / 4.0 < profile.r[0]:
        raise DomainError("r0/4 below the smallest profile radius")

    def at(rv):
        a, b, c = profile.sample(rv)
        return float(a), float(b), float(c)

    def f_db(rv):
        a, b, c = at(rv)
        return b / rv

    def f_a2c2(rv):
        a, b, c = at(rv)
        return (a * a - c * c) / rv ** 2

    def f_crab(rv):
        a, b, c = at(rv)
        return (c * rv - a * b) / rv ** 3

    def ladder(f):
        l1 = (4.0 * f(r0 / 2.0) - f(r0)) / 3.0
        l2 = (4.0 * f(r0 / 4.0) - f(r0 / 2.0)) / 3.0
        change = abs(l2 - l1) / max(abs(l2), np.finfo(float).tiny)
        return l2, change

    db_limit, _ = ladder(f_db)
    a2c2_limit, a2c2_change = ladder(f_a2c2)
    crab_limit, crab_change = ladder(f_crab)
    return BoltSmoothness(db_dr_limit=db_limit,
                          db_dr_error=abs(db_limit - 1.0),
                          a2c2_limit=a2c2_limit,
                          a2c2_refinement_change=a2c2_change,
                          crab_limit=crab_limit,
                          crab_refinement_change=crab_change,
                          r0=r0)


def scaling_map(traj: Trajectory, k: float) -> Trajectory:
    """The symmetry (a, b, c)(t) -> (k a(k^2 t), b(k^2 t), k c(k^2 t))."""
    if k <= 0.0:
        raise DomainError("scaling factor must be positive")
    k2 = k * k
    states = traj.states.copy()
    states[:, 0] *= k
    states[:, 2] *= k
    meta = dict(traj.meta)
    if "q" in meta:
        meta["q"] = meta["q"] * k
    base = traj.interpolant

    interpolant = None
    if base is not None:
        def interpolant(tq, _b=base, _k=k, _k2=k2):
            y = np.asarray(_b(np.asarray(tq) * _k2))
            y = y.copy()
            y[0] *= _k
            y[2] *= _k
            return y

    return Trajectory(t=traj.t / k2, states=states, columns=traj.columns,
                      rtol=traj.rtol, atol=traj.atol, blow_up=traj.blow_up,
                      stop_reason=traj.stop_reason, n_steps=traj.n_steps,
                      n_rhs_evals=traj.n_rhs_evals, meta=meta,
                      interpolant=interpolant)


def e2_metric_grid(traj: Trajectory, t_axis: Axis, theta_axis: Axis,
                   x_axis: Axis | None = None, y_axis: Axis | None = None,
                   manifest: dict | None = None) -> MetricGrid:
    """Sample the 4-metric (t, x, y, theta) along the trajectory.

    In the coframe adapted to the Euclidean group, the components depend on
    (t, theta) only; x and y enter as flat directions, so their axes default
    to small spans matching the t spacing.
    """
    if x_axis is None:
        x_axis = Axis("x", 0.0, t_axis.step, 5)
    if y_axis is None:
        y_axis = Axis("y", 0.0, t_axis.step, 5)
    abc = traj.sample(t_axis.nodes)[:3]
    a = abc[0][:, None, None, None]
    b = abc[1][:, None, None, None]
    c = abc[2][:, None, None, None]
    theta = theta_axis.nodes[None, None, None, :]
    sin, cos = np.sin(theta), np.cos(theta)
    shape = (t_axis.count, x_axis.count, y_axis.count, theta_axis.count)
    g = np.zeros(shape + (4, 4))
    g[..., 0, 0] = np.broadcast_to((a * b * c) ** 2, shape)
    g[..., 1, 1] = np.broadcast_to(a ** 2 * cos ** 2 + c ** 2 * sin ** 2, shape)
    g[..., 2, 2] = np.broadcast_to(a ** 2 * sin ** 2 + c ** 2 * cos ** 2, shape)
    gxy = np.broadcast_to((a ** 2 - c ** 2) * sin * cos, shape)
    g[..., 1, 2] = gxy
    g[..., 2, 1] = gxy
    g[..., 3, 3] = np.broadcast_to(b ** 2, shape)
    return MetricGrid((t_axis, x_axis, y_axis, theta_axis), g,
                      manifest=manifest)


def e2_kahler_form_grid(traj: Trajectory, t_axis: Axis, theta_axis: Axis,
                        x_axis: Axis | None = None,
                        y_axis: Axis | None = None) -> TwoFormGrid:
    """The parallel 2-form in the same (t, x, y, theta) coordinates."""
    if x_axis is None:
        x_axis = Axis("x", 0.0, t_axis.step, 5)
    if y_axis is None:
        y_axis = Axis("y", 0.0, t_axis.step, 5)
    abc = traj.sample(t_axis.nodes)[:3]
    a = abc[0][:, None, None, None]
    b = abc[1][:, None, None, None]
    c = abc[2][:, None, None, None]
    theta = theta_axis.nodes[None, None, None, :]
    sin, cos = np.sin(theta), np.cos(theta)
    shape = (t_axis.count, x_axis.count, y_axis.count, theta_axis.count)
    w = np.zeros(shape + (4, 4))

    def put(i, j, val):
        w[..., i, j] = np.broadcast_to(val, shape)
        w[..., j, i] = np.broadcast_to(-val, shape)

    abc2 = a * b * c * c
    put(0, 1, -abc2 * sin)
    put(0, 2, abc2 * cos)
    put(1, 3, a * b * cos)
    put(2, 3, a * b * sin)
    return TwoFormGrid((t_axis, x_axis, y_axis, theta_axis), w)
