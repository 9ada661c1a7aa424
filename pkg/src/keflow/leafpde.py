"""Leaf-like 2-metrics and the local Ricci-flat 4-metric construction.

A leaf-like metric is conformal to a flat patch, g = l^{-1/2} e^{-h} g0 with
l the conformal factor of a curvature -2 hyperbolic metric and h harmonic.
Its Gauss curvature is K = e^h l^{3/2} > 0 and it satisfies the leaf
equation (Laplacian of log K equals 6K). Rewriting such a surface in
geodesic parallel coordinates, g = 2(dx^2 + c^2 dy^2), the reduced fields

    L = -c_x/(2c),  R = sqrt(-c_xx/c),  P = (log R)_x + c_x/c,
    Q = -(1/c) (log R)_y

satisfy a first-order system whose integrability lets a linear system (the
vec-sys) for frame coefficients a, b, r, s be solved line by line. The
assembled 4-metric on (x, y, u, v),

    g4 = (1/(as-rb)^2) ((s du - r dv)^2 + (-b du + a dv)^2)
         + 2(dx^2 + c^2 dy^2),

is Ricci-flat and Kahler with form 2c dx^dy + (1/(as-rb)) du^dv. The R
convention above makes K = R^2/2 and the radial equation
L_x = 2L^2 + R^2/2 exact identities; see the radial residual definitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RectBivariateSpline

from .errors import CompatibilityError, DomainError, GridError
from .grids import (Axis, MetricGrid, TwoFormGrid, central_diff, interior,
                    second_diff)
from .curvature import gauss_curvature_2d, laplace_beltrami

SQRT2 = math.sqrt(2.0)

_H_NAMESPACE = {
    "log": np.log, "exp": np.exp, "sin": np.sin, "cos": np.cos,
    "sinh": np.sinh, "cosh": np.cosh, "hypot": np.hypot,
    "atan2": np.arctan2, "arctan2": np.arctan2, "pi": math.pi,
}


def hyperbolic_factor(x_axis: Axis, y_axis: Axis) -> np.ndarray:
    """Conformal factor 1/(2 y^2) of the curvature -2 half-plane metric."""
    if y_axis.start <= 0.0 or y_axis.stop <= 0.0:
        raise DomainError("hyperbolic factor needs the domain inside y > 0")
    y = y_axis.nodes[None, :]
    ell = 1.0 / (2.0 * y * y)
    return np.broadcast_to(ell, (x_axis.count, y_axis.count)).copy()


def harmonic_grid(expr: str, x_axis: Axis, y_axis: Axis) -> np.ndarray:
    """Evaluate a harmonic-function expression in x, y on the grid.

    The expression sees only x, y and a small set of numpy functions;
    harmonicity itself is checked numerically by leaf_spec.
    """
    x, y = np.meshgrid(x_axis.nodes, y_axis.nodes, indexing="ij")
    names = dict(_H_NAMESPACE)
    names.update({"x": x, "y": y})
    try:
        values = eval(compile(expr, "<harmonic>", "eval"),
                      {"__builtins__": {}}, names)
    except Exception as exc:
        raise DomainError(f"cannot evaluate harmonic expression {expr!r}: {exc}")
    out = np.broadcast_to(np.asarray(values, dtype=np.float64), x.shape)
    if not np.all(np.isfinite(out)):
        raise DomainError(f"harmonic expression {expr!r} is singular on the domain")
    return out.copy()


@dataclass
class LeafSpec:
    """Flat-patch conformal data (l, h) for a leaf-like metric."""

    x_axis: Axis
    y_axis: Axis
    ell: np.ndarray
    h: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        shape = (self.x_axis.count, self.y_axis.count)
        self.ell = np.asarray(self.ell, dtype=np.float64)
        self.h = np.asarray(self.h, dtype=np.float64)
        if self.ell.shape != shape or self.h.shape != shape:
            raise GridError(f"ell/h shape must be {shape}")
        if not np.all(self.ell > 0.0):
            raise DomainError("conformal factor ell must be positive")

    def to_json(self) -> dict:
        return {"schema": 1, "kind": "leaf_spec",
                "axes": [self.x_axis.to_dict(), self.y_axis.to_dict()],
                "ell": self.ell.ravel().tolist(),
                "h": self.h.ravel().tolist(),
                "meta": self.meta}

    @classmethod
    def from_json(cls, data: dict) -> "LeafSpec":
        if data.get("kind") != "leaf_spec":
            raise GridError("not a leaf_spec document")
        ax = [Axis.from_dict(d) for d in data["axes"]]
        shape = (ax[0].count, ax[1].count)
        return cls(ax[0], ax[1],
                   np.asarray(data["ell"]).reshape(shape),
                   np.asarray(data["h"]).reshape(shape),
                   meta=data.get("meta", {}))


def leaf_spec(x_axis: Axis, y_axis: Axis, h: str | np.ndarray = "x",
              ell: np.ndarray | None = None,
              harmonic_tol: float = 1e-4,
              curvature_tol: float = 1e-2) -> LeafSpec:
    """Validated leaf data: l positive with l*g0 of curvature -2, h harmonic.

    Both properties are checked by finite differences at the grid's own
    resolution; tolerances are absolute on the residuals.
    """
    meta = {}
    if isinstance(h, str):
        meta["h_expr"] = h
        h = harmonic_grid(h, x_axis, y_axis)
    if ell is None:
        ell = hyperbolic_factor(x_axis, y_axis)
    spec = LeafSpec(x_axis, y_axis, ell, h, meta=meta)

    lap = (second_diff(spec.h, x_axis.step, 0)
           + second_diff(spec.h, y_axis.step, 1))
    scale = max(1.0, float(np.nanmax(np.abs(second_diff(spec.h, x_axis.step, 0)))),
                float(np.nanmax(np.abs(second_diff(spec.h, y_axis.step, 1)))))
    worst = float(np.nanmax(np.abs(lap))) / scale
    if worst > harmonic_tol:
        raise DomainError(
            f"h is not harmonic at grid resolution: residual {worst:.3e}")

    hyp = _conformal_metric(x_axis, y_axis, spec.ell)
    curv = gauss_curvature_2d(hyp)
    dev = float(np.nanmax(np.abs(interior(curv, 1, 2) + 2.0)))
    if dev > curvature_tol:
        raise DomainError(
            f"ell does not define a curvature -2 metric: deviation {dev:.3e}")
    return spec


def _conformal_metric(x_axis: Axis, y_axis: Axis,
                      factor: np.ndarray) -> MetricGrid:
    g = np.zeros((x_axis.count, y_axis.count, 2, 2))
    g[..., 0, 0] = factor
    g[..., 1, 1] = factor
    return MetricGrid((x_axis, y_axis), g)


def leaf_metric(spec: LeafSpec) -> tuple[MetricGrid, np.ndarray]:
    """The leaf-like metric l^{-1/2} e^{-h} g0 and its predicted curvature.

    The predicted Gauss curvature is K = e^h l^{3/2}, strictly positive.
    """
    factor = spec.ell ** (-0.5) * np.exp(-spec.h)
    K = np.exp(spec.h) * spec.ell ** 1.5
    return _conformal_metric(spec.x_axis, spec.y_axis, factor), K


@dataclass(frozen=True)
class LeafPdeReport:
    """Residual of the leaf equation: Laplacian of log K minus 6K."""

    max_residual: float
    n_excluded: int
    vacuous: bool


def leaf_pde_residual(g: MetricGrid, K: np.ndarray) -> LeafPdeReport:
    """Max interior |Lap_g log K - 6 K|; nodes with K <= 0 are excluded."""
    if g.dim != 2:
        raise GridError("leaf equation is for 2D metrics")
    K = np.asarray(K, dtype=np.float64)
    if K.shape != g.counts:
        raise GridError(f"K shape must be {g.counts}")
    bad = K <= 0.0
    if np.all(bad):
        return LeafPdeReport(math.nan, int(bad.sum()), True)
    logK = np.where(bad, np.nan, np.log(np.where(bad, 1.0, K)))
    resid = np.abs(laplace_beltrami(g, logK) - 6.0 * K)
    inner = interior(resid, 1, 2)
    if not np.any(np.isfinite(inner)):
        return LeafPdeReport(math.nan, int(bad.sum()), True)
    return LeafPdeReport(float(np.nanmax(inner)), int(bad.sum()), False)


# ---------------------------------------------------------------------------
# Geodesic parallel coordinates.

def _metric_splines(g: MetricGrid):
    # quintic when the grid allows it: the interpolant is differentiated
    # twice downstream, where cubic error is not always negligible
    x, y = g.axes[0].nodes, g.axes[1].nodes
    kx = 5 if x.size > 5 else 3
    ky = 5 if y.size > 5 else 3
    comp = g.components
    return tuple(RectBivariateSpline(x, y, comp[..., i, j], kx=kx, ky=ky, s=0)
                 for (i, j) in ((0, 0), (0, 1), (1, 1)))


def _metric_at(splines, px, py):
    sxx, sxy, syy = splines
    return sxx.ev(px, py), sxy.ev(px, py), syy.ev(px, py)


def _geodesic_acc(splines, px, py, vx, vy):
    """Acceleration -Gamma^k_ij v^i v^j from spline derivatives."""
    sxx, sxy, syy = splines
    gxx = sxx.ev(px, py)
    gxy = sxy.ev(px, py)
    gyy = syy.ev(px, py)
    d = (gxx * gyy - gxy * gxy)
    ixx = gyy / d
    ixy = -gxy / d
    iyy = gxx / d
    dg = {}
    for name, s in (("xx", sxx), ("xy", sxy), ("yy", syy)):
        dg[name + "_x"] = s.ev(px, py, dx=1)
        dg[name + "_y"] = s.ev(px, py, dy=1)

    def gamma_low(i, j, l):
        # (1/2)(d_i g_jl + d_j g_il - d_l g_ij) with 0 = x, 1 = y
        def dgc(a, b, k):
            key = ("xx", "xy", "yy")[a + b] + ("_x", "_y")[k]
            return dg[key]
        return 0.5 * (dgc(j, l, i) + dgc(i, l, j) - dgc(i, j, l))

    ax = np.zeros_like(px)
    ay = np.zeros_like(px)
    v = (vx, vy)
    for i in range(2):
        for j in range(2):
            low0 = gamma_low(i, j, 0)
            low1 = gamma_low(i, j, 1)
            vij = v[i] * v[j]
            ax -= (ixx * low0 + ixy * low1) * vij
            ay -= (ixy * low0 + iyy * low1) * vij
    return ax, ay


@dataclass
class CProfile:
    """Geodesic-parallel profile: metric 2(dx^2 + c^2 dy^2) on (x, y).

    x is scaled arclength along geodesics leaving the base curve, y the
    base-curve parameter. x_map/y_map give the source coordinates of each
    profile node, for pullback checks.
    """

    x_axis: Axis
    y_axis: Axis
    c: np.ndarray
    x_map: np.ndarray
    y_map: np.ndarray
    coverage: float = 1.0
    truncated: bool = False
    truncation_reason: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        shape = (self.x_axis.count, self.y_axis.count)
        self.c = np.asarray(self.c, dtype=np.float64)
        if self.c.shape != shape:
            raise GridError(f"c shape must be {shape}")
        if not np.all(self.c > 0.0):
            raise DomainError("profile coefficient c must be positive")

    def to_json(self) -> dict:
        return {"schema": 1, "kind": "c_profile",
                "axes": [self.x_axis.to_dict(), self.y_axis.to_dict()],
                "c": self.c.ravel().tolist(),
                "x_map": np.asarray(self.x_map).ravel().tolist(),
                "y_map": np.asarray(self.y_map).ravel().tolist(),
                "coverage": self.coverage, "truncated": self.truncated,
                "truncation_reason": self.truncation_reason,
                "meta": self.meta}

    @classmethod
    def from_json(cls, data: dict) -> "CProfile":
        if data.get("kind") != "c_profile":
            raise GridError("not a c_profile document")
        ax = [Axis.from_dict(d) for d in data["axes"]]
        shape = (ax[0].count, ax[1].count)
        return cls(ax[0], ax[1],
                   np.asarray(data["c"]).reshape(shape),
                   np.asarray(data["x_map"]).reshape(shape),
                   np.asarray(data["y_map"]).reshape(shape),
                   coverage=data.get("coverage", 1.0),
                   truncated=data.get("truncated", False),
                   truncation_reason=data.get("truncation_reason", ""),
                   meta=data.get("meta", {}))


def geodesic_parallel_profile(g: MetricGrid, x_axis: Axis | None = None,
                              y_axis: Axis | None = None,
                              substeps: int = 4,
                              c_floor: float = 1e-8) -> CProfile:
    """Extract c of the form 2(dx^2 + c^2 dy^2) by shooting geodesics.

    The base curve is the left edge of the source domain, parametrized by
    the source y coordinate. Geodesics leave it orthogonally with squared
    speed 2, integrated with a classical fixed-step fourth-order scheme
    (substeps per profile step); the metric between nodes comes from cubic
    splines. Geodesics exiting the source rectangle or focusing (c below
    c_floor) truncate the profile, recorded in coverage/truncation_reason.
    """
    if g.dim != 2:
        raise GridError("profile extraction is for 2D metrics")
    sx, sy = g.axes
    if x_axis is None:
        x_axis = Axis("x", 0.0, sx.step, sx.count)
    if y_axis is None:
        y_axis = Axis("y", sy.start + sy.step, sy.step, sy.count - 2)
    if x_axis.start != 0.0:
        raise DomainError("profile x axis must start at 0 (the base curve)")

    # one padding seed each side so central y-derivatives cover all nodes
    seeds = np.concatenate(([y_axis.start - y_axis.step], y_axis.nodes,
                            [y_axis.stop + y_axis.step]))
    if seeds[0] < sy.start or seeds[-1] > sy.stop:
        raise DomainError("base-curve seeds (with one-node pad) leave the domain")

    splines = _metric_splines(g)
    px = np.full(seeds.shape, sx.start)
    py = seeds.copy()
    gxx, gxy, gyy = _metric_at(splines, px, py)
    vx = np.sqrt(2.0 / (gxx - gxy * gxy / gyy))
    vy = -vx * gxy / gyy

    n_park = x_axis.count
    X = np.empty((n_park, seeds.size))
    Y = np.empty((n_park, seeds.size))
    X[0], Y[0] = px, py
    hs = x_axis.step / substeps
    delivered = n_park
    reason = ""

    # rounding-scale slack: seeds on the boundary pick up O(1e-19) drift
    # from spline noise, which must not count as leaving the domain
    tol_x = 1e-9 * (sx.stop - sx.start)
    tol_y = 1e-9 * (sy.stop - sy.start)

    def inside(ax_, ay_):
        return ((ax_ >= sx.start - tol_x) & (ax_ <= sx.stop + tol_x)
                & (ay_ >= sy.start - tol_y) & (ay_ <= sy.stop + tol_y))

    for i in range(1, n_park):
        ok = True
        for _ in range(substeps):
            k1 = (vx, vy) + _geodesic_acc(splines, px, py, vx, vy)
            m = (px + 0.5 * hs * k1[0], py + 0.5 * hs * k1[1],
                 vx + 0.5 * hs * k1[2], vy + 0.5 * hs * k1[3])
            k2 = (m[2], m[3]) + _geodesic_acc(splines, *m)
            m = (px + 0.5 * hs * k2[0], py + 0.5 * hs * k2[1],
                 vx + 0.5 * hs * k2[2], vy + 0.5 * hs * k2[3])
            k3 = (m[2], m[3]) + _geodesic_acc(splines, *m)
            m = (px + hs * k3[0], py + hs * k3[1],
                 vx + hs * k3[2], vy + hs * k3[3])
            k4 = (m[2], m[3]) + _geodesic_acc(splines, *m)
            px = px + (hs / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            py = py + (hs / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            vx = vx + (hs / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
            vy = vy + (hs / 6.0) * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
            if not np.all(inside(px, py)):
                ok = False
                break
        if not ok:
            delivered = i
            reason = "geodesic left the source domain"
            break
        X[i], Y[i] = px, py

    X, Y = X[:delivered], Y[:delivered]
    dy = y_axis.step
    Xy = (X[:, 2:] - X[:, :-2]) / (2.0 * dy)
    Yy = (Y[:, 2:] - Y[:, :-2]) / (2.0 * dy)
    Xc, Yc = X[:, 1:-1], Y[:, 1:-1]
    gxx, gxy, gyy = _metric_at(splines, Xc, Yc)
    c2 = 0.5 * (gxx * Xy ** 2 + 2.0 * gxy * Xy * Yy + gyy * Yy ** 2)

    caustic = np.nonzero(np.any(c2 <= c_floor ** 2, axis=1))[0]
    if caustic.size:
        delivered = int(caustic[0])
        if delivered < 2:
            raise DomainError("profile collapses at the base curve (caustic)")
        c2 = c2[:delivered]
        Xc, Yc = Xc[:delivered], Yc[:delivered]
        reason = "caustic: c fell below the floor"

    truncated = delivered < n_park
    out_axis = Axis(x_axis.name, 0.0, x_axis.step, delivered)
    return CProfile(out_axis, y_axis, np.sqrt(c2), Xc, Yc,
                    coverage=delivered / n_park, truncated=truncated,
                    truncation_reason=reason,
                    meta={"base_curve": "left edge", "substeps": substeps})


# ---------------------------------------------------------------------------
# Reduced fields and the first-order system.

@dataclass
class ReducedFields:
    """Grids (L, R, P, Q) of the reduced system; NaN where undefined."""

    L: np.ndarray
    R: np.ndarray
    P: np.ndarray
    Q: np.ndarray
    n_excluded: int


def reduced_fields(cp: CProfile) -> ReducedFields:
    """L = -c_x/(2c), R = sqrt(-c_xx/c), P = (log R)_x + c_x/c,
    Q = -(1/c)(log R)_y, all by central differences.

    Nodes where c_xx >= 0 (R not real, the shear-free locus) are excluded
    and counted; P, Q inherit their NaN plus one differencing margin.
    """
    c = cp.c
    hx, hy = cp.x_axis.step, cp.y_axis.step
    cx = central_diff(c, hx, 0)
    cxx = second_diff(c, hx, 0)
    L = -cx / (2.0 * c)
    m = -cxx / c
    valid = m > 0.0
    n_excluded = int(np.sum(~valid & np.isfinite(m)))
    logm = np.where(valid, np.log(np.where(valid, m, 1.0)), np.nan)
    R = np.sqrt(np.where(valid, m, np.nan))
    P = 0.5 * central_diff(logm, hx, 0) + cx / c
    Q = -central_diff(logm, hy, 1) / (2.0 * c)
    return ReducedFields(L=L, R=R, P=P, Q=Q, n_excluded=n_excluded)


def _nanmax_interior(arr: np.ndarray) -> float:
    finite = arr[np.isfinite(arr)]
    if finite.size == 0:
        return math.nan
    return float(np.max(np.abs(finite)))


@dataclass(frozen=True)
class Sys2Residuals:
    """Max residuals of the reduced first-order system on valid nodes.

    radial_R:     d1 R - R (P + 2L)
    transverse_R: d2 R + R Q
    radial_L:     d1 L - 2 L^2 - R^2/2
    mixed_PQ:     d1 P - d2 Q - 2 L P - 2 R^2
    second_order: d1^2 log R + d2^2 log R - 2 L d1 log R - 3 R^2
    with d1 = partial_x and d2 = (1/c) partial_y.
    """

    radial_R: float
    transverse_R: float
    radial_L: float
    mixed_PQ: float
    second_order: float
    n_excluded: int

    def worst(self) -> float:
        return max(self.radial_R, self.transverse_R, self.radial_L,
                   self.mixed_PQ, self.second_order)


def sys2_residuals(fields: ReducedFields, cp: CProfile) -> Sys2Residuals:
    c = cp.c
    hx, hy = cp.x_axis.step, cp.y_axis.step
    L, R, P, Q = fields.L, fields.R, fields.P, fields.Q
    logR = np.log(R)

    r1 = central_diff(R, hx, 0) - R * (P + 2.0 * L)
    r2 = central_diff(R, hy, 1) / c + R * Q
    r3 = central_diff(L, hx, 0) - 2.0 * L * L - 0.5 * R * R
    r4 = (central_diff(P, hx, 0) - central_diff(Q, hy, 1) / c
          - 2.0 * L * P - 2.0 * R * R)
    d1_logR = central_diff(logR, hx, 0)
    d11 = second_diff(logR, hx, 0)
    d22 = central_diff(central_diff(logR, hy, 1) / c, hy, 1) / c
    r5 = d11 + d22 - 2.0 * L * d1_logR - 3.0 * R * R

    return Sys2Residuals(radial_R=_nanmax_interior(r1),
                         transverse_R=_nanmax_interior(r2),
                         radial_L=_nanmax_interior(r3),
                         mixed_PQ=_nanmax_interior(r4),
                         second_order=_nanmax_interior(r5),
                         n_excluded=fields.n_excluded)


@dataclass
class VecSysCoefficients:
    """Coefficients alpha = R/sqrt(2), beta = Q/2, nu = P/2 + R/sqrt(2),
    chi = -P/2 + R/sqrt(2) of the linear frame system."""

    alpha: np.ndarray
    beta: np.ndarray
    nu: np.ndarray
    chi: np.ndarray


def vecsys_coefficients(fields: ReducedFields) -> VecSysCoefficients:
    alpha = fields.R / SQRT2
    beta = fields.Q / 2.0
    nu = fields.P / 2.0 + fields.R / SQRT2
    chi = -fields.P / 2.0 + fields.R / SQRT2
    return VecSysCoefficients(alpha=alpha, beta=beta, nu=nu, chi=chi)


@dataclass
class VecSysSolution:
    """Frame coefficient grids with the conserved determinant as-rb."""

    x_axis: Axis
    y_axis: Axis
    a: np.ndarray
    b: np.ndarray
    r: np.ndarray
    s: np.ndarray
    det0: float
    compat_residual: float
    meta: dict = field(default_factory=dict)

    @property
    def det(self) -> np.ndarray:
        return self.a * self.s - self.r * self.b

    @property
    def det_drift(self) -> float:
        return float(np.max(np.abs(self.det - self.det0)))


def _finite_window(arrays) -> tuple[slice, slice]:
    """Largest axis-aligned rectangle where every array is finite.

    The NaN pattern here is a differencing margin, so the finite region is
    already a rectangle; we just find its bounds.
    """
    mask = np.ones(arrays[0].shape, dtype=bool)
    for arr in arrays:
        mask &= np.isfinite(arr)
    rows = np.nonzero(mask.any(axis=1))[0]
    cols = np.nonzero(mask.any(axis=0))[0]
    if rows.size == 0 or cols.size == 0:
        raise DomainError("no nodes with all coefficients defined")
    sl = (slice(rows[0], rows[-1] + 1), slice(cols[0], cols[-1] + 1))
    if not np.all(mask[sl]):
        raise DomainError("coefficient fields have holes; cannot pick a window")
    return sl


def _half_nodes(v: np.ndarray) -> np.ndarray:
    """Midpoint values along axis 0, cubic in the interior, quadratic at
    the two end intervals; needed to keep the marching genuinely fourth
    order when coefficients are only known at whole nodes."""
    n = v.shape[0]
    out = np.empty((n - 1,) + v.shape[1:], dtype=v.dtype)
    out[0] = (3.0 * v[0] + 6.0 * v[1] - v[2]) / 8.0
    out[-1] = (-v[-3] + 6.0 * v[-2] + 3.0 * v[-1]) / 8.0
    if n > 3:
        out[1:-1] = (9.0 * (v[1:-2] + v[2:-1]) - (v[:-3] + v[3:])) / 16.0
    return out


def _rk4_linear_march(u0, mats_lo, mats_mid, mats_hi, h):
    """One fourth-order step of u' = M(t) u per column."""
    k1 = np.einsum("...ij,...j->...i", mats_lo, u0)
    k2 = np.einsum("...ij,...j->...i", mats_mid, u0 + 0.5 * h * k1)
    k3 = np.einsum("...ij,...j->...i", mats_mid, u0 + 0.5 * h * k2)
    k4 = np.einsum("...ij,...j->...i", mats_hi, u0 + h * k3)
    return u0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_vecsys(coeffs: VecSysCoefficients, cp: CProfile,
                     init: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 1.0),
                     compat_threshold: float | None = None) -> VecSysSolution:
    """Solve the linear frame system on the window where coefficients exist.

    The y-pair (a_y = c nu r, r_y = c chi a; same with b, s) is integrated
    up the first column, then the x-pair (a_x = alpha a + beta r,
    r_x = -beta a - alpha r) along every y-line, with a fourth-order
    fixed-step scheme. The mixed-partial compatibility residual
    max |d_y(alpha a + beta r) - d_x(c nu r)| (and the b, r, s analogues)
    is reported; it is O(h^2) exactly when the reduced system holds.
    """
    a0, b0, r0, s0 = (float(v) for v in init)
    det0 = a0 * s0 - r0 * b0
    if det0 == 0.0:
        raise DomainError("initial frame must have as - rb != 0")

    win = _finite_window((coeffs.alpha, coeffs.beta, coeffs.nu, coeffs.chi))
    al, be = coeffs.alpha[win], coeffs.beta[win]
    nu, ch = coeffs.nu[win], coeffs.chi[win]
    c = cp.c[win]
    nx, ny = al.shape
    if nx < 3 or ny < 3:
        raise DomainError("coefficient window too small to integrate")
    hx, hy = cp.x_axis.step, cp.y_axis.step
    x_axis = Axis(cp.x_axis.name, cp.x_axis.nodes[win[0].start], hx, nx)
    y_axis = Axis(cp.y_axis.name, cp.y_axis.nodes[win[1].start], hy, ny)

    # columns: state u = (a, b, r, s); y-system matrix [[0, cnu],[cchi, 0]]
    # acting on (a, r) and (b, s) alike.
    def y_mat(cn, cc):
        m = np.zeros((4, 4))
        m[0, 2] = cn
        m[2, 0] = cc
        m[1, 3] = cn
        m[3, 1] = cc
        return m

    cn_col = c[0] * nu[0]
    cc_col = c[0] * ch[0]
    cn_mid, cc_mid = _half_nodes(cn_col), _half_nodes(cc_col)

    a = np.empty((nx, ny))
    b = np.empty((nx, ny))
    r = np.empty((nx, ny))
    s = np.empty((nx, ny))
    u = np.array([a0, b0, r0, s0])
    a[0, 0], b[0, 0], r[0, 0], s[0, 0] = u
    for j in range(ny - 1):
        u = _rk4_linear_march(u, y_mat(cn_col[j], cc_col[j]),
                              y_mat(cn_mid[j], cc_mid[j]),
                              y_mat(cn_col[j + 1], cc_col[j + 1]), hy)
        a[0, j + 1], b[0, j + 1], r[0, j + 1], s[0, j + 1] = u

    # x-marches, all rows at once; matrix [[alpha, beta],[-beta, -alpha]]
    def x_mats(alr, ber):
        m = np.zeros((ny, 4, 4))
        m[:, 0, 0] = alr
        m[:, 0, 2] = ber
        m[:, 2, 0] = -ber
        m[:, 2, 2] = -alr
        m[:, 1, 1] = alr
        m[:, 1, 3] = ber
        m[:, 3, 1] = -ber
        m[:, 3, 3] = -alr
        return m

    al_mid, be_mid = _half_nodes(al), _half_nodes(be)
    u = np.stack([a[0], b[0], r[0], s[0]], axis=-1)
    for i in range(nx - 1):
        u = _rk4_linear_march(u, x_mats(al[i], be[i]),
                              x_mats(al_mid[i], be_mid[i]),
                              x_mats(al[i + 1], be[i + 1]), hx)
        a[i + 1], b[i + 1], r[i + 1], s[i + 1] = u[:, 0], u[:, 1], u[:, 2], u[:, 3]

    resid = 0.0
    for f, gxy in ((a, r), (b, s)):
        lhs = central_diff(al * f + be * gxy, hy, 1)
        rhs = central_diff(c * nu * gxy, hx, 0)
        resid = max(resid, _nanmax_interior(lhs - rhs))
    for f, gxy in ((r, a), (s, b)):
        lhs = central_diff(-be * gxy - al * f, hy, 1)
        rhs = central_diff(c * ch * gxy, hx, 0)
        resid = max(resid, _nanmax_interior(lhs - rhs))

    if compat_threshold is not None and not (resid <= compat_threshold):
        raise CompatibilityError(
            f"mixed-partial residual {resid:.3e} over threshold "
            f"{compat_threshold:.3e}; input fields violate the reduced system")

    sol = VecSysSolution(x_axis=x_axis, y_axis=y_axis, a=a, b=b, r=r, s=s,
                         det0=det0, compat_residual=resid,
                         meta={"init": [a0, b0, r0, s0],
                               "window_offset": [win[0].start, win[1].start]})
    return sol


def assemble_four_metric(v: VecSysSolution, cp: CProfile,
                         u_axis: Axis | None = None,
                         v_axis: Axis | None = None,
                         manifest: dict | None = None
                         ) -> tuple[MetricGrid, TwoFormGrid]:
    """The Ricci-flat 4-metric and its parallel form on (x, y, u, v).

    Components depend on (x, y) only; u, v are the two Killing directions.
    The form's du^dv coefficient is stored as the constant 1/det0, using
    the conserved first integral, so closedness holds to rounding.
    """
    if u_axis is None:
        u_axis = Axis("u", 0.0, v.x_axis.step, 5)
    if v_axis is None:
        v_axis = Axis("v", 0.0, v.x_axis.step, 5)
    i0, j0 = v.meta.get("window_offset", (0, 0))
    c = cp.c[i0:i0 + v.x_axis.count, j0:j0 + v.y_axis.count]
    if c.shape != v.a.shape:
        raise GridError("profile window does not match the solution grid")

    det = v.det
    shape = (v.x_axis.count, v.y_axis.count, u_axis.count, v_axis.count)
    xy = (slice(None), slice(None), None, None)
    g = np.zeros(shape + (4, 4))
    g[..., 0, 0] = 2.0
    g[..., 1, 1] = np.broadcast_to((2.0 * c * c)[xy], shape)
    g[..., 2, 2] = np.broadcast_to(((v.s ** 2 + v.b ** 2) / det ** 2)[xy], shape)
    g[..., 3, 3] = np.broadcast_to(((v.r ** 2 + v.a ** 2) / det ** 2)[xy], shape)
    guv = np.broadcast_to((-(v.s * v.r + v.a * v.b) / det ** 2)[xy], shape)
    g[..., 2, 3] = guv
    g[..., 3, 2] = guv
    metric = MetricGrid((v.x_axis, v.y_axis, u_axis, v_axis), g,
                        manifest=manifest)

    w = np.zeros(shape + (4, 4))
    wxy = np.broadcast_to((2.0 * c)[xy], shape)
    w[..., 0, 1] = wxy
    w[..., 1, 0] = -wxy
    w[..., 2, 3] = 1.0 / v.det0
    w[..., 3, 2] = -1.0 / v.det0
    form = TwoFormGrid((v.x_axis, v.y_axis, u_axis, v_axis), w)
    return metric, form
