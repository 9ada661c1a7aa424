"""Finite-difference curvature on metric grids.

All stencils are second-order central differences; nothing one-sided is ever
used, so quantities are valid one layer in from the boundary and the invalid
shell is NaN. Curvature is assembled from the lowered tensor

    R_abcd = (g_ad,bc + g_bc,ad - g_bd,ac - g_ac,bd)/2
             + g_ef (Gamma^e_bc Gamma^f_ad - Gamma^e_bd Gamma^f_ac)

with the second derivatives of g taken by tight 3-point (and 4-point cross)
stencils rather than by differencing the Christoffel grid; that keeps the
truncation constant small and makes the pair symmetry R_abcd = R_cdab exact
up to summation rounding, which in turn makes the Ricci tensor symmetric to
rounding on the valid interior.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import GridError
from .grids import (MetricGrid, TwoFormGrid, _shift, central_diff, interior,
                    mixed_diff, second_diff)

# Derivative quantities are valid this many layers in from the boundary.
CURVATURE_MARGIN = 1


def _inverse_metric(g: np.ndarray) -> np.ndarray:
    dets = np.linalg.det(g)
    if not np.all(np.isfinite(dets)) or np.any(dets <= 0.0):
        bad = np.where(~(np.isfinite(dets) & (dets > 0.0)))
        node = tuple(int(b[0]) for b in bad)
        raise GridError(f"metric not invertible at node {node}")
    ginv = np.linalg.inv(g)
    # Force exact symmetry so downstream contractions commute bitwise.
    return 0.5 * (ginv + np.swapaxes(ginv, -1, -2))


def _metric_derivatives(grid: MetricGrid) -> np.ndarray:
    """dg[..., i, j, m] = d g_ij / d x_m with NaN on each axis-m boundary."""
    g = grid.components
    return np.stack(
        [central_diff(g, grid.steps[m], m) for m in range(grid.dim)], axis=-1)


def _metric_second_derivatives(grid: MetricGrid) -> np.ndarray:
    """ddg[..., i, j, m, n] = d^2 g_ij / (dx_m dx_n), mirrored over (m, n)."""
    g = grid.components
    d = grid.dim
    ddg = np.empty(grid.counts + (d, d, d, d))
    for m in range(d):
        ddg[..., m, m] = second_diff(g, grid.steps[m], m)
        for n in range(m + 1, d):
            cross = mixed_diff(g, grid.steps[m], m, grid.steps[n], n)
            ddg[..., m, n] = cross
            ddg[..., n, m] = cross
    return ddg


def christoffel(grid: MetricGrid) -> np.ndarray:
    """Christoffel symbols of the second kind, Gamma[..., k, i, j].

    Exactly symmetric in (i, j); NaN on the outermost node layer.
    """
    dg = _metric_derivatives(grid)
    ginv = _inverse_metric(grid.components)
    t1 = np.swapaxes(dg, -1, -2)          # [l, i, j] = d_i g_lj
    t2 = dg                               # [l, i, j] = d_j g_li
    t3 = np.moveaxis(dg, -1, -3)          # [l, i, j] = d_l g_ij
    return 0.5 * np.einsum("...kl,...lij->...kij", ginv, t1 + t2 - t3)


def riemann_lowered(grid: MetricGrid) -> np.ndarray:
    """Lowered curvature tensor R[..., a, b, c, d] = R_abcd; NaN margin 1.

    Sign convention fixed by R_0101 = det(g) K on a round sphere (K = +1).
    """
    g = grid.components
    gamma = christoffel(grid)
    ddg = _metric_second_derivatives(grid)
    deriv = 0.5 * (np.einsum("...adbc->...abcd", ddg)
                   + np.einsum("...bcad->...abcd", ddg)
                   - np.einsum("...bdac->...abcd", ddg)
                   - np.einsum("...acbd->...abcd", ddg))
    q1 = np.einsum("...ef,...ebc,...fad->...abcd", g, gamma, gamma)
    q2 = np.einsum("...ef,...ebd,...fac->...abcd", g, gamma, gamma)
    return deriv + q1 - q2


def riemann(grid: MetricGrid) -> np.ndarray:
    """Curvature tensor R[..., a, b, c, d] = R^a_{bcd}; NaN margin 1."""
    ginv = _inverse_metric(grid.components)
    return np.einsum("...ae,...ebcd->...abcd", ginv, riemann_lowered(grid))


def ricci(grid: MetricGrid) -> np.ndarray:
    """Ricci tensor Ric[..., i, j]; NaN margin 1.

    Sign fixed by Ric = K g on a round sphere; symmetric to rounding.
    """
    ginv = _inverse_metric(grid.components)
    return np.einsum("...ae,...ebad->...bd", ginv, riemann_lowered(grid))


def _interior_max(arr: np.ndarray, grid: MetricGrid, margin: int) -> float:
    for ax in grid.counts:
        if ax <= 2 * margin:
            raise GridError(f"axis with {ax} nodes leaves no margin-{margin} interior")
    inner = interior(np.abs(arr), margin, grid.dim)
    if not np.all(np.isfinite(inner)):
        raise GridError("non-finite values inside the valid interior")
    return float(inner.max())


def riemann_max(grid: MetricGrid) -> float:
    """Componentwise max |R^a_{bcd}| over the valid interior."""
    return _interior_max(riemann(grid), grid, CURVATURE_MARGIN)


def einstein_residual(grid: MetricGrid, lam: float) -> float:
    """Componentwise max |Ric - lam g| over the valid interior."""
    resid = ricci(grid) - lam * grid.components
    return _interior_max(resid, grid, CURVATURE_MARGIN)


def gauss_curvature_2d(grid: MetricGrid) -> np.ndarray:
    """Gauss curvature of a 2D metric grid; NaN margin 1."""
    if grid.dim != 2:
        raise GridError("gauss_curvature_2d needs a 2D grid")
    g = grid.components
    r0101 = riemann_lowered(grid)[..., 0, 1, 0, 1]
    det2 = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
    return r0101 / det2


def laplace_beltrami(grid: MetricGrid, u: np.ndarray) -> np.ndarray:
    """Laplace-Beltrami operator applied to scalar samples u; NaN margin 1.

    Divergence form (1/sqrt g) d_i (sqrt g g^{ij} d_j u): the diagonal flux
    terms use the compact staggered conservative stencil, the cross terms
    chain two central passes.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.shape != grid.counts:
        raise GridError(f"scalar shape {u.shape} != grid shape {grid.counts}")
    d = grid.dim
    ginv = _inverse_metric(grid.components)
    sqrtg = np.sqrt(np.linalg.det(grid.components))
    weights = sqrtg[..., None, None] * ginv
    div = np.zeros_like(u)
    for i in range(d):
        div = div + _staggered_div(weights[..., i, i], u, grid.steps[i], i)
    if d > 1:
        du = np.stack(
            [central_diff(u, grid.steps[m], m) for m in range(d)], axis=-1)
        for i in range(d):
            for j in range(d):
                if i != j:
                    div = div + central_diff(weights[..., i, j] * du[..., j],
                                             grid.steps[i], i)
    return div / sqrtg


def _staggered_div(a: np.ndarray, u: np.ndarray, step: float, axis: int) -> np.ndarray:
    """(a u')' via half-node fluxes with arithmetic-mean coefficients."""
    out = np.full_like(u, np.nan)
    up, u0, um = _shift(u, axis, +1), _shift(u, axis, 0), _shift(u, axis, -1)
    ap = 0.5 * (_shift(a, axis, +1) + _shift(a, axis, 0))
    am = 0.5 * (_shift(a, axis, 0) + _shift(a, axis, -1))
    idx = [slice(None)] * u.ndim
    idx[axis] = slice(1, -1)
    out[tuple(idx)] = (ap * (up - u0) - am * (u0 - um)) / (step * step)
    return out


def exterior_derivative_closedness(form: TwoFormGrid) -> float:
    """Max component of the finite-difference exterior derivative d(omega).

    In dimension 2 there are no 3-forms and the result is exactly zero.
    """
    d = form.dim
    if d < 3:
        return 0.0
    w = form.components
    worst = 0.0
    for i, j, k in combinations(range(d), 3):
        term = (central_diff(w[..., j, k], form.steps[i], i)
                - central_diff(w[..., i, k], form.steps[j], j)
                + central_diff(w[..., i, j], form.steps[k], k))
        inner = interior(np.abs(term), 1, d)
        if not np.all(np.isfinite(inner)):
            raise GridError("non-finite exterior derivative inside interior")
        worst = max(worst, float(inner.max()))
    return worst


@dataclass(frozen=True)
class OrderFit:
    """Least-squares convergence order from a resolution sweep."""

    order: float | None
    below_floor: bool
    intercept: float | None = None


def convergence_order(spacings, residuals, floor: float = 1e-14) -> OrderFit:
    """Fit residual ~ C h^p through (spacing, residual) pairs.

    Requires at least three spacings in geometric progression. Residuals at
    or below `floor` cannot support a log-log fit and yield below_floor=True;
    negative residuals are rejected.
    """
    h = np.asarray(spacings, dtype=np.float64)
    r = np.asarray(residuals, dtype=np.float64)
    if h.shape != r.shape or h.ndim != 1 or h.size < 3:
        raise ValueError("need at least three (spacing, residual) pairs")
    if np.any(h <= 0.0):
        raise ValueError("spacings must be positive")
    ratios = h[1:] / h[:-1]
    if np.any(np.abs(ratios / ratios[0] - 1.0) > 1e-6) or abs(ratios[0] - 1.0) < 1e-12:
        raise ValueError("spacings must form a geometric progression")
    if np.any(r < 0.0):
        raise ValueError("residuals must be nonnegative")
    if np.any(r <= floor):
        return OrderFit(order=None, below_floor=True)
    slope, intercept = np.polyfit(np.log(h), np.log(r), 1)
    return OrderFit(order=float(slope), below_floor=False,
                    intercept=float(intercept))
