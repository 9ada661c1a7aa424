"""Structured grids holding metric tensors and 2-forms, plus stencil helpers.

Grids are uniform per axis. Tensor components live in the trailing array
dimensions; the leading dimensions enumerate nodes. Derivative helpers use
second-order central stencils and mark the boundary layer with NaN instead
of falling back to one-sided differences, so every consumer works on a
shrunken interior and no silent first-order contamination occurs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import GridError

SCHEMA_VERSION = 1

# Node count below which a margin-2 stencil leaves no interior at all.
MIN_NODES_PER_AXIS = 5


@dataclass(frozen=True)
class Axis:
    """A uniformly spaced coordinate axis."""

    name: str
    start: float
    step: float
    count: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.start) or not np.isfinite(self.step):
            raise GridError(f"axis {self.name!r}: non-finite start or step")
        if self.step <= 0.0:
            raise GridError(f"axis {self.name!r}: step must be positive")
        if self.count < 2:
            raise GridError(f"axis {self.name!r}: need at least 2 nodes")

    @property
    def nodes(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    @property
    def stop(self) -> float:
        return self.start + self.step * (self.count - 1)

    def to_dict(self) -> dict:
        return {"name": self.name, "min": self.start, "step": self.step,
                "count": self.count}

    @classmethod
    def from_dict(cls, d: dict) -> "Axis":
        return cls(name=d["name"], start=float(d["min"]), step=float(d["step"]),
                   count=int(d["count"]))


def _check_axes(axes: tuple[Axis, ...], dims_allowed=(2, 4)) -> None:
    if len(axes) not in dims_allowed:
        raise GridError(f"grid dimension {len(axes)} not in {dims_allowed}")
    for ax in axes:
        if ax.count < MIN_NODES_PER_AXIS:
            raise GridError(
                f"axis {ax.name!r}: {ax.count} nodes < {MIN_NODES_PER_AXIS}")


class MetricGrid:
    """A Riemannian metric sampled on a uniform grid.

    components has shape counts + (d, d), is exactly symmetric in the two
    trailing indices, and is positive-definite at every node (checked via
    leading principal minors).
    """

    kind = "metric_grid"

    def __init__(self, axes, components, manifest: dict | None = None,
                 validate: bool = True):
        self.axes = tuple(axes)
        self.components = np.ascontiguousarray(components, dtype=np.float64)
        self.manifest = manifest
        if validate:
            self._validate()

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def counts(self) -> tuple[int, ...]:
        return tuple(ax.count for ax in self.axes)

    @property
    def steps(self) -> tuple[float, ...]:
        return tuple(ax.step for ax in self.axes)

    def _validate(self) -> None:
        _check_axes(self.axes)
        d = self.dim
        g = self.components
        expected = self.counts + (d, d)
        if g.shape != expected:
            raise GridError(f"components shape {g.shape} != {expected}")
        if not np.all(np.isfinite(g)):
            raise GridError("non-finite metric component")
        if not np.array_equal(g, np.swapaxes(g, -1, -2)):
            raise GridError("metric components are not exactly symmetric")
        for k in range(1, d + 1):
            minors = np.linalg.det(g[..., :k, :k]) if k > 1 else g[..., 0, 0]
            if not np.all(minors > 0.0):
                node = np.unravel_index(np.argmin(minors), minors.shape)
                raise GridError(
                    f"metric not positive-definite: minor {k} fails at node {node}")

    def node_mesh(self) -> list[np.ndarray]:
        """Coordinate arrays of shape counts, one per axis."""
        return list(np.meshgrid(*[ax.nodes for ax in self.axes], indexing="ij"))

    def to_json(self) -> str:
        doc = {
            "schema": SCHEMA_VERSION,
            "kind": self.kind,
            "dims": self.dim,
            "axes": [ax.to_dict() for ax in self.axes],
            "components": self.components.ravel(order="C").tolist(),
        }
        if self.manifest is not None:
            doc["manifest"] = self.manifest
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "MetricGrid":
        doc = json.loads(text)
        if doc.get("schema") != SCHEMA_VERSION:
            raise GridError(f"unsupported schema {doc.get('schema')!r}")
        if doc.get("kind") != cls.kind:
            raise GridError(f"expected kind {cls.kind!r}, got {doc.get('kind')!r}")
        axes = tuple(Axis.from_dict(a) for a in doc["axes"])
        d = len(axes)
        shape = tuple(ax.count for ax in axes) + (d, d)
        comp = np.asarray(doc["components"], dtype=np.float64).reshape(shape)
        return cls(axes, comp, manifest=doc.get("manifest"))


class TwoFormGrid(MetricGrid):
    """A 2-form sampled on a uniform grid; exactly antisymmetric components."""

    kind = "two_form_grid"

    def _validate(self) -> None:
        _check_axes(self.axes)
        d = self.dim
        w = self.components
        expected = self.counts + (d, d)
        if w.shape != expected:
            raise GridError(f"components shape {w.shape} != {expected}")
        if not np.all(np.isfinite(w)):
            raise GridError("non-finite form component")
        if not np.array_equal(w, -np.swapaxes(w, -1, -2)):
            raise GridError("form components are not exactly antisymmetric")


# ---------------------------------------------------------------------------
# Central-difference stencils. `axis` indexes the grid (node) dimensions; the
# input may carry extra trailing component dimensions. Boundary nodes where a
# stencil does not fit are set to NaN.

def _shift(f: np.ndarray, axis: int, offset: int) -> np.ndarray:
    idx = [slice(None)] * f.ndim
    idx[axis] = slice(1 + offset, f.shape[axis] - 1 + offset)
    return f[tuple(idx)]


def _interior_index(f: np.ndarray, axis: int) -> tuple:
    idx = [slice(None)] * f.ndim
    idx[axis] = slice(1, -1)
    return tuple(idx)


def central_diff(f: np.ndarray, step: float, axis: int) -> np.ndarray:
    """d f / d x_axis, second order; one NaN layer on that axis."""
    out = np.full_like(f, np.nan)
    out[_interior_index(f, axis)] = (_shift(f, axis, +1) - _shift(f, axis, -1)) / (2.0 * step)
    return out


def second_diff(f: np.ndarray, step: float, axis: int) -> np.ndarray:
    """d^2 f / d x_axis^2, second order; one NaN layer on that axis."""
    out = np.full_like(f, np.nan)
    out[_interior_index(f, axis)] = (
        _shift(f, axis, +1) - 2.0 * _shift(f, axis, 0) + _shift(f, axis, -1)
    ) / (step * step)
    return out


def mixed_diff(f: np.ndarray, step_i: float, axis_i: int,
               step_j: float, axis_j: int) -> np.ndarray:
    """d^2 f / (d x_i d x_j) for i != j via the symmetric 4-point stencil."""
    if axis_i == axis_j:
        return second_diff(f, step_i, axis_i)
    fp = central_diff(f, step_i, axis_i)
    # Second pass over a NaN-margined array keeps NaN bookkeeping automatic.
    return central_diff(fp, step_j, axis_j)


def interior(arr: np.ndarray, margin: int, grid_ndim: int) -> np.ndarray:
    """View of arr with `margin` layers stripped from each grid axis."""
    if margin == 0:
        return arr
    idx = [slice(margin, -margin)] * grid_ndim + [slice(None)] * (arr.ndim - grid_ndim)
    return arr[tuple(idx)]
