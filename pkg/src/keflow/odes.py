"""Adaptive ODE integration wrapper and the sampled-trajectory container.

Integration uses an embedded Runge-Kutta 5(4) pair with PI step control
(scipy's RK45). Blow-up is a flagged early stop, not an exception: the run
terminates cleanly when a component magnitude crosses `max_component`, when
the solver's step size underflows, or when a caller-supplied terminal event
fires, and the trajectory records which of these happened.
"""

from __future__ import annotations

import ast
import io
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError

MAX_COMPONENT = 1e12
MIN_STEP_FRACTION = 1e-12


@dataclass
class Trajectory:
    """Samples of an ODE solution at the accepted integration steps."""

    t: np.ndarray
    states: np.ndarray
    columns: tuple[str, ...]
    rtol: float
    atol: float
    blow_up: bool = False
    stop_reason: str = "t_end"
    n_steps: int = 0
    n_rhs_evals: int = 0
    meta: dict = field(default_factory=dict)
    interpolant: Callable[[float], np.ndarray] | None = None

    def __post_init__(self) -> None:
        self.t = np.asarray(self.t, dtype=np.float64)
        self.states = np.asarray(self.states, dtype=np.float64)
        if self.t.ndim != 1 or self.states.shape != (self.t.size, len(self.columns)):
            raise ValueError("inconsistent trajectory shapes")
        if not np.all(np.diff(self.t) > 0.0):
            raise ValueError("sample times must be strictly increasing")

    @property
    def t_start(self) -> float:
        return float(self.t[0])

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def column(self, name: str) -> np.ndarray:
        return self.states[:, self.columns.index(name)]

    def sample(self, t) -> np.ndarray:
        """Dense-output states at times t, shape (len(columns),) + t.shape."""
        if self.interpolant is None:
            raise DomainError("trajectory has no dense output (loaded from CSV?)")
        t = np.asarray(t, dtype=np.float64)
        if np.any(t < self.t[0]) or np.any(t > self.t[-1]):
            raise DomainError(
                f"sample time outside [{self.t[0]}, {self.t[-1]}]")
        return self.interpolant(t)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(f"# columns: t,{','.join(self.columns)}\n")
        buf.write(f"# rtol: {self.rtol!r}\n")
        buf.write(f"# atol: {self.atol!r}\n")
        buf.write(f"# blow_up: {int(self.blow_up)}\n")
        buf.write(f"# stop_reason: {self.stop_reason}\n")
        buf.write(f"# n_steps: {self.n_steps}\n")
        buf.write(f"# n_rhs_evals: {self.n_rhs_evals}\n")
        for key in sorted(self.meta):
            buf.write(f"# meta {key}: {self.meta[key]!r}\n")
        buf.write("t," + ",".join(self.columns) + "\n")
        for ti, row in zip(self.t, self.states):
            buf.write(",".join(repr(float(v)) for v in (ti, *row)) + "\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Trajectory":
        meta: dict = {}
        info = {"rtol": np.nan, "atol": np.nan, "blow_up": 0,
                "stop_reason": "t_end", "n_steps": 0, "n_rhs_evals": 0}
        rows = []
        columns: tuple[str, ...] | None = None
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" not in body:
                    continue
                key, _, val = body.partition(":")
                key, val = key.strip(), val.strip()
                if key.startswith("meta "):
                    try:
                        meta[key[5:]] = ast.literal_eval(val)
                    except (ValueError, SyntaxError):
                        meta[key[5:]] = val
                elif key in ("rtol", "atol"):
                    info[key] = float(val)
                elif key in ("blow_up", "n_steps", "n_rhs_evals"):
                    info[key] = int(val)
                elif key == "stop_reason":
                    info[key] = val
                continue
            parts = line.split(",")
            if columns is None and not _is_float(parts[0]):
                columns = tuple(parts[1:])
                continue
            rows.append([float(p) for p in parts])
        if columns is None or not rows:
            raise ValueError("CSV does not contain a trajectory")
        data = np.asarray(rows)
        return cls(t=data[:, 0], states=data[:, 1:], columns=columns,
                   rtol=info["rtol"], atol=info["atol"],
                   blow_up=bool(info["blow_up"]), stop_reason=info["stop_reason"],
                   n_steps=info["n_steps"], n_rhs_evals=info["n_rhs_evals"],
                   meta=meta)


def _is_float(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def integrate_flow(rhs, t0: float, y0: Sequence[float], t_end: float,
                   columns: tuple[str, ...], rtol: float, atol: float,
                   events: Sequence | None = None,
                   positive_components: Sequence[int] = (),
                   max_component: float = MAX_COMPONENT,
                   meta: dict | None = None) -> Trajectory:
    """Integrate y' = rhs(t, y) adaptively; returns samples at accepted steps.

    `events` are scipy-style terminal/non-terminal event functions; an entry
    may carry a `name` attribute used in stop_reason. `positive_components`
    lists state indices whose collapse to <= 0 terminates the run.
    """
    if t_end == t0:
        raise DomainError("empty integration span")
    y0 = np.asarray(y0, dtype=np.float64)

    def overflow(t, y):
        return np.max(np.abs(y)) - max_component
    overflow.terminal = True
    overflow.direction = 1.0

    evs = [overflow]
    if positive_components:
        floor = 1e-13 * max(1.0, float(np.min(np.abs(y0[list(positive_components)]))))

        def positivity(t, y):
            return np.min(y[list(positive_components)]) - floor
        positivity.terminal = True
        positivity.direction = -1.0
        evs.append(positivity)
    user_events = list(events or [])
    evs.extend(user_events)

    sol = solve_ivp(rhs, (t0, t_end), y0, method="RK45", rtol=rtol, atol=atol,
                    events=evs, dense_output=True)

    blow_up = False
    reason = "t_end"
    if sol.status == -1:
        blow_up = True
        reason = "step_underflow"
    elif sol.status == 1:
        if sol.t_events[0].size:
            blow_up = True
            reason = "component_overflow"
        elif positive_components and sol.t_events[1].size:
            blow_up = True
            reason = "positivity_loss"
        else:
            base = 1 + bool(positive_components)
            for i, ev in enumerate(user_events):
                if sol.t_events[base + i].size:
                    reason = f"event:{getattr(ev, 'name', i)}"
                    break

    t = sol.t
    states = sol.y.T
    if t.size > 1 and t[1] < t[0]:
        t = t[::-1].copy()
        states = states[::-1].copy()
    # Drop duplicate times (terminal events may repeat the last node).
    keep = np.concatenate([[True], np.diff(t) > 0.0])
    interp = sol.sol

    def interpolant(tq, _s=interp):
        return np.asarray(_s(tq))

    return Trajectory(t=t[keep], states=states[keep], columns=columns,
                      rtol=rtol, atol=atol, blow_up=blow_up, stop_reason=reason,
                      n_steps=int(np.sum(keep)) - 1, n_rhs_evals=int(sol.nfev),
                      meta=meta or {}, interpolant=interpolant)
