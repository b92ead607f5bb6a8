"""Fixed-step explicit integrators.

States are numpy arrays of any shape; the derivative must return an array of
the same shape. Discrete events (resets, threshold crossings) belong to the
caller, never to the stepper.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NumericError

Derivative = Callable[[float, np.ndarray], np.ndarray]

# Upper step bound for spiking neuron models.
SPIKING_MAX_DT = 1.0


@dataclass(frozen=True)
class OdeSystem:
    dimension: int
    derivative: Derivative

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")

    def __call__(self, t, y):
        return self.derivative(t, y)


def check_dt(dt: float, max_dt: Optional[float] = None) -> float:
    dt = float(dt)
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError(f"dt must be finite and > 0, got {dt!r}")
    if max_dt is not None and dt > max_dt:
        raise ValueError(f"dt={dt} exceeds the stability limit {max_dt} ms for this model")
    return dt


def _eval(f: Derivative, t: float, y: np.ndarray) -> np.ndarray:
    dy = np.asarray(f(t, y), dtype=float)
    if not np.all(np.isfinite(dy)):
        bad = int(np.flatnonzero(~np.isfinite(dy.ravel()))[0])
        raise NumericError("non-finite derivative", component=bad, t=t)
    return dy


def _as_state(y) -> np.ndarray:
    y = np.array(y, dtype=float)
    if not np.all(np.isfinite(y)):
        bad = int(np.flatnonzero(~np.isfinite(y.ravel()))[0])
        raise NumericError("non-finite state", component=bad)
    return y


def euler_step(f: Derivative, t: float, y, dt: float) -> np.ndarray:
    y = _as_state(y)
    dt = check_dt(dt)
    return y + dt * _eval(f, t, y)


def rk4_step(f: Derivative, t: float, y, dt: float) -> np.ndarray:
    y = _as_state(y)
    dt = check_dt(dt)
    h2 = 0.5 * dt
    k1 = _eval(f, t, y)
    k2 = _eval(f, t + h2, y + h2 * k1)
    k3 = _eval(f, t + h2, y + h2 * k2)
    k4 = _eval(f, t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


STEPPERS = {"euler": euler_step, "rk4": rk4_step}


def get_stepper(method: str):
    try:
        return STEPPERS[method]
    except KeyError:
        raise ValueError(f"unknown method {method!r}; expected one of {sorted(STEPPERS)}") from None


def n_steps(duration: float, dt: float) -> int:
    """ceil(duration / dt), tolerant of float noise such as 1.1 / 0.1."""
    if duration < 0:
        raise ValueError(f"duration must be >= 0, got {duration}")
    return math.ceil(round(duration / dt, 9))


def integrate_fixed(
    f: Derivative,
    y0,
    dt: float,
    T: float,
    method: str = "rk4",
    observer: Optional[Callable[[float, np.ndarray], None]] = None,
    t0: float = 0.0,
) -> np.ndarray:
    """Apply ``ceil(T/dt)`` fixed steps from ``y0`` and return the final state.

    ``observer(t, y)`` is called after every step with the post-step time and
    state. Step times are computed as ``t0 + k*dt`` to avoid drift.
    """
    stepper = get_stepper(method)
    dt = check_dt(dt)
    y = _as_state(y0)
    for k in range(n_steps(T, dt)):
        t = t0 + k * dt
        try:
            y = stepper(f, t, y, dt)
        except NumericError as exc:
            raise exc.with_context(step=k, t=t) from None
        if observer is not None:
            observer(t0 + (k + 1) * dt, y)
    return y
