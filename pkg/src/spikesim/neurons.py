"""Neuron models: McCulloch-Pitts, Hodgkin-Huxley, McGregor and Izhikevich.

Each continuous model has a parameter record, a state record, a derivative
function and a step function returning ``(new_state, spiked)``. The ``*_rhs``
helpers operate on stacked numpy arrays so the network engine can advance a
whole population with the same code path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .errors import InstabilityError
from .integrators import check_dt, get_stepper

TRACE_VARS = ("V", "n", "m", "h", "E", "GK", "Th", "v", "u")

# Any |membrane variable| beyond this is treated as a blow-up.
BLOWUP_MV = 500.0


# --------------------------------------------------------------------------
# McCulloch-Pitts threshold unit
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdUnit:
    weights: tuple[float, ...]
    theta: float

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        if not all(math.isfinite(x) for x in w) or not math.isfinite(self.theta):
            raise ValueError("threshold unit weights and theta must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "theta", float(self.theta))


def mp_fire(unit: ThresholdUnit, inputs) -> int:
    """1 iff ``dot(weights, inputs) >= theta``."""
    x = np.asarray(inputs, dtype=float).ravel()
    if x.shape[0] != len(unit.weights):
        raise ValueError(f"expected {len(unit.weights)} inputs, got {x.shape[0]}")
    return int(float(np.dot(unit.weights, x)) >= unit.theta)


# --------------------------------------------------------------------------
# Hodgkin-Huxley (1952 shifted convention, rest near 0 mV)
# --------------------------------------------------------------------------

HH_SPIKE_MV = 50.0
HH_MAX_DT = 0.05
HH_DEFAULT_DT = 0.01


@dataclass(frozen=True)
class HHParams:
    C: float = 1.0
    gNa_bar: float = 120.0
    gK_bar: float = 36.0
    gL: float = 0.3
    ENa: float = 115.0
    EK: float = -12.0
    EL: float = 10.6

    def __post_init__(self):
        if not self.C > 0:
            raise ValueError("C must be > 0")
        if min(self.gNa_bar, self.gK_bar, self.gL) < 0:
            raise ValueError("conductances must be >= 0")


@dataclass(frozen=True)
class HHState:
    V: float
    n: float
    m: float
    h: float

    def as_array(self) -> np.ndarray:
        return np.array([self.V, self.n, self.m, self.h], dtype=float)

    @classmethod
    def from_array(cls, y) -> "HHState":
        return cls(*(float(x) for x in y))


def _vtrap(x, y):
    """x / (exp(x/y) - 1), continuous through x = 0 where it equals y."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-7
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        val = x / np.expm1(x / y)
    return np.where(small, y - 0.5 * x, val)


def hh_rates(V):
    """Return ``(alpha_n, beta_n, alpha_m, beta_m, alpha_h, beta_h)`` at V (mV)."""
    V = np.asarray(V, dtype=float)
    an = 0.01 * _vtrap(10.0 - V, 10.0)
    am = 0.1 * _vtrap(25.0 - V, 10.0)
    # a runaway V overflows to inf here; callers report the non-finite result
    with np.errstate(over="ignore"):
        bn = 0.125 * np.exp(-V / 80.0)
        bm = 4.0 * np.exp(-V / 18.0)
        ah = 0.07 * np.exp(-V / 20.0)
        bh = 1.0 / (np.exp((30.0 - V) / 10.0) + 1.0)
    rates = (an, bn, am, bm, ah, bh)
    if V.ndim == 0:
        return tuple(float(r) for r in rates)
    return rates


def hh_gate_steady(V):
    an, bn, am, bm, ah, bh = hh_rates(V)
    return an / (an + bn), am / (am + bm), ah / (ah + bh)


def hh_rhs(y: np.ndarray, p: HHParams, Ie) -> np.ndarray:
    V, n, m, h = y
    an, bn, am, bm, ah, bh = hh_rates(V)
    i_k = p.gK_bar * n**4 * (V - p.EK)
    i_na = p.gNa_bar * m**3 * h * (V - p.ENa)
    i_l = p.gL * (V - p.EL)
    return np.array(
        [
            (Ie - i_k - i_na - i_l) / p.C,
            an * (1.0 - n) - bn * n,
            am * (1.0 - m) - bm * m,
            ah * (1.0 - h) - bh * h,
        ]
    )


def hh_derivatives(s: HHState, p: HHParams, Ie: float) -> np.ndarray:
    return hh_rhs(s.as_array(), p, Ie)


def hh_rest_state(p: HHParams = HHParams()) -> HHState:
    """Resting state: V where dV/dt = 0 with all gates at their steady values."""

    def dv(V):
        n, m, h = hh_gate_steady(V)
        return float(hh_rhs(np.array([V, n, m, h]), p, 0.0)[0])

    V = brentq(dv, -30.0, 30.0, xtol=1e-14, rtol=1e-14)
    return HHState(V, *(float(g) for g in hh_gate_steady(V)))


def _check_blowup(y, dt, what):
    if not np.all(np.isfinite(y)) or np.any(np.abs(y) > BLOWUP_MV):
        raise InstabilityError(f"{what} blew up; reduce dt", dt=dt)


def _hh_rhs_scalar(V, n, m, h, p, Ie):
    x = 10.0 - V
    an = 0.01 * (10.0 - 0.5 * x if abs(x) < 1e-7 else x / math.expm1(x / 10.0))
    bn = 0.125 * math.exp(-V / 80.0)
    x = 25.0 - V
    am = 0.1 * (10.0 - 0.5 * x if abs(x) < 1e-7 else x / math.expm1(x / 10.0))
    bm = 4.0 * math.exp(-V / 18.0)
    ah = 0.07 * math.exp(-V / 20.0)
    bh = 1.0 / (math.exp((30.0 - V) / 10.0) + 1.0)
    dV = (Ie - p.gK_bar * n**4 * (V - p.EK) - p.gNa_bar * m**3 * h * (V - p.ENa) - p.gL * (V - p.EL)) / p.C
    return dV, an * (1.0 - n) - bn * n, am * (1.0 - m) - bm * m, ah * (1.0 - h) - bh * h


def hh_step(
    s: HHState, p: HHParams, Ie: float, dt: float = HH_DEFAULT_DT, method: str = "rk4"
) -> tuple[HHState, bool]:
    """Advance one step; ``spiked`` marks an upward crossing of 50 mV.

    Uses plain-float arithmetic (same scheme as ``integrators``) because
    single-neuron reference runs take ~1e5 steps.
    """
    dt = check_dt(dt, HH_MAX_DT)
    if method not in ("euler", "rk4"):
        get_stepper(method)
    try:
        y = _hh_advance((s.V, s.n, s.m, s.h), p, Ie, dt, method)
    except OverflowError:
        y = (math.inf,)
    V = y[0]
    if not math.isfinite(V) or abs(V) > BLOWUP_MV:
        raise InstabilityError("Hodgkin-Huxley membrane potential blew up; reduce dt", dt=dt)
    n, m, h = (min(max(g, 0.0), 1.0) for g in y[1:])
    return HHState(V, n, m, h), s.V < HH_SPIKE_MV <= V


def _hh_advance(y0, p, Ie, dt, method):
    k1 = _hh_rhs_scalar(*y0, p, Ie)
    if method == "euler":
        y = tuple(a + dt * b for a, b in zip(y0, k1))
    elif method == "rk4":
        h2 = 0.5 * dt
        k2 = _hh_rhs_scalar(*(a + h2 * b for a, b in zip(y0, k1)), p, Ie)
        k3 = _hh_rhs_scalar(*(a + h2 * b for a, b in zip(y0, k2)), p, Ie)
        k4 = _hh_rhs_scalar(*(a + dt * b for a, b in zip(y0, k3)), p, Ie)
        y = tuple(a + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4) for a, b1, b2, b3, b4 in zip(y0, k1, k2, k3, k4))
    return y


def simulate_hh(
    p: HHParams,
    current,
    duration: float,
    dt: float = HH_DEFAULT_DT,
    state: Optional[HHState] = None,
    method: str = "rk4",
    record: bool = False,
):
    """Single-neuron run. ``current`` is a constant or a function of t (ms).

    Returns ``(spike_times, peak_V, final_state, trace)``; ``trace`` is a list
    of ``(t, V)`` when ``record`` is set, else empty.
    """
    from .integrators import n_steps

    s = state if state is not None else hh_rest_state(p)
    drive = current if callable(current) else (lambda _t, c=float(current): c)
    spikes, trace, peak = [], [], s.V
    for k in range(n_steps(duration, dt)):
        s, spiked = hh_step(s, p, drive(k * dt), dt, method)
        t = (k + 1) * dt
        if spiked:
            spikes.append(t)
        if s.V > peak:
            peak = s.V
        if record:
            trace.append((t, s.V))
    return spikes, peak, s, trace


# --------------------------------------------------------------------------
# McGregor integrate-and-fire
# --------------------------------------------------------------------------

MCGREGOR_MAX_DT = 0.5
MCGREGOR_DEFAULT_DT = 0.1


@dataclass(frozen=True)
class McGregorParams:
    Tmem: float = 10.0
    TGK: float = 3.0
    TTh: float = 25.0
    B: float = 20.0
    c: float = 0.3
    Th0: float = 10.0
    EK: float = -10.0
    Ei: float = -10.0
    Ee: float = 70.0

    def __post_init__(self):
        if min(np.min(self.Tmem), np.min(self.TGK), np.min(self.TTh)) <= 0:
            raise ValueError("McGregor time constants must be > 0")
        if np.any(np.asarray(self.c) < 0) or np.any(np.asarray(self.c) > 1):
            raise ValueError("threshold rise c must lie in [0, 1]")


@dataclass(frozen=True)
class McGregorState:
    """``fired_last_step`` is the firing flag S, ``E >= Th`` at the end of the step."""

    E: float = 0.0
    GK: float = 0.0
    Th: float = 10.0
    fired_last_step: bool = False

    def as_array(self) -> np.ndarray:
        return np.array([self.E, self.GK, self.Th], dtype=float)


def mcgregor_rest_state(p: McGregorParams = McGregorParams()) -> McGregorState:
    return McGregorState(0.0, 0.0, p.Th0, False)


def mcgregor_rhs(y: np.ndarray, p: McGregorParams, Ge, Gi, SCN, S) -> np.ndarray:
    E, GK, Th = y
    dE = (-E + GK * (p.EK - E) + Ge * (p.Ee - E) + Gi * (p.Ei - E) + SCN) / p.Tmem
    dGK = (-GK + p.B * S) / p.TGK
    dTh = (-(Th - p.Th0) + p.c * E) / p.TTh
    return np.array([dE, dGK, dTh])


def mcgregor_derivatives(
    s: McGregorState, p: McGregorParams, Ge: float = 0.0, Gi: float = 0.0, SCN: float = 0.0
) -> np.ndarray:
    if Ge < 0 or Gi < 0:
        raise ValueError("synaptic conductances Ge, Gi must be >= 0")
    S = 1.0 if s.fired_last_step else 0.0
    return mcgregor_rhs(s.as_array(), p, Ge, Gi, SCN, S)


def mcgregor_step(
    s: McGregorState,
    p: McGregorParams,
    Ge: float = 0.0,
    Gi: float = 0.0,
    SCN: float = 0.0,
    dt: float = MCGREGOR_DEFAULT_DT,
    method: str = "rk4",
    t: float = 0.0,
) -> tuple[McGregorState, bool]:
    """One step; the recorded spike is the upward crossing of E through Th.

    The potassium term ``B*S`` uses S from the end of the previous step, so
    the surge starts one step after the crossing and persists while E stays
    at or above Th.
    """
    if Ge < 0 or Gi < 0:
        raise ValueError("synaptic conductances Ge, Gi must be >= 0")
    dt = check_dt(dt, MCGREGOR_MAX_DT)
    S = 1.0 if s.fired_last_step else 0.0
    y = get_stepper(method)(lambda _t, yy: mcgregor_rhs(yy, p, Ge, Gi, SCN, S), t, s.as_array(), dt)
    _check_blowup(y[0], dt, "McGregor membrane potential")
    E, GK, Th = (float(x) for x in y)
    spiked = s.E < s.Th and E >= Th
    return McGregorState(E, max(GK, 0.0), Th, E >= Th), spiked


# --------------------------------------------------------------------------
# Izhikevich
# --------------------------------------------------------------------------

IZH_PEAK_MV = 30.0
IZH_MAX_DT = 0.25
IZH_DEFAULT_DT = 0.1


@dataclass(frozen=True)
class IzhParams:
    a: float = 0.02
    b: float = 0.2
    c: float = -65.0
    d: float = 8.0

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.a, self.b, self.c, self.d)):
            raise ValueError("Izhikevich parameters must be finite")


@dataclass(frozen=True)
class IzhState:
    v: float
    u: float
    last_spike: Optional[float] = None


@dataclass(frozen=True)
class RefractoryConfig:
    dt_min: float = 2.0

    def __post_init__(self):
        if not self.dt_min > 0:
            raise ValueError("dt_min must be > 0")


def izh_rhs(y: np.ndarray, a, b, I) -> np.ndarray:
    v, u = y
    return np.array([0.04 * v * v + 5.0 * v + 140.0 - u + I, a * (b * v - u)])


def izh_derivatives(s: IzhState, p: IzhParams, I: float = 0.0) -> np.ndarray:
    return izh_rhs(np.array([s.v, s.u], dtype=float), p.a, p.b, I)


def izh_rest_v(a, b, c):
    """Stable resting v (lower root of 0.04v^2 + (5-b)v + 140 = 0), else c."""
    b = np.asarray(b, dtype=float)
    disc = (5.0 - b) ** 2 - 4 * 0.04 * 140.0
    with np.errstate(invalid="ignore"):
        root = (-(5.0 - b) - np.sqrt(disc)) / 0.08
    return np.where(disc >= 0, root, np.asarray(c, dtype=float))


def izh_rest_state(p: IzhParams = IzhParams()) -> IzhState:
    v = float(izh_rest_v(p.a, p.b, p.c))
    return IzhState(v, p.b * v)


IZH_INITIAL_V = -65.0


def izh_initial_state(p: IzhParams = IzhParams()) -> IzhState:
    """Conventional start ``v = -65, u = b v`` used for the regime runs."""
    return IzhState(IZH_INITIAL_V, p.b * IZH_INITIAL_V)


def izh_population_step(v, u, last_spike, a, b, c, d, I, dt, now, dt_min=None):
    """Vectorized Euler step with reset; ``dt_min`` enables the refractory bound.

    ``last_spike`` holds NaN for neurons that never fired. Returns
    ``(v, u, last_spike, spiked)`` as new arrays.
    """
    v_new = v + dt * (0.04 * v * v + 5.0 * v + 140.0 - u + I)
    u_new = u + dt * (a * (b * v - u))
    over = v_new > IZH_PEAK_MV
    if dt_min is None:
        spiked = over
    else:
        since = now - last_spike
        ready = np.isnan(last_spike) | (since > dt_min)
        spiked = over & ready
        v_new = np.where(over & ~ready, IZH_PEAK_MV, v_new)
    v_new = np.where(spiked, c, v_new)
    u_new = np.where(spiked, u_new + d, u_new)
    last = np.where(spiked, now, last_spike)
    if not (np.all(np.isfinite(v_new)) and np.all(np.isfinite(u_new))) or np.any(np.abs(v_new) > BLOWUP_MV):
        raise InstabilityError("Izhikevich state blew up; reduce dt", dt=dt)
    return v_new, u_new, last, spiked


def _izh_scalar_step(s, p, I, dt, now, dt_min):
    dt = check_dt(dt, IZH_MAX_DT)
    last = np.nan if s.last_spike is None else s.last_spike
    v, u, last, spiked = izh_population_step(
        np.array([s.v]), np.array([s.u]), np.array([last]), p.a, p.b, p.c, p.d, I, dt, now, dt_min
    )
    ls = None if np.isnan(last[0]) else float(last[0])
    return IzhState(float(v[0]), float(u[0]), ls), bool(spiked[0])


def izhikevich_step(
    s: IzhState, p: IzhParams, I: float, dt: float = IZH_DEFAULT_DT, now: float = 0.0
) -> tuple[IzhState, bool]:
    """Original model: Euler step, then ``v > 30`` resets ``v = c, u += d``.

    ``now`` is the time stamped on a spike produced by this step.
    """
    return _izh_scalar_step(s, p, I, dt, now, None)


def izhikevich_step_bounded(
    s: IzhState,
    p: IzhParams,
    I: float,
    dt: float = IZH_DEFAULT_DT,
    r: RefractoryConfig = RefractoryConfig(),
    now: float = 0.0,
) -> tuple[IzhState, bool]:
    """Refractory-bounded variant.

    A peak within ``r.dt_min`` of the last spike is clamped to 30 mV without
    spiking and without touching u.
    """
    return _izh_scalar_step(s, p, I, dt, now, r.dt_min)


def izh_params_from_gamma(kind: str, gamma: float) -> IzhParams:
    if kind == "excitatory":
        return IzhParams(0.02, 0.2, -65.0 + 15.0 * gamma, 8.0 - 6.0 * gamma)
    if kind == "inhibitory":
        return IzhParams(0.02 + 0.08 * gamma, 0.25 - 0.05 * gamma, -65.0, 2.0)
    raise ValueError(f"kind must be 'excitatory' or 'inhibitory', got {kind!r}")


def sample_izh_params(kind: str, rng: np.random.Generator) -> IzhParams:
    """Draw gamma ~ U[0, 1) from ``rng`` and map it through the parameter table."""
    return izh_params_from_gamma(kind, float(rng.random()))


# Named corners of the parameter table.
IZH_REGIMES = {
    "RS": ("excitatory", 0.0),
    "CH": ("excitatory", 1.0),
    "LTS": ("inhibitory", 0.0),
    "FS": ("inhibitory", 1.0),
}


def simulate_izhikevich(
    p: IzhParams,
    I: float,
    duration: float,
    dt: float = IZH_DEFAULT_DT,
    refractory: Optional[RefractoryConfig] = None,
    state: Optional[IzhState] = None,
) -> list[float]:
    """Run a single neuron under constant current; return its spike times."""
    from .integrators import n_steps

    s = state if state is not None else izh_rest_state(p)
    times = []
    for k in range(n_steps(duration, dt)):
        now = (k + 1) * dt
        if refractory is None:
            s, spiked = izhikevich_step(s, p, I, dt, now)
        else:
            s, spiked = izhikevich_step_bounded(s, p, I, dt, refractory, now)
        if spiked:
            times.append(now)
    return times
