"""Clock-driven network engine.

Each synapse carries a two-variable linear state ``(x, y)``; a spike arriving
at grid time t0 adds 1 to ``x`` and the exact per-step propagator

    y <- a (y + dt x),  x <- a x,  a = exp(-dt / tau)

keeps ``A e / tau * y`` equal to the alpha kernel ``k(t - t0)`` at every grid
point. Summed over synapses this is the PSP drive ``sum w k(t - t_spike - delay)``
without storing spike histories.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from types import SimpleNamespace
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .core import Raster, SpikeEvent, quantize_time
from .errors import ConfigError, InstabilityError, NumericError
from .integrators import check_dt, get_stepper, n_steps
from .neurons import (
    BLOWUP_MV,
    HH_MAX_DT,
    IZH_MAX_DT,
    MCGREGOR_MAX_DT,
    HHParams,
    IzhParams,
    McGregorParams,
    RefractoryConfig,
    ThresholdUnit,
    hh_rest_state,
    hh_rhs,
    izh_population_step,
    izh_rest_v,
    mcgregor_rhs,
)
from .plasticity import PAIRING_CUTOFF_MS, AlphaKernel, SaprRule, StdpRule, WeightBounds

MODELS = ("mcculloch_pitts", "hh", "mcgregor", "izhikevich", "izhikevich_bounded")
POLARITIES = ("excitatory", "inhibitory")
MODEL_VARS = {
    "mcculloch_pitts": (),
    "hh": ("V", "n", "m", "h"),
    "mcgregor": ("E", "GK", "Th"),
    "izhikevich": ("v", "u"),
    "izhikevich_bounded": ("v", "u"),
}
DEFAULT_PARAMS = {
    "mcculloch_pitts": ThresholdUnit((), 1.0),
    "hh": HHParams(),
    "mcgregor": McGregorParams(),
    "izhikevich": IzhParams(),
    "izhikevich_bounded": IzhParams(),
}
_PARAM_TYPES = {
    "mcculloch_pitts": ThresholdUnit,
    "hh": HHParams,
    "mcgregor": McGregorParams,
    "izhikevich": IzhParams,
    "izhikevich_bounded": IzhParams,
}
_MAX_DT = {"hh": HH_MAX_DT, "mcgregor": MCGREGOR_MAX_DT, "izhikevich": IZH_MAX_DT, "izhikevich_bounded": IZH_MAX_DT}

TRACE_HEADER = "t_ms,neuron_id,var,value"
DEFAULT_DELAY_MS = 1.0
DEFAULT_KERNEL = AlphaKernel(1.0, 2.0)


@dataclass(frozen=True)
class NeuronSpec:
    model: str = "mcgregor"
    params: object = None
    polarity: str = "excitatory"

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"unknown neuron model {self.model!r}; expected one of {MODELS}")
        if self.polarity not in POLARITIES:
            raise ConfigError(f"polarity must be one of {POLARITIES}, got {self.polarity!r}")
        if self.params is None:
            object.__setattr__(self, "params", DEFAULT_PARAMS[self.model])
        elif not isinstance(self.params, _PARAM_TYPES[self.model]):
            raise ConfigError(
                f"{self.model} neuron needs {_PARAM_TYPES[self.model].__name__} params, "
                f"got {type(self.params).__name__}"
            )

    @property
    def sign(self) -> float:
        return 1.0 if self.polarity == "excitatory" else -1.0


@dataclass(frozen=True)
class Synapse:
    pre: int
    post: int
    weight: float
    delay: float = DEFAULT_DELAY_MS
    kernel: AlphaKernel = DEFAULT_KERNEL
    plastic: Optional[bool] = None  # None: decided by SimConfig
    allow_self: bool = False


@dataclass
class Topology:
    neurons: list[NeuronSpec] = field(default_factory=list)
    synapses: list[Synapse] = field(default_factory=list)

    def add_neuron(self, spec: NeuronSpec) -> int:
        self.neurons.append(spec)
        return len(self.neurons) - 1

    def add_synapse(self, syn: Synapse) -> int:
        self.synapses.append(syn)
        return len(self.synapses) - 1

    def afferents(self, post: int) -> list[int]:
        return [i for i, s in enumerate(self.synapses) if s.post == post]


PLASTICITY_MODES = ("off", "stdp", "sapr")


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    duration: float = 100.0
    seed: int = 0
    plasticity: str = "off"
    bounds: WeightBounds = WeightBounds()
    stdp: StdpRule = StdpRule()
    sapr: SaprRule = SaprRule()
    plastic_inhibitory: bool = False
    refractory: RefractoryConfig = RefractoryConfig()
    method: str = "rk4"

    def __post_init__(self):
        check_dt(self.dt)
        if not (math.isfinite(self.duration) and self.duration >= 0):
            raise ConfigError(f"duration must be >= 0, got {self.duration}")
        if self.plasticity not in PLASTICITY_MODES:
            raise ConfigError(f"plasticity must be one of {PLASTICITY_MODES}, got {self.plasticity!r}")
        get_stepper(self.method)

    @property
    def rule(self):
        return {"stdp": self.stdp, "sapr": self.sapr}.get(self.plasticity)


# --------------------------------------------------------------------------
# Stimulus
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CurrentSegment:
    neuron: int
    start: float
    stop: float
    amplitude: float


@dataclass(frozen=True)
class PoissonSource:
    """Forces ``neuron`` to spike as a Poisson process of ``rate_hz``."""

    neuron: int
    rate_hz: float
    start: float = 0.0
    stop: float = math.inf


@dataclass(frozen=True)
class SpikeSource:
    """Forces ``neuron`` to spike at the given times (snapped up to the grid)."""

    neuron: int
    times: tuple[float, ...]


@dataclass
class StimulusProgram:
    currents: list[CurrentSegment] = field(default_factory=list)
    poisson: list[PoissonSource] = field(default_factory=list)
    spikes: list[SpikeSource] = field(default_factory=list)

    def __post_init__(self):
        by_neuron: dict[int, list[CurrentSegment]] = {}
        for seg in self.currents:
            if not seg.stop >= seg.start >= 0:
                raise ConfigError(f"current segment for neuron {seg.neuron} has start > stop or start < 0")
            by_neuron.setdefault(seg.neuron, []).append(seg)
        for nid, segs in by_neuron.items():
            segs = sorted(segs, key=lambda s: s.start)
            for a, b in zip(segs, segs[1:]):
                if b.start < a.stop:
                    raise ConfigError(f"current segments for neuron {nid} overlap at t={b.start}")
        for src in self.poisson:
            if src.rate_hz < 0:
                raise ConfigError(f"Poisson rate for neuron {src.neuron} must be >= 0")

    def neurons(self) -> set[int]:
        return {s.neuron for s in self.currents} | {s.neuron for s in self.poisson} | {s.neuron for s in self.spikes}

    def current_at(self, t: float, n_neurons: int) -> np.ndarray:
        out = np.zeros(n_neurons)
        for seg in self.currents:
            if seg.start <= t < seg.stop:
                out[seg.neuron] += seg.amplitude
        return out

    @classmethod
    def constant(cls, amplitudes: dict[int, float], start: float = 0.0, stop: float = math.inf):
        return cls([CurrentSegment(i, start, stop, float(a)) for i, a in sorted(amplitudes.items())])


def _grid_index(t: float, dt: float) -> int:
    """First grid index g with g*dt >= t."""
    if math.isinf(t):
        return 2**62
    return max(0, math.ceil(round(t / dt, 9)))


# --------------------------------------------------------------------------
# Results
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RunResult:
    raster: Raster
    times: np.ndarray
    traces: dict[tuple[int, str], np.ndarray]
    weight_times: np.ndarray
    weight_history: np.ndarray  # shape (n_samples, n_synapses)

    def trace(self, neuron_id: int, var: str) -> np.ndarray:
        return self.traces[(neuron_id, var)]

    def traces_csv(self) -> str:
        buf = io.StringIO()
        buf.write(TRACE_HEADER + "\n")
        keys = sorted(self.traces)
        for k, t in enumerate(self.times):
            for nid, var in keys:
                buf.write(f"{t:.6f},{nid},{var},{self.traces[(nid, var)][k]:.6f}\n")
        return buf.getvalue()

    def write(self, out_dir: Union[str, Path], prefix: str = "") -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {"raster": out / f"{prefix}raster.csv", "traces": out / f"{prefix}traces.csv"}
        self.raster.write_csv(paths["raster"])
        paths["traces"].write_text(self.traces_csv(), encoding="utf-8")
        return paths


def read_traces_csv(text: str) -> dict[tuple[int, str], tuple[np.ndarray, np.ndarray]]:
    """Parse the trace CSV into ``{(neuron_id, var): (times, values)}``."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != TRACE_HEADER:
        raise ValueError(f"trace CSV must start with header {TRACE_HEADER!r}")
    series: dict[tuple[int, str], tuple[list, list]] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"line {lineno}: expected 4 columns, got {len(parts)}")
        try:
            t, nid, var, val = float(parts[0]), int(parts[1]), parts[2], float(parts[3])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        ts, vs = series.setdefault((nid, var), ([], []))
        ts.append(t)
        vs.append(val)
    return {k: (np.array(ts), np.array(vs)) for k, (ts, vs) in series.items()}


# --------------------------------------------------------------------------
# Populations
# --------------------------------------------------------------------------


def _stack_params(params: Sequence, names: Sequence[str]) -> dict[str, np.ndarray]:
    return {n: np.array([getattr(p, n) for p in params], dtype=float) for n in names}


class _Population:
    model = ""

    def __init__(self, ids: np.ndarray, params: list):
        self.ids = ids
        self.params = params
        self.reset()

    def reset(self):  # pragma: no cover - abstract
        raise NotImplementedError

    def var(self, name: str) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError


class _ThresholdPop(_Population):
    model = "mcculloch_pitts"

    def reset(self):
        self.theta = np.array([p.theta for p in self.params])

    def step(self, ge, gi, current, pulse, dt, t, now, cfg):
        return (pulse + current) >= self.theta


class _HHPop(_Population):
    model = "hh"

    def reset(self):
        P = _stack_params(self.params, ("C", "gNa_bar", "gK_bar", "gL", "ENa", "EK", "EL"))
        self.p = SimpleNamespace(**P)
        rest = [hh_rest_state(p) for p in self.params]
        self.y = np.array([[r.V, r.n, r.m, r.h] for r in rest], dtype=float).T.copy()

    def step(self, ge, gi, current, pulse, dt, t, now, cfg):
        drive = ge - gi + current
        v_old = self.y[0].copy()
        y = get_stepper(cfg.method)(lambda _t, yy: hh_rhs(yy, self.p, drive), t, self.y, dt)
        y[1:] = np.clip(y[1:], 0.0, 1.0)
        self.y = y
        return (v_old < 50.0) & (y[0] >= 50.0)

    def var(self, name):
        return self.y["Vnmh".index(name)]


class _McGregorPop(_Population):
    model = "mcgregor"

    def reset(self):
        P = _stack_params(self.params, ("Tmem", "TGK", "TTh", "B", "c", "Th0", "EK", "Ei", "Ee"))
        self.p = SimpleNamespace(**P)
        n = len(self.ids)
        self.y = np.vstack([np.zeros(n), np.zeros(n), P["Th0"].copy()])
        self.fired = np.zeros(n, dtype=bool)

    def step(self, ge, gi, current, pulse, dt, t, now, cfg):
        S = self.fired.astype(float)
        E_old, Th_old = self.y[0].copy(), self.y[2].copy()
        y = get_stepper(cfg.method)(lambda _t, yy: mcgregor_rhs(yy, self.p, ge, gi, current, S), t, self.y, dt)
        y[1] = np.maximum(y[1], 0.0)
        self.y = y
        spiked = (E_old < Th_old) & (y[0] >= y[2])
        self.fired = y[0] >= y[2]
        return spiked

    def var(self, name):
        return self.y[("E", "GK", "Th").index(name)]


class _IzhPop(_Population):
    model = "izhikevich"
    bounded = False

    def reset(self):
        P = _stack_params(self.params, ("a", "b", "c", "d"))
        self.a, self.b, self.c, self.d = P["a"], P["b"], P["c"], P["d"]
        self.v = izh_rest_v(self.a, self.b, self.c).astype(float)
        self.u = self.b * self.v
        self.last = np.full(len(self.ids), np.nan)

    def step(self, ge, gi, current, pulse, dt, t, now, cfg):
        dt_min = cfg.refractory.dt_min if self.bounded else None
        I = ge - gi + current
        self.v, self.u, self.last, spiked = izh_population_step(
            self.v, self.u, self.last, self.a, self.b, self.c, self.d, I, dt, now, dt_min
        )
        return spiked

    def var(self, name):
        return self.v if name == "v" else self.u


class _IzhBoundedPop(_IzhPop):
    model = "izhikevich_bounded"
    bounded = True


_POP_CLASSES = {
    c.model: c for c in (_ThresholdPop, _HHPop, _McGregorPop, _IzhPop, _IzhBoundedPop)
}


# --------------------------------------------------------------------------
# Engine
# --------------------------------------------------------------------------


class Engine:
    """A validated network ready to step. Use :func:`build` to construct."""

    def __init__(self, topology: Topology, cfg: SimConfig):
        self.topology = topology
        self.cfg = cfg
        self.n = len(topology.neurons)
        self._validate()
        self._compile()
        self.reset_state()

    # -- construction ------------------------------------------------------

    def _validate(self):
        cfg, n = self.cfg, self.n
        for spec in self.topology.neurons:
            limit = _MAX_DT.get(spec.model)
            if limit is not None and cfg.dt > limit:
                raise ConfigError(f"dt={cfg.dt} exceeds the {limit} ms limit for {spec.model} neurons")
        for i, s in enumerate(self.topology.synapses):
            where = f"synapse {i} ({s.pre}->{s.post})"
            if not (0 <= s.pre < n and 0 <= s.post < n):
                raise ConfigError(f"{where}: endpoint outside 0..{n - 1}")
            if s.pre == s.post and not s.allow_self:
                raise ConfigError(f"{where}: self-loop not flagged with allow_self")
            if not (math.isfinite(s.delay) and s.delay >= 0):
                raise ConfigError(f"{where}: delay must be >= 0, got {s.delay}")
            if not (cfg.bounds.w_min <= s.weight <= cfg.bounds.w_max):
                raise ConfigError(
                    f"{where}: weight {s.weight} outside bounds [{cfg.bounds.w_min}, {cfg.bounds.w_max}]"
                )

    def _compile(self):
        cfg, syns, neurons = self.cfg, self.topology.synapses, self.topology.neurons
        dt = cfg.dt
        self.pre = np.array([s.pre for s in syns], dtype=np.int64)
        self.post = np.array([s.post for s in syns], dtype=np.int64)
        self.w0 = np.array([s.weight for s in syns], dtype=float)
        self.dsteps = np.array([int(round(s.delay / dt)) for s in syns], dtype=np.int64)
        self.delay_ms = self.dsteps * dt
        tau = np.array([s.kernel.tau for s in syns], dtype=float)
        amp = np.array([abs(s.kernel.A) for s in syns], dtype=float)
        sign = np.array([neurons[s.pre].sign for s in syns], dtype=float)
        self.sign = sign
        self.decay = np.exp(-dt / tau)
        self.scale = amp * math.e / tau
        self.excit = sign > 0
        if cfg.plasticity == "off":
            plastic = np.zeros(len(syns), dtype=bool)
        else:
            plastic = np.array(
                [
                    s.plastic if s.plastic is not None else (sign[i] > 0 or cfg.plastic_inhibitory)
                    for i, s in enumerate(syns)
                ],
                dtype=bool,
            )
        self.plastic = plastic
        self.plastic_idx = np.flatnonzero(plastic)
        self.ring = int(self.dsteps.max(initial=0)) + 1
        self.pops = []
        for model in MODELS:
            ids = np.array([i for i, s in enumerate(neurons) if s.model == model], dtype=np.int64)
            if ids.size:
                self.pops.append(_POP_CLASSES[model](ids, [neurons[i].params for i in ids]))
        self._pop_of = {}
        for pop in self.pops:
            for j, nid in enumerate(pop.ids):
                self._pop_of[int(nid)] = (pop, j)

    def reset_state(self, keep_weights: bool = True):
        """Return neurons and synaptic traces to rest; weights survive unless asked."""
        nsyn = len(self.pre)
        if not keep_weights or not hasattr(self, "w"):
            self.w = self.w0.copy()
        self.k = 0
        self.x = np.zeros(nsyn)
        self.y = np.zeros(nsyn)
        self.hist = np.zeros((self.ring, self.n), dtype=bool)
        self.last_arrival = np.full(nsyn, np.nan)
        self.first_after_post = np.full(nsyn, np.nan)
        self.last_post = np.full(self.n, np.nan)
        for pop in self.pops:
            pop.reset()
        self._current = np.zeros(self.n)
        self._forced = np.zeros(self.n, dtype=bool)

    @property
    def t(self) -> float:
        return self.k * self.cfg.dt

    @property
    def weights(self) -> np.ndarray:
        return self.w.copy()

    def set_weights(self, w) -> None:
        w = np.asarray(w, dtype=float)
        if w.shape != self.w.shape:
            raise ConfigError(f"expected {self.w.shape[0]} weights, got {w.shape}")
        if not self.cfg.bounds.contains(w):
            raise ConfigError("weights outside configured bounds")
        self.w = w.copy()

    def set_plastic(self, mask) -> None:
        """Choose which synapses learn; ignored while plasticity is off."""
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != self.w.shape:
            raise ConfigError(f"expected {self.w.shape[0]} plasticity flags, got {mask.shape}")
        if self.cfg.plasticity == "off":
            mask = np.zeros_like(mask)
        self.plastic = mask.copy()
        self.plastic_idx = np.flatnonzero(mask)

    def state_var(self, neuron_id: int, var: str) -> float:
        pop, j = self._pop_of[neuron_id]
        if var not in MODEL_VARS[pop.model]:
            raise ConfigError(f"neuron {neuron_id} ({pop.model}) has no variable {var!r}")
        return float(pop.var(var)[j])

    def synaptic_drive(self) -> tuple[np.ndarray, np.ndarray]:
        """Current ``(excitatory, inhibitory)`` PSP drive per neuron, both >= 0."""
        c = self.w * self.scale * self.y
        ge = np.bincount(self.post[self.excit], weights=c[self.excit], minlength=self.n)
        gi = np.bincount(self.post[~self.excit], weights=c[~self.excit], minlength=self.n)
        return ge, gi

    # -- stepping ----------------------------------------------------------

    def step(self, current: Optional[np.ndarray] = None, forced: Optional[np.ndarray] = None) -> list[SpikeEvent]:
        cfg, dt, k = self.cfg, self.cfg.dt, self.k
        t = k * dt
        now = quantize_time((k + 1) * dt)
        current = self._current if current is None else current
        # arrivals at grid index k (spikes stamped k - delay)
        if self.pre.size:
            arrived = self.hist[(k - self.dsteps) % self.ring, self.pre]
            self.x += arrived
            ge, gi = self.synaptic_drive()
            pulse = np.bincount(self.post, weights=arrived * self.w * self.sign, minlength=self.n)
            if self.plastic_idx.size:
                self._note_arrivals(arrived, quantize_time(t))
        else:
            ge = gi = pulse = np.zeros(self.n)

        spiked = np.zeros(self.n, dtype=bool)
        for pop in self.pops:
            ids = pop.ids
            try:
                s = pop.step(ge[ids], gi[ids], current[ids], pulse[ids], dt, t, now, cfg)
            except NumericError as exc:
                j = exc.component if exc.component is not None and exc.component < len(ids) else 0
                raise exc.with_context(neuron_id=int(ids[j]), t=now, dt=dt) from None
            self._check_finite(pop, now)
            spiked[ids] = s
        if forced is not None:
            spiked |= forced

        # advance synaptic traces to grid index k + 1
        if self.pre.size:
            self.y = self.decay * (self.y + dt * self.x)
            self.x = self.decay * self.x
        self.hist[(k + 1) % self.ring] = spiked
        if self.plastic_idx.size and spiked.any():
            self._apply_plasticity(spiked, now)
        self.k = k + 1
        return [SpikeEvent(int(i), now) for i in np.flatnonzero(spiked)]

    def _check_finite(self, pop, now):
        if pop.model == "mcculloch_pitts":
            return
        primary = pop.var(MODEL_VARS[pop.model][0])
        bad = ~np.isfinite(primary) | (np.abs(primary) > BLOWUP_MV)
        if bad.any():
            j = int(np.flatnonzero(bad)[0])
            raise InstabilityError(
                f"{pop.model} state blew up; reduce dt", neuron_id=int(pop.ids[j]), t=now, dt=self.cfg.dt
            )

    def _note_arrivals(self, arrived, t):
        idx = self.plastic_idx[arrived[self.plastic_idx]]
        if not idx.size:
            return
        self.last_arrival[idx] = t
        fresh = np.isnan(self.first_after_post[idx]) & ~np.isnan(self.last_post[self.post[idx]])
        self.first_after_post[idx[fresh]] = t

    def _apply_plasticity(self, spiked, now):
        idx = self.plastic_idx[spiked[self.post[self.plastic_idx]]]
        if not idx.size:
            return
        rule, b = self.cfg.rule, self.cfg.bounds
        w = self.w[idx]
        d_pot = now - self.last_arrival[idx]
        ok = ~np.isnan(d_pot) & (d_pot <= PAIRING_CUTOFF_MS)
        w = np.where(ok, np.clip(w + rule.delta(np.where(ok, d_pot, 0.0)), b.w_min, b.w_max), w)
        d_dep = self.last_post[self.post[idx]] - self.first_after_post[idx]
        ok = ~np.isnan(d_dep) & (d_dep >= -PAIRING_CUTOFF_MS)
        w = np.where(ok, np.clip(w + rule.delta(np.where(ok, d_dep, 0.0)), b.w_min, b.w_max), w)
        self.w[idx] = w
        self.first_after_post[idx] = np.nan
        self.last_post[np.flatnonzero(spiked)] = now

    # -- running -----------------------------------------------------------

    def _normalize_probes(self, probes) -> list[tuple[int, str]]:
        out = []
        for p in probes or ():
            if isinstance(p, (int, np.integer)):
                nid, names = int(p), None
            else:
                nid, var = p
                names = (var,)
            if not 0 <= nid < self.n:
                raise ConfigError(f"probe references neuron {nid}, network has {self.n}")
            pop, _ = self._pop_of[nid]
            for var in names or MODEL_VARS[pop.model]:
                if var not in MODEL_VARS[pop.model]:
                    raise ConfigError(f"neuron {nid} ({pop.model}) has no variable {var!r}")
                out.append((nid, var))
        return out

    def run(
        self,
        stim: Optional[StimulusProgram] = None,
        probes: Iterable = (),
        duration: Optional[float] = None,
        weight_every: Optional[int] = None,
    ) -> RunResult:
        """Run ``ceil(duration / dt)`` steps from the current state.

        ``probes`` holds neuron ids (all state variables) or ``(id, var)``
        pairs, sampled after every step. ``weight_every`` samples the weight
        vector every that many steps; start and end weights are always kept.
        """
        stim = stim or StimulusProgram()
        dt = self.cfg.dt
        T = self.cfg.duration if duration is None else duration
        steps = n_steps(T, dt)
        bad = [i for i in stim.neurons() if not 0 <= i < self.n]
        if bad:
            raise ConfigError(f"stimulus references neurons {bad} outside 0..{self.n - 1}")
        probe_keys = self._normalize_probes(probes)
        k0 = self.k

        # change points of the piecewise-constant current, as grid indices
        changes = {k0}
        for seg in stim.currents:
            for g in (_grid_index(seg.start, dt), _grid_index(seg.stop, dt)):
                if k0 <= g < k0 + steps:
                    changes.add(g)
        forced_at: dict[int, list[int]] = {}
        for src in stim.spikes:
            for ts in src.times:
                g = max(1, _grid_index(ts, dt))
                forced_at.setdefault(g, []).append(src.neuron)
        rng = np.random.default_rng(self.cfg.seed)
        pois = stim.poisson
        p_nid = np.array([s.neuron for s in pois], dtype=np.int64)
        p_prob = np.array([s.rate_hz * dt / 1000.0 for s in pois])
        p_start = np.array([s.start for s in pois])
        p_stop = np.array([s.stop for s in pois])

        events: list[SpikeEvent] = []
        traces = {key: np.empty(steps) for key in probe_keys}
        times = np.empty(steps)
        w_times, w_hist = [self.t], [self.w.copy()]
        current = np.zeros(self.n)
        for i in range(steps):
            k = self.k
            t = k * dt
            if k in changes:
                current = stim.current_at(t, self.n)
            forced = None
            if k + 1 in forced_at or pois:
                forced = np.zeros(self.n, dtype=bool)
                forced[forced_at.get(k + 1, [])] = True
                if pois:
                    active = (p_start <= t) & (t < p_stop)
                    draws = rng.random(len(pois))
                    forced[p_nid[active & (draws < p_prob)]] = True
            events.extend(self.step(current, forced))
            times[i] = quantize_time(self.t)
            for key in probe_keys:
                traces[key][i] = self.state_var(*key)
            if weight_every and (i + 1) % weight_every == 0 and i + 1 < steps:
                w_times.append(self.t)
                w_hist.append(self.w.copy())
        if steps:
            w_times.append(self.t)
            w_hist.append(self.w.copy())
        self._current = current
        return RunResult(
            raster=Raster(tuple(events)),
            times=times,
            traces=traces,
            weight_times=np.array(w_times),
            weight_history=np.array(w_hist).reshape(len(w_hist), len(self.w)),
        )


def build(topology: Topology, cfg: SimConfig = SimConfig()) -> Engine:
    return Engine(topology, cfg)


def step(engine: Engine) -> list[SpikeEvent]:
    return engine.step()


def run(engine: Engine, stim: Optional[StimulusProgram] = None, probes: Iterable = (), **kw) -> RunResult:
    return engine.run(stim, probes, **kw)
