"""Scenario files: an INI document describing a network, its stimulus and run settings.

Example::

    [sim]
    dt = 0.1              # ms
    duration = 100        # ms
    seed = 0
    plasticity = off      # off | stdp | sapr
    method = rk4          # rk4 | euler
    w_min = 0
    w_max = 1
    dt_min = 2            # refractory bound for izhikevich_bounded neurons
    plastic_inhibitory = false
    probes = 2, 0:E       # neuron ids (all variables) or id:var
    weight_every = 0      # sample weights every N steps (0: start and end only)

    [neurons]
    0 = mcgregor excitatory
    1 = mcgregor inhibitory Th0=12
    2-4 = izhikevich excitatory a=0.02 d=8

    [synapses]
    0 -> 2 = 0.35                         # weight
    1 -> 2 = 0.2 delay=1 A=1 tau=2 plastic=false

    [stimulus]
    0 = current 20
    1 = current 17 start=0 stop=50; current 5 start=50
    3 = poisson 40 start=10
    4 = spikes 5 12.5 30

Neuron keys are ids or inclusive ranges and must cover 0..N-1. Extra
``key=value`` tokens on a neuron line set fields of that model's parameter
record. Synapse options default to delay 1 ms and the alpha kernel A=1,
tau=2 ms. Stimulus entries are separated by ``;``.
"""

from __future__ import annotations

import configparser
import math
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .network import DEFAULT_PARAMS, MODELS, POLARITIES, SimConfig, StimulusProgram, Topology
from .network import CurrentSegment, NeuronSpec, PoissonSource, SpikeSource, Synapse
from .neurons import RefractoryConfig, ThresholdUnit
from .plasticity import AlphaKernel, WeightBounds

SECTIONS = ("sim", "neurons", "synapses", "stimulus")
SIM_KEYS = (
    "dt",
    "duration",
    "seed",
    "plasticity",
    "method",
    "w_min",
    "w_max",
    "dt_min",
    "plastic_inhibitory",
    "probes",
    "weight_every",
)
_SYN_KEY = re.compile(r"^\s*(\d+)\s*->\s*(\d+)\s*$")
_RANGE_KEY = re.compile(r"^\s*(\d+)\s*(?:-\s*(\d+))?\s*$")


@dataclass
class Scenario:
    topology: Topology
    sim: SimConfig
    stimulus: StimulusProgram
    probes: list
    weight_every: Optional[int] = None


class _Locator:
    """Maps ``(section, key)`` to a 1-based line number of the source text."""

    def __init__(self, text: str):
        self.lines: dict[tuple[str, str], int] = {}
        section = None
        for i, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line[0] in "#;":
                continue
            m = re.match(r"^\[([^\]]+)\]", line)
            if m:
                section = m.group(1).strip()
                continue
            if section is not None and "=" in line:
                key = line.split("=", 1)[0].strip()
                self.lines.setdefault((section, key), i)

    def where(self, section: str, key: str) -> str:
        line = self.lines.get((section, key))
        at = f"line {line}: " if line else ""
        return f"{at}[{section}] {key}"


def _num(text: str, what: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"{what}: expected a number, got {text!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{what}: value must be finite, got {text!r}")
    return v


def _int(text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{what}: expected an integer, got {text!r}") from None


def _bool(text: str, what: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{what}: expected true/false, got {text!r}")


def _options(tokens: list[str], what: str) -> dict[str, str]:
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise ConfigError(f"{what}: expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        if k in out:
            raise ConfigError(f"{what}: option {k!r} given twice")
        out[k] = v
    return out


def _neuron_params(model: str, opts: dict[str, str], what: str):
    base = DEFAULT_PARAMS[model]
    if model == "mcculloch_pitts":
        extra = set(opts) - {"theta"}
        if extra:
            raise ConfigError(f"{what}: unknown parameter(s) {sorted(extra)} for {model}")
        return ThresholdUnit((), _num(opts.get("theta", str(base.theta)), f"{what} theta"))
    names = {f.name for f in fields(base)}
    extra = set(opts) - names
    if extra:
        raise ConfigError(f"{what}: unknown parameter(s) {sorted(extra)} for {model}; known: {sorted(names)}")
    try:
        return replace(base, **{k: _num(v, f"{what} {k}") for k, v in opts.items()})
    except ValueError as exc:
        raise ConfigError(f"{what}: {exc}") from None


def _parse_neurons(cp, loc) -> list[NeuronSpec]:
    specs: dict[int, NeuronSpec] = {}
    for key, value in cp.items("neurons"):
        what = loc.where("neurons", key)
        m = _RANGE_KEY.match(key)
        if not m:
            raise ConfigError(f"{what}: key must be an id or an id range like 2-5")
        lo = int(m.group(1))
        hi = int(m.group(2)) if m.group(2) else lo
        if hi < lo:
            raise ConfigError(f"{what}: empty range")
        tokens = value.split()
        if len(tokens) < 2:
            raise ConfigError(f"{what}: expected '<model> <polarity> [key=value ...]'")
        model, polarity = tokens[0], tokens[1]
        if model not in MODELS:
            raise ConfigError(f"{what}: unknown model {model!r}; expected one of {MODELS}")
        if polarity not in POLARITIES:
            raise ConfigError(f"{what}: polarity must be one of {POLARITIES}, got {polarity!r}")
        params = _neuron_params(model, _options(tokens[2:], what), what)
        for i in range(lo, hi + 1):
            if i in specs:
                raise ConfigError(f"{what}: neuron {i} defined twice")
            specs[i] = NeuronSpec(model, params, polarity)
    missing = sorted(set(range(len(specs))) - set(specs))
    if missing or (specs and max(specs) != len(specs) - 1):
        raise ConfigError(f"[neurons] ids must run 0..N-1 without gaps; missing {missing or 'ids below the max'}")
    return [specs[i] for i in range(len(specs))]


def _parse_synapses(cp, loc) -> list[Synapse]:
    out = []
    if not cp.has_section("synapses"):
        return out
    for key, value in cp.items("synapses"):
        what = loc.where("synapses", key)
        m = _SYN_KEY.match(key)
        if not m:
            raise ConfigError(f"{what}: key must look like 'pre -> post'")
        tokens = value.split()
        if not tokens:
            raise ConfigError(f"{what}: missing weight")
        opts = _options(tokens[1:], what)
        extra = set(opts) - {"delay", "A", "tau", "plastic", "allow_self"}
        if extra:
            raise ConfigError(f"{what}: unknown option(s) {sorted(extra)}")
        try:
            kernel = AlphaKernel(_num(opts.get("A", "1"), f"{what} A"), _num(opts.get("tau", "2"), f"{what} tau"))
        except ValueError as exc:
            raise ConfigError(f"{what}: {exc}") from None
        out.append(
            Synapse(
                int(m.group(1)),
                int(m.group(2)),
                _num(tokens[0], f"{what} weight"),
                _num(opts.get("delay", "1"), f"{what} delay"),
                kernel,
                _bool(opts["plastic"], f"{what} plastic") if "plastic" in opts else None,
                _bool(opts.get("allow_self", "false"), f"{what} allow_self"),
            )
        )
    return out


def _parse_stimulus(cp, loc) -> StimulusProgram:
    currents, poisson, spikes = [], [], []
    if not cp.has_section("stimulus"):
        return StimulusProgram()
    for key, value in cp.items("stimulus"):
        what = loc.where("stimulus", key)
        nid = _int(key, what)
        for entry in filter(None, (e.strip() for e in value.split(";"))):
            tokens = entry.split()
            kind = tokens[0]
            if kind == "spikes":
                times = tuple(_num(t, f"{what} spike time") for t in tokens[1:])
                if any(t < 0 for t in times):
                    raise ConfigError(f"{what}: spike times must be >= 0")
                spikes.append(SpikeSource(nid, times))
                continue
            if kind not in ("current", "poisson") or len(tokens) < 2:
                raise ConfigError(f"{what}: expected 'current AMP', 'poisson RATE' or 'spikes T...', got {entry!r}")
            opts = _options(tokens[2:], what)
            extra = set(opts) - {"start", "stop"}
            if extra:
                raise ConfigError(f"{what}: unknown option(s) {sorted(extra)}")
            start = _num(opts.get("start", "0"), f"{what} start")
            stop = _num(opts["stop"], f"{what} stop") if "stop" in opts else math.inf
            amount = _num(tokens[1], f"{what} {kind}")
            if kind == "current":
                currents.append(CurrentSegment(nid, start, stop, amount))
            else:
                poisson.append(PoissonSource(nid, amount, start, stop))
    try:
        return StimulusProgram(currents, poisson, spikes)
    except ConfigError as exc:
        raise ConfigError(f"[stimulus] {exc}") from None


def _parse_probes(text: str, what: str) -> list:
    out = []
    for tok in filter(None, (t.strip() for t in text.split(","))):
        if ":" in tok:
            nid, var = tok.split(":", 1)
            out.append((_int(nid, what), var.strip()))
        else:
            out.append(_int(tok, what))
    return out


def _parse_sim(cp, loc, overrides: dict):
    sec = cp["sim"] if cp.has_section("sim") else {}
    extra = set(sec) - set(SIM_KEYS)
    if extra:
        k = sorted(extra)[0]
        raise ConfigError(f"{loc.where('sim', k)}: unknown key; known keys: {', '.join(SIM_KEYS)}")

    def get(key, conv, default):
        if overrides.get(key) is not None:
            return overrides[key]
        return conv(sec[key], loc.where("sim", key)) if key in sec else default

    try:
        bounds = WeightBounds(get("w_min", _num, 0.0), get("w_max", _num, 1.0))
        refractory = RefractoryConfig(get("dt_min", _num, 2.0))
        sim = SimConfig(
            dt=get("dt", _num, 0.1),
            duration=get("duration", _num, 100.0),
            seed=get("seed", _int, 0),
            plasticity=get("plasticity", lambda s, w: s.strip(), "off"),
            bounds=bounds,
            plastic_inhibitory=get("plastic_inhibitory", _bool, False),
            refractory=refractory,
            method=get("method", lambda s, w: s.strip(), "rk4"),
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[sim] {exc}") from None
    probes = _parse_probes(sec["probes"], loc.where("sim", "probes")) if "probes" in sec else []
    every = get("weight_every", _int, 0)
    if every < 0:
        raise ConfigError(f"{loc.where('sim', 'weight_every')}: must be >= 0")
    return sim, probes, every or None


def parse_scenario(text: str, overrides: Optional[dict] = None) -> Scenario:
    """Parse scenario text; ``overrides`` (dt, duration, seed, plasticity) win over [sim]."""
    cp = configparser.ConfigParser(
        interpolation=None, delimiters=("=",), inline_comment_prefixes=("#",), comment_prefixes=("#", ";"), strict=True
    )
    cp.optionxform = str  # keep parameter names like Th0 intact
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    loc = _Locator(text)
    unknown = [s for s in cp.sections() if s not in SECTIONS]
    if unknown:
        raise ConfigError(f"unknown section [{unknown[0]}]; expected {', '.join(f'[{s}]' for s in SECTIONS)}")
    if not cp.has_section("neurons"):
        raise ConfigError("config needs a [neurons] section")
    neurons = _parse_neurons(cp, loc)
    synapses = _parse_synapses(cp, loc)
    stimulus = _parse_stimulus(cp, loc)
    sim, probes, every = _parse_sim(cp, loc, overrides or {})
    return Scenario(Topology(neurons, synapses), sim, stimulus, probes, every)


def load_scenario(path, overrides: Optional[dict] = None) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_scenario(text, overrides)
