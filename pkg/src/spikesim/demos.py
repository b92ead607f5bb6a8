"""Canned scenarios behind ``spikesim demo``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import isi_sequence
from .network import NeuronSpec, RunResult, SimConfig, StimulusProgram, Synapse, Topology, build
from .neurons import (
    IZH_REGIMES,
    RefractoryConfig,
    izh_initial_state,
    izh_params_from_gamma,
    simulate_izhikevich,
)
from .recognition.digit2 import FIXTURES, load_fixture, mp_digit2_network

# Three McGregor neurons: 0 excitatory and 1 inhibitory, both onto 2.
FIG5_DRIVE = {0: 20.0, 1: 17.0}
FIG5_EXC_WEIGHT = 0.35
FIG5_INH_WEIGHT = 0.2
FIG5_DURATION = 100.0
FIG5_POST = 2


def fig5_topology(exc_weight: float = FIG5_EXC_WEIGHT, inh_weight: float = FIG5_INH_WEIGHT) -> Topology:
    topo = Topology()
    topo.add_neuron(NeuronSpec("mcgregor", polarity="excitatory"))
    topo.add_neuron(NeuronSpec("mcgregor", polarity="inhibitory"))
    topo.add_neuron(NeuronSpec("mcgregor", polarity="excitatory"))
    topo.add_synapse(Synapse(0, FIG5_POST, exc_weight))
    topo.add_synapse(Synapse(1, FIG5_POST, inh_weight))
    return topo


def run_fig5(
    inh_weight: float = FIG5_INH_WEIGHT, dt: float = 0.1, duration: float = FIG5_DURATION, seed: int = 0
) -> RunResult:
    engine = build(fig5_topology(inh_weight=inh_weight), SimConfig(dt=dt, duration=duration, seed=seed))
    return engine.run(StimulusProgram.constant(FIG5_DRIVE), probes=[0, 1, 2])


def fig5_post_spikes(inh_weight: float = FIG5_INH_WEIGHT, **kw) -> int:
    return run_fig5(inh_weight, **kw).raster.counts(3)[FIG5_POST]


def digit2_outputs() -> dict[str, int]:
    net = mp_digit2_network()
    return {name: net(load_fixture(name)) for name in FIXTURES}


@dataclass(frozen=True)
class RegimeRun:
    name: str
    kind: str
    gamma: float
    current: float
    duration: float
    spikes: tuple[float, ...]

    @property
    def rate_hz(self) -> float:
        return 1000.0 * len(self.spikes) / self.duration

    @property
    def isis(self) -> list[float]:
        return isi_sequence(list(self.spikes))


def izhi_regimes(current: float = 10.0, duration: float = 500.0, dt: float = 0.1) -> list[RegimeRun]:
    """Each corner of the parameter table under the same constant current."""
    out = []
    for name, (kind, gamma) in IZH_REGIMES.items():
        p = izh_params_from_gamma(kind, gamma)
        spikes = simulate_izhikevich(p, current, duration, dt, state=izh_initial_state(p))
        out.append(RegimeRun(name, kind, gamma, current, duration, tuple(spikes)))
    return out


REFRACTORY_CURRENTS = (5.0, 10.0, 20.0, 40.0, 80.0, 160.0)


@dataclass(frozen=True)
class RefractoryRow:
    current: float
    model: str  # "original" or "bounded"
    n_spikes: int
    min_isi: float  # nan with fewer than two spikes


def refractory_sweep(
    currents=REFRACTORY_CURRENTS, duration: float = 500.0, dt: float = 0.1, dt_min: float = 2.0
) -> list[RefractoryRow]:
    """Regular-spiking neuron with and without the refractory bound."""
    p = izh_params_from_gamma("excitatory", 0.0)
    rows = []
    for current in currents:
        for model, refr in (("original", None), ("bounded", RefractoryConfig(dt_min))):
            spikes = simulate_izhikevich(p, current, duration, dt, refr, izh_initial_state(p))
            isis = isi_sequence(spikes)
            rows.append(RefractoryRow(current, model, len(spikes), min(isis) if isis else math.nan))
    return rows


def min_isi(rows, model: str) -> float:
    vals = [r.min_isi for r in rows if r.model == model and not np.isnan(r.min_isi)]
    return min(vals) if vals else math.nan
