"""Spiking recognizer: sensory relay, E/I feature layer, one output per label.

All neurons are McGregor units. The sensory layer upsamples each pixel to a
3x3 block of relay neurons driven by a constant current proportional to the
pixel value. Each excitatory feature neuron reads one pixel's block; the
inhibitory neurons pool all excitatory ones and feed back to all of them.
Excitatory feature neurons within ``recurrence_radius`` are coupled. The
recognition layer has one neuron per training image, fed by every
excitatory feature neuron.

Training has two unsupervised phases driven by the configured pairing rule.
Phase one self-organizes the sensory-to-feature synapses while the recurrent
and E/I couplings stay fixed. Phase two adapts only the feature-to-output
synapses: image ``L`` is presented while every other output neuron receives
a steady depolarizing bias. Their firing is then not caused by the feature
spikes, and a rule whose depression lobe outweighs its potentiation lobe
(SAPR at its defaults) prunes their synapses from the active features.
Output ``L`` fires only from its inputs, so its pairings are causal and its
weights settle where the two lobes balance.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..network import CurrentSegment, Engine, NeuronSpec, SimConfig, StimulusProgram, Synapse, Topology
from ..plasticity import WeightBounds
from .images import Image

UPSCALE = 3
NO_WINNER = -1
MAGIC = b"SRN1"


@dataclass(frozen=True)
class SpikingRecognizerConfig:
    upscale: int = UPSCALE
    ei_ratio: float = 0.8
    recurrence_radius: int = 1
    rule: str = "sapr"
    epsilon: float = 1e-3
    max_epochs: int = 50
    presentation_ms: float = 200.0
    dt: float = 0.2
    gain: float = 20.0  # sensory drive for a fully lit pixel
    rival_bias: float = 15.0  # drive on the non-target outputs while training
    seed: int = 0
    w_sensory: tuple[float, float] = (0.2, 0.4)  # initial weight ranges
    w_recurrent: tuple[float, float] = (0.0, 0.05)
    w_output: tuple[float, float] = (0.05, 0.15)
    w_ei: float = 0.2
    w_ie: float = 0.3
    plastic_recurrent: bool = False

    def __post_init__(self):
        if self.upscale != UPSCALE:
            raise ValueError(f"upscale is fixed at {UPSCALE}")
        if not 0 < self.ei_ratio < 1:
            raise ValueError(f"ei_ratio must lie in (0, 1), got {self.ei_ratio}")
        if self.recurrence_radius < 0:
            raise ValueError("recurrence_radius must be >= 0")
        if self.rule not in ("stdp", "sapr", "off"):
            raise ValueError(f"rule must be stdp, sapr or off, got {self.rule!r}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be > 0")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not self.presentation_ms > 0:
            raise ValueError("presentation_ms must be > 0")


@dataclass(frozen=True)
class Layout:
    """Neuron id ranges of each layer for an ``h x w`` input."""

    h: int
    w: int
    n_inhibitory: int
    n_labels: int

    @property
    def n_sensory(self) -> int:
        return UPSCALE * UPSCALE * self.h * self.w

    @property
    def n_excitatory(self) -> int:
        return self.h * self.w

    def sensory(self, r: int, c: int) -> int:
        return r * UPSCALE * self.w + c

    def excitatory(self, r: int, c: int) -> int:
        return self.n_sensory + r * self.w + c

    def inhibitory(self, i: int) -> int:
        return self.n_sensory + self.n_excitatory + i

    def output(self, label: int) -> int:
        return self.n_sensory + self.n_excitatory + self.n_inhibitory + label

    @property
    def n_neurons(self) -> int:
        return self.output(self.n_labels)


def n_inhibitory(n_excitatory: int, ei_ratio: float) -> int:
    return max(1, int(round(n_excitatory * (1.0 - ei_ratio) / ei_ratio)))


def sensory_encode(img: Image, gain: float = 20.0, duration: float = 200.0) -> StimulusProgram:
    """Each pixel drives a 3x3 block of relay neurons with ``gain * pixel``.

    Neuron ids run row-major over the ``3h x 3w`` sensory grid.
    """
    W = UPSCALE * img.width
    segs = []
    for r in range(UPSCALE * img.height):
        for c in range(W):
            segs.append(CurrentSegment(r * W + c, 0.0, duration, gain * float(img.pixels[r // UPSCALE, c // UPSCALE])))
    return StimulusProgram(segs)


def build_topology(cfg: SpikingRecognizerConfig, shape: tuple[int, int], n_labels: int) -> tuple[Topology, Layout]:
    h, w = shape
    lay = Layout(h, w, n_inhibitory(h * w, cfg.ei_ratio), n_labels)
    rng = np.random.default_rng(cfg.seed)
    topo = Topology()
    for _ in range(lay.n_sensory + lay.n_excitatory):
        topo.add_neuron(NeuronSpec("mcgregor"))
    for _ in range(lay.n_inhibitory):
        topo.add_neuron(NeuronSpec("mcgregor", polarity="inhibitory"))
    for _ in range(n_labels):
        topo.add_neuron(NeuronSpec("mcgregor"))

    def uniform(lo_hi):
        return float(rng.uniform(*lo_hi))

    for r in range(h):
        for c in range(w):
            e = lay.excitatory(r, c)
            for dr in range(UPSCALE):
                for dc in range(UPSCALE):
                    s = lay.sensory(UPSCALE * r + dr, UPSCALE * c + dc)
                    topo.add_synapse(Synapse(s, e, uniform(cfg.w_sensory)))
    R = cfg.recurrence_radius
    for r in range(h):
        for c in range(w):
            for rr in range(max(0, r - R), min(h, r + R + 1)):
                for cc in range(max(0, c - R), min(w, c + R + 1)):
                    if (rr, cc) != (r, c):
                        topo.add_synapse(Synapse(lay.excitatory(r, c), lay.excitatory(rr, cc), uniform(cfg.w_recurrent)))
    for e in range(lay.n_excitatory):
        for i in range(lay.n_inhibitory):
            topo.add_synapse(Synapse(lay.n_sensory + e, lay.inhibitory(i), cfg.w_ei))
            topo.add_synapse(Synapse(lay.inhibitory(i), lay.n_sensory + e, cfg.w_ie))
    for e in range(lay.n_excitatory):
        for label in range(n_labels):
            topo.add_synapse(Synapse(lay.n_sensory + e, lay.output(label), uniform(cfg.w_output)))
    return topo, lay


@dataclass
class SpikingRecognizer:
    cfg: SpikingRecognizerConfig
    layout: Layout
    weights: np.ndarray
    feature_epochs: int = 0
    output_epochs: int = 0
    history: list = field(default_factory=list)  # mean |dw| per epoch, both phases

    @property
    def shape(self) -> tuple[int, int]:
        return self.layout.h, self.layout.w

    def engine(self, plasticity: str = "off") -> Engine:
        topo, _ = build_topology(self.cfg, self.shape, self.layout.n_labels)
        sim = SimConfig(dt=self.cfg.dt, duration=self.cfg.presentation_ms, seed=self.cfg.seed, plasticity=plasticity)
        eng = Engine(topo, sim)
        eng.set_weights(self.weights)
        return eng


def _present(eng: Engine, stim: StimulusProgram, duration: float):
    eng.reset_state(keep_weights=True)
    return eng.run(stim, duration=duration)


def _with_bias(stim: StimulusProgram, neurons: Sequence[int], amp: float, duration: float) -> StimulusProgram:
    return StimulusProgram(list(stim.currents) + [CurrentSegment(n, 0.0, duration, amp) for n in neurons])


def _train_phase(eng, stims, mask, cfg) -> tuple[int, list[float]]:
    eng.set_plastic(mask)
    idx = np.flatnonzero(mask)
    hist = []
    for epoch in range(1, cfg.max_epochs + 1):
        before = eng.weights
        for stim in stims:
            _present(eng, stim, cfg.presentation_ms)
        change = float(np.mean(np.abs(eng.weights[idx] - before[idx]))) if idx.size else 0.0
        hist.append(change)
        if change < cfg.epsilon:
            return epoch, hist
    return cfg.max_epochs, hist


def self_organize(cfg: SpikingRecognizerConfig, images: Sequence[Image]) -> SpikingRecognizer:
    """Train on ``images``; recognition neuron ``L`` learns image ``L``."""
    if not images:
        raise ValueError("no training images")
    shapes = {img.shape for img in images}
    if len(shapes) != 1:
        raise ValueError(f"images must all have the same size, got {sorted(shapes)}")
    shape = shapes.pop()
    topo, lay = build_topology(cfg, shape, len(images))
    plasticity = "off" if cfg.rule == "off" else cfg.rule
    sim = SimConfig(
        dt=cfg.dt, duration=cfg.presentation_ms, seed=cfg.seed, plasticity=plasticity, bounds=WeightBounds(0.0, 1.0)
    )
    eng = Engine(topo, sim)
    post = eng.post
    excit = eng.excit
    to_output = post >= lay.output(0)
    feature_mask = excit & ~to_output & (post < lay.inhibitory(0))
    if not cfg.plastic_recurrent:
        feature_mask &= eng.pre < lay.n_sensory
    stims = [sensory_encode(img, cfg.gain, cfg.presentation_ms) for img in images]
    f_epochs, f_hist = _train_phase(eng, stims, feature_mask, cfg)
    outs = [lay.output(L) for L in range(lay.n_labels)]
    teach = [_with_bias(s, outs[:L] + outs[L + 1 :], cfg.rival_bias, cfg.presentation_ms) for L, s in enumerate(stims)]
    o_epochs, o_hist = _train_phase(eng, teach, excit & to_output, cfg)
    return SpikingRecognizer(cfg, lay, eng.weights, f_epochs, o_epochs, f_hist + o_hist)


def winner(counts) -> int:
    """Index of the largest count, lowest index on ties, ``NO_WINNER`` if all zero."""
    counts = np.asarray(counts)
    if counts.size == 0 or not np.any(counts > 0):
        return NO_WINNER
    return int(np.argmax(counts))


def spiking_recognize(
    net: SpikingRecognizer, img: Image, presentation_ms: Optional[float] = None, engine: Optional[Engine] = None
) -> tuple[int, np.ndarray]:
    if img.shape != net.shape:
        raise ValueError(f"expected a {net.shape} image, got {img.shape}")
    T = net.cfg.presentation_ms if presentation_ms is None else presentation_ms
    eng = engine or net.engine()
    res = _present(eng, sensory_encode(img, net.cfg.gain, T), T)
    lay = net.layout
    counts = np.zeros(lay.n_labels, dtype=int)
    for ev in res.raster.events:
        if ev.neuron_id >= lay.output(0):
            counts[ev.neuron_id - lay.output(0)] += 1
    return winner(counts), counts


def accuracy(net: SpikingRecognizer, images: Sequence[Image], labels: Sequence[int]) -> float:
    eng = net.engine()
    hits = sum(spiking_recognize(net, img, engine=eng)[0] == y for img, y in zip(images, labels))
    return hits / len(images) if images else 0.0


def compare_rules(cfg: SpikingRecognizerConfig, images: Sequence[Image]) -> dict[str, dict]:
    """Train once per rule and report epochs and training-set accuracy."""
    report = {}
    for rule in ("sapr", "stdp"):
        net = self_organize(replace(cfg, rule=rule), images)
        report[rule] = {
            "feature_epochs": net.feature_epochs,
            "output_epochs": net.output_epochs,
            "accuracy": accuracy(net, images, list(range(len(images)))),
        }
    return report


# -- persistence --------------------------------------------------------------
# Layout (little-endian): magic "SRN1"; u32 height, width, n_inhibitory,
# n_labels, recurrence_radius, max_epochs, feature_epochs, output_epochs,
# seed; u8 rule (0 off, 1 stdp, 2 sapr); u8 plastic_recurrent; f64 ei_ratio, epsilon,
# presentation_ms, dt, gain, rival_bias, w_sensory lo/hi, w_recurrent lo/hi,
# w_output lo/hi, w_ei, w_ie; u32 n_weights; f64[n_weights] weights.

_RULES = ("off", "stdp", "sapr")
_HEAD = "<9I2B14d"


def dumps(net: SpikingRecognizer) -> bytes:
    c, lay = net.cfg, net.layout
    head = struct.pack(
        _HEAD,
        lay.h,
        lay.w,
        lay.n_inhibitory,
        lay.n_labels,
        c.recurrence_radius,
        c.max_epochs,
        net.feature_epochs,
        net.output_epochs,
        c.seed,
        _RULES.index(c.rule),
        int(c.plastic_recurrent),
        c.ei_ratio,
        c.epsilon,
        c.presentation_ms,
        c.dt,
        c.gain,
        c.rival_bias,
        *c.w_sensory,
        *c.w_recurrent,
        *c.w_output,
        c.w_ei,
        c.w_ie,
    )
    w = np.asarray(net.weights, dtype="<f8")
    return MAGIC + head + struct.pack("<I", w.size) + w.tobytes()


def loads(data: bytes) -> SpikingRecognizer:
    if not data.startswith(MAGIC):
        raise ValueError("not an SRN1 model file")
    at = len(MAGIC)
    size = struct.calcsize(_HEAD) + 4
    if len(data) < at + size:
        raise ValueError("truncated SRN1 model file")
    v = struct.unpack_from(_HEAD, data, at)
    (n_w,) = struct.unpack_from("<I", data, at + size - 4)
    body = data[at + size :]
    if len(body) != 8 * n_w:
        raise ValueError("SRN1 weight block has the wrong length")
    h, w, n_inh, n_labels, radius, max_epochs, f_ep, o_ep, seed, rule, plastic_rec = v[:11]
    ei, eps, pres, dt, gain, rival_bias, s0, s1, r0, r1, o0, o1, w_ei, w_ie = v[11:]
    if rule >= len(_RULES) or plastic_rec > 1:
        raise ValueError(f"bad rule code {rule} or recurrence flag {plastic_rec} in SRN1 model file")
    cfg = SpikingRecognizerConfig(
        ei_ratio=ei,
        recurrence_radius=radius,
        rule=_RULES[rule],
        epsilon=eps,
        max_epochs=max_epochs,
        presentation_ms=pres,
        dt=dt,
        gain=gain,
        rival_bias=rival_bias,
        seed=seed,
        w_sensory=(s0, s1),
        w_recurrent=(r0, r1),
        w_output=(o0, o1),
        w_ei=w_ei,
        w_ie=w_ie,
        plastic_recurrent=bool(plastic_rec),
    )
    lay = Layout(h, w, n_inh, n_labels)
    if lay.n_inhibitory != n_inhibitory(h * w, ei):
        raise ValueError("SRN1 inhibitory count disagrees with its ei_ratio")
    return SpikingRecognizer(cfg, lay, np.frombuffer(body, dtype="<f8").astype(float), f_ep, o_ep)


def save_model(path, net: SpikingRecognizer) -> None:
    Path(path).write_bytes(dumps(net))


def load_model(path) -> SpikingRecognizer:
    return loads(Path(path).read_bytes())
