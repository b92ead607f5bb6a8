"""Spike events, trains, rasters and the pattern-capacity bound."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

# Raster times are stored at microsecond resolution so that the 6-decimal
# CSV form round-trips exactly.
TIME_DECIMALS = 6
RASTER_HEADER = ("t_ms", "neuron_id")


def check_time(t: float, name: str = "t") -> float:
    t = float(t)
    if not math.isfinite(t) or t < 0:
        raise ValueError(f"{name} must be a finite non-negative time in ms, got {t!r}")
    return t


def quantize_time(t: float) -> float:
    return round(float(t), TIME_DECIMALS)


@dataclass(frozen=True, slots=True)
class SpikeEvent:
    neuron_id: int
    t: float

    def __post_init__(self):
        if int(self.neuron_id) != self.neuron_id or self.neuron_id < 0:
            raise ValueError(f"neuron_id must be a non-negative integer, got {self.neuron_id!r}")
        object.__setattr__(self, "neuron_id", int(self.neuron_id))
        object.__setattr__(self, "t", quantize_time(check_time(self.t)))

    @property
    def sort_key(self) -> tuple[float, int]:
        return (self.t, self.neuron_id)


@dataclass(frozen=True, slots=True)
class SpikeTrain:
    """Spike times of a single neuron, strictly increasing."""

    neuron_id: int
    times: tuple[float, ...] = ()

    def __post_init__(self):
        times = tuple(check_time(t) for t in self.times)
        for a, b in zip(times, times[1:]):
            if not b > a:
                raise ValueError(f"spike times must be strictly increasing, got {a} then {b}")
        object.__setattr__(self, "times", times)

    def __len__(self) -> int:
        return len(self.times)


def spike_count(train: SpikeTrain | Sequence[float], t0: float, t1: float) -> int:
    """Number of spikes in the half-open window ``[t0, t1)``."""
    if t0 > t1:
        raise ValueError(f"window start {t0} is after window end {t1}")
    times = train.times if isinstance(train, SpikeTrain) else train
    return sum(1 for t in times if t0 <= t < t1)


def isi_sequence(train: SpikeTrain | Sequence[float]) -> list[float]:
    times = train.times if isinstance(train, SpikeTrain) else list(train)
    return [b - a for a, b in zip(times, times[1:])]


def capacity_bound(n: int) -> int:
    """Largest pattern count P with P < N / (4 ln N), floored.

    >>> capacity_bound(10_000)
    271
    """
    if int(n) != n:
        raise ValueError(f"N must be an integer, got {n!r}")
    n = int(n)
    if n <= 1:
        raise ValueError(f"N must exceed 1 (ln N <= 0 otherwise), got {n}")
    return math.floor(n / (4.0 * math.log(n)))


@dataclass(frozen=True)
class Raster:
    """All spike events of a run, ordered by ``(t, neuron_id)``."""

    events: tuple[SpikeEvent, ...] = field(default_factory=tuple)

    def __post_init__(self):
        evs = tuple(sorted(self.events, key=lambda e: e.sort_key))
        object.__setattr__(self, "events", evs)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[int, float]]) -> "Raster":
        return cls(tuple(SpikeEvent(i, t) for i, t in pairs))

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def neuron_ids(self) -> list[int]:
        return sorted({e.neuron_id for e in self.events})

    def train(self, neuron_id: int) -> SpikeTrain:
        return SpikeTrain(neuron_id, tuple(e.t for e in self.events if e.neuron_id == neuron_id))

    def trains(self) -> dict[int, SpikeTrain]:
        return {i: self.train(i) for i in self.neuron_ids()}

    def counts(self, n_neurons: int | None = None) -> list[int]:
        n = n_neurons if n_neurons is not None else (max(self.neuron_ids(), default=-1) + 1)
        out = [0] * n
        for e in self.events:
            if e.neuron_id < n:
                out[e.neuron_id] += 1
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(RASTER_HEADER) + "\n")
        for e in self.events:
            buf.write(f"{e.t:.{TIME_DECIMALS}f},{e.neuron_id}\n")
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8", newline="")

    @classmethod
    def from_csv(cls, text: str) -> "Raster":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != RASTER_HEADER:
            raise ValueError(f"raster CSV must start with header {','.join(RASTER_HEADER)!r}")
        events = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"line {lineno}: expected 2 columns, got {len(row)}")
            try:
                events.append(SpikeEvent(int(row[1]), float(row[0])))
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
        return cls(tuple(events))

    @classmethod
    def read_csv(cls, path: str | Path) -> "Raster":
        return cls.from_csv(Path(path).read_text(encoding="utf-8"))
