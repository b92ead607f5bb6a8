"""Deterministic SVG figures for rasters, traces and plasticity windows."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .core import RASTER_HEADER, Raster  # noqa: E402
from .errors import ConfigError  # noqa: E402
from .network import TRACE_HEADER, read_traces_csv  # noqa: E402
from .plasticity import KERNEL_HEADER  # noqa: E402

PathLike = Union[str, Path]
PLOT_KINDS = ("raster", "trace", "kernel")
FIGSIZE = (6.4, 3.6)

# Byte-stable output: fixed element ids, text kept as text, no timestamp.
_RC = {
    "svg.hashsalt": "spikesim",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "path.simplify": False,
}
_SAVE = {"format": "svg", "metadata": {"Date": None}}


def _save(fig, path: PathLike) -> Path:
    path = Path(path)
    fig.savefig(path, **_SAVE)
    plt.close(fig)
    return path


def raster_figure(raster: Raster, t_max: float | None = None, n_neurons: int | None = None):
    """One vertical tick per spike; x is time, y is neuron id."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ts = np.array([e.t for e in raster.events], dtype=float)
    ids = np.array([e.neuron_id for e in raster.events], dtype=float)
    if t_max is None:
        t_max = float(ts.max()) if ts.size else 1.0
    top = n_neurons if n_neurons is not None else (int(ids.max()) + 1 if ids.size else 1)
    ticks = ax.vlines(ts, ids - 0.4, ids + 0.4, colors="black", linewidth=1.0)
    ticks.set_gid("spikes")
    ax.set_xlim(0.0, max(t_max, 1e-9))
    ax.set_ylim(-0.5, top - 0.5)
    ax.set_xlabel("time (ms)")
    ax.set_ylabel("neuron")
    fig.tight_layout()
    return fig, ax


def trace_figure(traces: dict[tuple[int, str], tuple[np.ndarray, np.ndarray]]):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for (nid, var), (t, v) in sorted(traces.items()):
        (line,) = ax.plot(t, v, linewidth=1.0, label=f"{nid}:{var}")
        line.set_gid(f"trace-{nid}-{var}")
    if traces:
        ax.legend(loc="upper right", fontsize="small")
    ax.set_xlabel("time (ms)")
    ax.set_ylabel("value")
    fig.tight_layout()
    return fig, ax


def kernel_figure(dts, stdp, sapr):
    fig, ax = plt.subplots(figsize=FIGSIZE)
    (a,) = ax.plot(dts, stdp, linewidth=1.0, label="STDP")
    (b,) = ax.plot(dts, sapr, linewidth=1.0, label="SAPR")
    a.set_gid("kernel-stdp")
    b.set_gid("kernel-sapr")
    ax.axhline(0.0, color="grey", linewidth=0.5)
    ax.set_xlabel("t_post - t_pre (ms)")
    ax.set_ylabel("weight change")
    ax.legend(loc="upper right", fontsize="small")
    fig.tight_layout()
    return fig, ax


def write_raster_svg(path: PathLike, raster: Raster, t_max=None, n_neurons=None) -> Path:
    with plt.rc_context(_RC):
        fig, _ = raster_figure(raster, t_max, n_neurons)
        return _save(fig, path)


def write_trace_svg(path: PathLike, traces) -> Path:
    with plt.rc_context(_RC):
        fig, _ = trace_figure(traces)
        return _save(fig, path)


def write_kernel_svg(path: PathLike, dts, stdp, sapr) -> Path:
    with plt.rc_context(_RC):
        fig, _ = kernel_figure(dts, stdp, sapr)
        return _save(fig, path)


def read_kernels_csv(text: str):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or ",".join(rows[0]) != KERNEL_HEADER:
        raise ConfigError(f"kernel CSV must start with header {KERNEL_HEADER!r}")
    try:
        data = np.array([[float(x) for x in r] for r in rows[1:] if r], dtype=float).reshape(-1, 3)
    except ValueError as exc:
        raise ConfigError(f"kernel CSV: {exc}") from None
    return data[:, 0], data[:, 1], data[:, 2]


def emit_plot(csv_path: PathLike, kind: str, svg_path: PathLike) -> Path:
    """Render a CSV produced by this package to SVG; schema problems raise ConfigError."""
    if kind not in PLOT_KINDS:
        raise ConfigError(f"plot kind must be one of {PLOT_KINDS}, got {kind!r}")
    try:
        text = Path(csv_path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"cannot read {csv_path}: {exc}") from None
    header = text.splitlines()[0].strip() if text.strip() else ""
    if kind == "raster":
        if header != ",".join(RASTER_HEADER):
            raise ConfigError(f"raster CSV must start with header {','.join(RASTER_HEADER)!r}")
        try:
            raster = Raster.from_csv(text)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return write_raster_svg(svg_path, raster)
    if kind == "trace":
        if header != TRACE_HEADER:
            raise ConfigError(f"trace CSV must start with header {TRACE_HEADER!r}")
        try:
            traces = read_traces_csv(text)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return write_trace_svg(svg_path, traces)
    return write_kernel_svg(svg_path, *read_kernels_csv(text))
