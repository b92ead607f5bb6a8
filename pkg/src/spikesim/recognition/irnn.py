"""Windowed leader-clustering hierarchy with a supervised associative layer.

Level 1 clusters raw pixel windows separately at each window position.
Each higher level sees a grid whose cells are one-hot codes of the nearest
cluster at the level below, and clusters windows of those codes. The top
level's codes, concatenated over all positions, feed one associative weight
row per label.
"""

from __future__ import annotations

import copy
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Hashable, Optional, Sequence

import numpy as np

from ..plasticity import WtaRule, wta_winner
from .images import Image

MAGIC = b"IRNN1"


@dataclass(frozen=True)
class WindowSpec:
    k: int
    s: int = 1

    def __post_init__(self):
        if self.k < 1 or self.s < 1:
            raise ValueError(f"window side and stride must be >= 1, got k={self.k}, s={self.s}")

    def grid(self, height: int, width: int) -> tuple[int, int]:
        if self.k > min(height, width):
            raise ValueError(f"window side {self.k} exceeds the {height}x{width} input")
        return (height - self.k) // self.s + 1, (width - self.k) // self.s + 1


def _cell_windows(cells: list[list[np.ndarray]], spec: WindowSpec):
    """Raster-order windows over a grid of cell vectors, concatenated row-major."""
    gh, gw = spec.grid(len(cells), len(cells[0]))
    out = []
    for i in range(gh):
        for j in range(gw):
            r0, c0 = i * spec.s, j * spec.s
            vec = np.concatenate([cells[r][c] for r in range(r0, r0 + spec.k) for c in range(c0, c0 + spec.k)])
            out.append(((i, j), vec))
    return out


def extract_windows(img: Image, spec: WindowSpec) -> list[tuple[tuple[int, int], np.ndarray]]:
    gh, gw = spec.grid(img.height, img.width)
    px, k, s = img.pixels, spec.k, spec.s
    return [((i, j), px[i * s : i * s + k, j * s : j * s + k].ravel().copy()) for i in range(gh) for j in range(gw)]


def similarity(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"vector lengths differ: {a.shape} vs {b.shape}")
    if a.size == 0:
        return 1.0
    return float(1.0 - np.mean(np.abs(a - b)))


@dataclass
class ClusterNeuron:
    center: np.ndarray
    count: int = 1
    position: tuple[int, int] = (0, 0)

    def absorb(self, x: np.ndarray) -> None:
        self.count += 1
        self.center = self.center + (x - self.center) / self.count


def _check_theta(theta: float) -> None:
    if not 0 < theta < 1:
        raise ValueError(f"similarity threshold must lie in (0, 1), got {theta}")


def _best(clusters: Sequence[ClusterNeuron], x: np.ndarray) -> tuple[int, float]:
    sims = [similarity(c.center, x) for c in clusters]
    i = int(np.argmax(sims))
    return i, sims[i]


def assign(clusters: list[ClusterNeuron], x, theta: float, position=(0, 0)) -> int:
    """Leader step: join the most similar cluster if within ``theta``, else seed one."""
    x = np.asarray(x, dtype=float)
    if clusters:
        i, sim = _best(clusters, x)
        if sim >= theta:
            clusters[i].absorb(x)
            return i
    clusters.append(ClusterNeuron(x.copy(), 1, tuple(position)))
    return len(clusters) - 1


def cluster_windows(windows, theta: float = 0.9, position=(0, 0)) -> list[ClusterNeuron]:
    _check_theta(theta)
    clusters: list[ClusterNeuron] = []
    for w in windows:
        assign(clusters, w, theta, position)
    return clusters


def _one_hot(i: int, n: int) -> np.ndarray:
    v = np.zeros(n)
    v[i] = 1.0
    return v


@dataclass
class IrnnLevel:
    spec: WindowSpec
    theta: float
    grid: tuple[int, int]
    clusters: list[list[ClusterNeuron]]  # raster order over grid positions

    def counts(self) -> list[int]:
        return [len(c) for c in self.clusters]

    def count_map(self) -> np.ndarray:
        return np.array(self.counts(), dtype=int).reshape(self.grid)


@dataclass(frozen=True)
class Prediction:
    label: Hashable
    margin: float  # distance gap between the runner-up row and the winner


@dataclass
class IrnnModel:
    shape: tuple[int, int]
    levels: list[IrnnLevel]
    labels: list = field(default_factory=list)
    associative_weights: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    wta: WtaRule = WtaRule()

    def cluster_count_map(self, level: int = 0) -> np.ndarray:
        return self.levels[level].count_map()

    def centers(self) -> list[np.ndarray]:
        return [c.center for lv in self.levels for pos in lv.clusters for c in pos]


def cluster_count_map(model: IrnnModel, level: int = 0) -> np.ndarray:
    return model.cluster_count_map(level)


# -- feature computation ------------------------------------------------------


def _input_cells(img: Image) -> list[list[np.ndarray]]:
    return [[np.array([v]) for v in row] for row in img.pixels]


def _codes(level: IrnnLevel, cells) -> list[int]:
    """Nearest-cluster index per position (frozen clusters)."""
    return [_best(level.clusters[p], vec)[0] for p, (_, vec) in enumerate(_cell_windows(cells, level.spec))]


def _code_cells(level: IrnnLevel, codes: list[int]) -> list[list[np.ndarray]]:
    counts = level.counts()
    gh, gw = level.grid
    return [[_one_hot(codes[i * gw + j], counts[i * gw + j]) for j in range(gw)] for i in range(gh)]


def _features(model: IrnnModel, img: Image) -> np.ndarray:
    cells = _input_cells(img)
    for lv in model.levels:
        cells = _code_cells(lv, _codes(lv, cells))
    return np.concatenate([c for row in cells for c in row])


def _pad(vec: np.ndarray, old: Sequence[int], new: Sequence[int]) -> np.ndarray:
    """Grow each one-hot segment of ``vec`` from ``old[i]`` to ``new[i]`` slots."""
    parts, at = [], 0
    for o, n in zip(old, new):
        parts.append(vec[at : at + o])
        parts.append(np.zeros(n - o))
        at += o
    return np.concatenate(parts) if parts else vec


def _window_members(spec: WindowSpec, grid_below: tuple[int, int], pos: int, gw: int) -> list[int]:
    i, j = divmod(pos, gw)
    r0, c0 = i * spec.s, j * spec.s
    return [r * grid_below[1] + c for r in range(r0, r0 + spec.k) for c in range(c0, c0 + spec.k)]


def _pad_above(model: IrnnModel, li: int, old_counts: list[int]) -> None:
    """Level ``li`` gained clusters: zero-extend the centers that read its codes."""
    new_counts = model.levels[li].counts()
    if new_counts == old_counts:
        return
    if li + 1 < len(model.levels):
        up = model.levels[li + 1]
        gw = up.grid[1]
        for p, clusters in enumerate(up.clusters):
            members = _window_members(up.spec, model.levels[li].grid, p, gw)
            o = [old_counts[m] for m in members]
            n = [new_counts[m] for m in members]
            for c in clusters:
                c.center = _pad(c.center, o, n)
    elif model.labels:
        W = model.associative_weights
        model.associative_weights = np.array([_pad(row, old_counts, new_counts) for row in W])


# -- training -----------------------------------------------------------------


def _check_images(images: Sequence[Image], shape=None) -> tuple[int, int]:
    shapes = {img.shape for img in images}
    if shape is not None:
        shapes.add(tuple(shape))
    if len(shapes) > 1:
        raise ValueError(f"images must all have the same size, got {sorted(shapes)}")
    return next(iter(shapes))


def _grow_clusters(model: IrnnModel, images: Sequence[Image]) -> None:
    """Leader clustering one level at a time, lower levels settled first."""
    cells_per_img = [_input_cells(img) for img in images]
    for li, lv in enumerate(model.levels):
        old = lv.counts()
        for cells in cells_per_img:
            for p, (pos, vec) in enumerate(_cell_windows(cells, lv.spec)):
                # vectors read from a lower level are shorter if it grew after
                # this level's centers were made; centers were padded already
                assign(lv.clusters[p], vec, lv.theta, pos)
        _pad_above(model, li, old)
        cells_per_img = [_code_cells(lv, _codes(lv, cells)) for cells in cells_per_img]


def _train_labeled(model: IrnnModel, images, labels) -> None:
    for img, y in zip(images, labels):
        x = _features(model, img)
        if y not in model.labels:
            model.labels.append(y)
            W = model.associative_weights.reshape(-1, x.size)
            model.associative_weights = np.vstack([W, x[None, :]])
            continue
        r = model.labels.index(y)
        model.associative_weights[r] += model.wta.eta * (x - model.associative_weights[r])


def irnn_train(
    images: Sequence[Image],
    labels: Sequence[Hashable],
    specs: Sequence[WindowSpec] = (WindowSpec(4, 4), WindowSpec(2, 2)),
    theta=0.9,
    wta: WtaRule = WtaRule(),
) -> IrnnModel:
    """``theta`` is one threshold for all levels or one per level."""
    if len(images) != len(labels):
        raise ValueError(f"{len(images)} images but {len(labels)} labels")
    if not images:
        raise ValueError("no training images")
    if not specs:
        raise ValueError("at least one window level is required")
    thetas = list(theta) if np.ndim(theta) else [float(theta)] * len(specs)
    if len(thetas) != len(specs):
        raise ValueError(f"{len(thetas)} thresholds for {len(specs)} levels")
    for th in thetas:
        _check_theta(th)
    shape = _check_images(images)
    levels, grid = [], shape
    for spec, th in zip(specs, thetas):
        g = spec.grid(*grid)
        levels.append(IrnnLevel(spec, th, g, [[] for _ in range(g[0] * g[1])]))
        grid = g
    model = IrnnModel(shape, levels, wta=wta)
    _grow_clusters(model, images)
    _train_labeled(model, images, labels)
    return model


def irnn_classify(model: IrnnModel, img: Image) -> Prediction:
    _check_images([img], model.shape)
    if not model.labels:
        raise ValueError("model has no labels")
    x = _features(model, img)
    d = np.sqrt(np.sum((model.associative_weights - x) ** 2, axis=1))
    order = np.argsort(d, kind="stable")
    margin = float(d[order[1]] - d[order[0]]) if len(order) > 1 else float("inf")
    return Prediction(model.labels[int(order[0])], margin)


def irnn_predict(model: IrnnModel, img: Image):
    return irnn_classify(model, img).label


def irnn_update(model: IrnnModel, new_images: Sequence[Image], new_labels: Optional[Sequence] = None) -> IrnnModel:
    """Labeled: keep clustering and associating. Unlabeled: associative layer only."""
    if new_labels is not None and len(new_labels) != len(new_images):
        raise ValueError(f"{len(new_images)} images but {len(new_labels)} labels")
    model = copy.deepcopy(model)
    if not new_images:
        return model
    _check_images(new_images, model.shape)
    if new_labels is None:
        for img in new_images:
            x = _features(model, img)
            W = model.associative_weights
            win = wta_winner(W, x)
            lo = max(0, win - model.wta.neighborhood_radius)
            hi = min(len(W), win + model.wta.neighborhood_radius + 1)
            W[lo:hi] += model.wta.eta * (x - W[lo:hi])
        return model
    _grow_clusters(model, new_images)
    _train_labeled(model, new_images, new_labels)
    return model


# -- persistence --------------------------------------------------------------
# Layout (little-endian): magic "IRNN1"; u32 height, width, n_levels;
# per level: u32 k, s; f64 theta; u32 grid_h, grid_w; per position in raster
# order: u32 n_clusters, then per cluster u32 count, u32 dim, f64[dim] center;
# f64 wta eta; u32 wta radius; u32 n_labels; per label: u8 kind (0 int, 1 str)
# then i64 value or u32 length + utf-8 bytes; u32 dim; f64[n_labels*dim] rows.


def _pack_label(y) -> bytes:
    if isinstance(y, (int, np.integer)) and not isinstance(y, bool):
        return struct.pack("<Bq", 0, int(y))
    if isinstance(y, str):
        b = y.encode("utf-8")
        return struct.pack("<BI", 1, len(b)) + b
    raise ValueError(f"labels must be int or str to be saved, got {type(y).__name__}")


def dumps(model: IrnnModel) -> bytes:
    out = [MAGIC, struct.pack("<III", *model.shape, len(model.levels))]
    for lv in model.levels:
        out.append(struct.pack("<IIdII", lv.spec.k, lv.spec.s, lv.theta, *lv.grid))
        for clusters in lv.clusters:
            out.append(struct.pack("<I", len(clusters)))
            for c in clusters:
                out.append(struct.pack("<II", c.count, c.center.size))
                out.append(np.asarray(c.center, dtype="<f8").tobytes())
    out.append(struct.pack("<dII", model.wta.eta, model.wta.neighborhood_radius, len(model.labels)))
    out.extend(_pack_label(y) for y in model.labels)
    W = model.associative_weights
    dim = W.shape[1] if W.ndim == 2 else 0
    out.append(struct.pack("<I", dim))
    out.append(np.asarray(W, dtype="<f8").tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.data):
            raise ValueError("truncated IRNN1 model file")
        vals = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return vals

    def floats(self, n: int) -> np.ndarray:
        raw = self.data[self.pos : self.pos + 8 * n]
        if len(raw) != 8 * n:
            raise ValueError("truncated IRNN1 model file")
        self.pos += 8 * n
        return np.frombuffer(raw, dtype="<f8").astype(float)

    def raw(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ValueError("truncated IRNN1 model file")
        b = self.data[self.pos : self.pos + n]
        self.pos += n
        return b


def loads(data: bytes) -> IrnnModel:
    if not data.startswith(MAGIC):
        raise ValueError("not an IRNN1 model file")
    r = _Reader(data)
    r.pos = len(MAGIC)
    h, w, n_levels = r.take("<III")
    levels = []
    for _ in range(n_levels):
        k, s, theta, gh, gw = r.take("<IIdII")
        clusters = []
        for p in range(gh * gw):
            (n,) = r.take("<I")
            pos = divmod(p, gw)
            row = []
            for _ in range(n):
                count, dim = r.take("<II")
                row.append(ClusterNeuron(r.floats(dim), count, pos))
            clusters.append(row)
        levels.append(IrnnLevel(WindowSpec(k, s), theta, (gh, gw), clusters))
    eta, radius, n_labels = r.take("<dII")
    labels = []
    for _ in range(n_labels):
        (kind,) = r.take("<B")
        if kind == 0:
            labels.append(r.take("<q")[0])
        elif kind == 1:
            (n,) = r.take("<I")
            labels.append(r.raw(n).decode("utf-8"))
        else:
            raise ValueError(f"bad label kind {kind} in IRNN1 model file")
    (dim,) = r.take("<I")
    W = r.floats(n_labels * dim).reshape(n_labels, dim)
    if r.pos != len(data):
        raise ValueError("trailing bytes in IRNN1 model file")
    return IrnnModel((h, w), levels, labels, W, WtaRule(eta, radius))


def save_model(path, model: IrnnModel) -> None:
    Path(path).write_bytes(dumps(model))


def load_model(path) -> IrnnModel:
    return loads(Path(path).read_bytes())
