"""Hand-wired threshold-unit network recognizing the digit 2 on an 8x8 grid.

Layer 1 (simple cells) are conjunctions, theta = 3, each looking at three
pixels on a line. Layer 2 (complex cells) are disjunctions, theta = 1, pooling
one orientation over a region. The output is a conjunction of the four
complex cells.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from ..neurons import ThresholdUnit, mp_fire
from .images import Image, parse_matrix

SIZE = 8

# (d_row, d_col) step between the three pixels of a segment
ORIENTATIONS = {
    "horizontal": (0, 1),
    "vertical": (1, 0),
    "diagonal": (1, -1),  # upper right to lower left
}

# complex cell -> (orientation, allowed rows, allowed cols) for every pixel
# of a pooled segment
COMPLEX_CELLS = {
    "top_bar": ("horizontal", range(0, 3), range(0, SIZE)),
    "right_stroke": ("vertical", range(0, 5), range(4, SIZE)),
    "diagonal": ("diagonal", range(2, SIZE), range(0, SIZE)),
    "bottom_bar": ("horizontal", range(5, SIZE), range(0, SIZE)),
}


@dataclass(frozen=True)
class WiredUnit:
    name: str
    unit: ThresholdUnit
    inputs: tuple[int, ...]  # indices into the previous layer's output


@dataclass(frozen=True)
class ThresholdNetwork:
    """Feed-forward layers of threshold units over a flattened binary image."""

    layers: tuple[tuple[WiredUnit, ...], ...]
    image_shape: tuple[int, int]

    def activations(self, img: Image) -> list[np.ndarray]:
        if img.shape != self.image_shape:
            raise ValueError(f"expected a {self.image_shape} image, got {img.shape}")
        x = (img.pixels.ravel() >= 0.5).astype(float)
        out = [x]
        for layer in self.layers:
            x = np.array([mp_fire(u.unit, x[list(u.inputs)]) for u in layer], dtype=float)
            out.append(x)
        return out

    def __call__(self, img: Image) -> int:
        return int(self.activations(img)[-1][0])


def _segments(orientation: str):
    dr, dc = ORIENTATIONS[orientation]
    for r in range(SIZE):
        for c in range(SIZE):
            cells = [(r + i * dr, c + i * dc) for i in range(3)]
            if all(0 <= rr < SIZE and 0 <= cc < SIZE for rr, cc in cells):
                yield cells


def mp_digit2_network() -> ThresholdNetwork:
    simple: list[WiredUnit] = []
    cells_of: list[tuple[str, list]] = []
    for orient in ORIENTATIONS:
        for cells in _segments(orient):
            idx = tuple(r * SIZE + c for r, c in cells)
            simple.append(WiredUnit(f"{orient}@{cells[0]}", ThresholdUnit((1, 1, 1), 3), idx))
            cells_of.append((orient, cells))

    complex_: list[WiredUnit] = []
    for name, (orient, rows, cols) in COMPLEX_CELLS.items():
        members = tuple(
            i
            for i, (o, cells) in enumerate(cells_of)
            if o == orient and all(r in rows and c in cols for r, c in cells)
        )
        complex_.append(WiredUnit(name, ThresholdUnit((1,) * len(members), 1), members))

    output = WiredUnit("digit2", ThresholdUnit((1,) * len(complex_), len(complex_)), tuple(range(len(complex_))))
    return ThresholdNetwork((tuple(simple), tuple(complex_), (output,)), (SIZE, SIZE))


FIXTURES = ("digit2", "digit2_no_bottom", "digit7", "blank")


def load_fixture(name: str) -> Image:
    if name not in FIXTURES:
        raise ValueError(f"unknown fixture {name!r}; available: {FIXTURES}")
    text = resources.files(__package__).joinpath("fixtures", f"{name}.txt").read_text(encoding="utf-8")
    return parse_matrix(text)
