"""Grayscale images and their on-disk formats (PGM P2/P5 and a plain matrix)."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

PathLike = Union[str, Path]


@dataclass(frozen=True, eq=False)
class Image:
    """Row-major pixels in [0, 1]; ``pixels.shape == (height, width)``."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.array(self.pixels, dtype=float)
        if px.ndim != 2 or min(px.shape) < 1:
            raise ValueError(f"image pixels must be a non-empty 2-D array, got shape {px.shape}")
        if not np.all(np.isfinite(px)) or px.min() < 0 or px.max() > 1:
            raise ValueError("pixel values must lie in [0, 1]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def __eq__(self, other):
        return isinstance(other, Image) and np.array_equal(self.pixels, other.pixels)

    @classmethod
    def zeros(cls, height: int, width: int) -> "Image":
        return cls(np.zeros((height, width)))


def _tokens(data: bytes):
    """Whitespace tokens of a PGM header, skipping ``#`` comments."""
    pos, n = 0, len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            start = pos
            while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
                pos += 1
            yield data[start:pos], pos


def parse_pgm(data: bytes) -> Image:
    toks = _tokens(data)
    try:
        magic, _ = next(toks)
        w, _ = next(toks)
        h, _ = next(toks)
        maxval, end = next(toks)
    except StopIteration:
        raise ValueError("truncated PGM header") from None
    if magic not in (b"P2", b"P5"):
        raise ValueError(f"not a PGM file (magic {magic!r})")
    w, h, maxval = int(w), int(h), int(maxval)
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise ValueError(f"invalid PGM dimensions or maxval: {w}x{h}, {maxval}")
    if magic == b"P2":
        vals = [int(t) for t, _ in toks]
        if len(vals) != w * h:
            raise ValueError(f"PGM has {len(vals)} samples, expected {w * h}")
        arr = np.array(vals, dtype=float)
    else:
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = data[end + 1 : end + 1 + w * h * dtype.itemsize]
        if len(raw) != w * h * dtype.itemsize:
            raise ValueError("truncated PGM raster")
        arr = np.frombuffer(raw, dtype=dtype).astype(float)
    if arr.max(initial=0) > maxval:
        raise ValueError("PGM sample exceeds maxval")
    return Image(arr.reshape(h, w) / maxval)


def parse_matrix(text: str) -> Image:
    """Header ``W H MAXVAL`` then H rows of W numbers; pixel = value / MAXVAL."""
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines:
        raise ValueError("empty matrix image")
    try:
        w, h, maxval = lines[0].split()
        w, h, maxval = int(w), int(h), float(maxval)
    except ValueError:
        raise ValueError(f"matrix header must be 'W H MAXVAL', got {lines[0]!r}") from None
    if maxval <= 0:
        raise ValueError("MAXVAL must be > 0")
    rows = [[float(v) for v in ln.split()] for ln in lines[1:]]
    if len(rows) != h or any(len(r) != w for r in rows):
        raise ValueError(f"matrix body does not match header {w}x{h}")
    return Image(np.array(rows) / maxval)


def read_image(path: PathLike) -> Image:
    data = Path(path).read_bytes()
    if data[:2] in (b"P2", b"P5"):
        return parse_pgm(data)
    return parse_matrix(data.decode("utf-8"))


def format_pgm(img: Image, maxval: int = 255) -> str:
    q = np.rint(img.pixels * maxval).astype(int)
    rows = "\n".join(" ".join(str(v) for v in row) for row in q)
    return f"P2\n{img.width} {img.height}\n{maxval}\n{rows}\n"


def format_matrix(img: Image) -> str:
    rows = "\n".join(" ".join(repr(float(v)) for v in row) for row in img.pixels)
    return f"{img.width} {img.height} 1\n{rows}\n"


def write_image(path: PathLike, img: Image) -> None:
    path = Path(path)
    text = format_pgm(img) if path.suffix.lower() == ".pgm" else format_matrix(img)
    path.write_text(text, encoding="utf-8")
