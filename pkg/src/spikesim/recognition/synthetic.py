"""Small generated image sets for desk-scale recognition runs."""

from __future__ import annotations

import numpy as np

from .images import Image


def synthetic_faces(n: int = 3, size: int = 16, center: int = 8, background: float = 0.2, seed: int = 0):
    """``n`` images sharing a flat background; only the central square differs.

    The central ``center x center`` block holds random pixels per face, so
    windows over the periphery are identical across faces and windows over the
    center are not.
    """
    if not 0 < center <= size:
        raise ValueError("center block must fit inside the image")
    rng = np.random.default_rng(seed)
    lo = (size - center) // 2
    faces = []
    for _ in range(n):
        px = np.full((size, size), background)
        px[lo : lo + center, lo : lo + center] = rng.random((center, center))
        faces.append(Image(px))
    return faces


def bar_patterns(size: int = 6):
    """Two orthogonal binary images: even rows lit, odd rows lit."""
    a = np.zeros((size, size))
    a[0::2] = 1.0
    return [Image(a), Image(1.0 - a)]


def add_pixel_noise(img: Image, fraction: float, seed: int = 0) -> Image:
    """Replace ``fraction`` of the pixels with uniform random values."""
    rng = np.random.default_rng(seed)
    px = img.pixels.copy()
    n = int(round(fraction * px.size))
    idx = rng.choice(px.size, size=n, replace=False)
    px.flat[idx] = rng.random(n)
    return Image(px)
