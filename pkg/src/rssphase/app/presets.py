"""Named initial conditions and synthetic test images."""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError
from ..operators import default_spacing

__all__ = [
    "PRESETS",
    "grid_nodes",
    "builtin_initial_conditions",
    "heat_exact",
    "heat_source",
    "two_stripes",
    "disk_image",
]


def grid_nodes(n: int, dim: int, centering: str = "vertex") -> list:
    """Coordinate arrays (``ij`` indexing) of the uniform grid on ``[0, 1]^dim``."""
    h = default_spacing(n, centering)
    offset = 0.5 * h if centering == "cell" else 0.0
    x = offset + h * np.arange(n)
    return np.meshgrid(*([x] * dim), indexing="ij")


def _cos_product(coords, freqs):
    out = np.ones_like(coords[0])
    for c, k in zip(coords, freqs):
        out = out * np.cos(k * c)
    return out


def _cross(coords):
    x, y = coords[0], coords[1]
    arm, half = 0.1, 0.35
    bar_x = (np.abs(x - 0.5) < half) & (np.abs(y - 0.5) < arm)
    bar_y = (np.abs(y - 0.5) < half) & (np.abs(x - 0.5) < arm)
    return np.where(bar_x | bar_y, 1.0, -1.0)


def _two_circles(coords):
    x, y = coords[0], coords[1]
    r = 0.15
    inside = ((x - 0.3) ** 2 + (y - 0.5) ** 2 < r * r) | ((x - 0.7) ** 2 + (y - 0.5) ** 2 < r * r)
    return np.where(inside, 1.0, -1.0)


def heat_exact(coords, t: float) -> np.ndarray:
    """``prod_i cos(pi x_i) * exp(sin t)``."""
    return _cos_product(coords, [np.pi] * len(coords)) * np.exp(np.sin(t))


def heat_source(coords, t: float) -> np.ndarray:
    """Forcing for which :func:`heat_exact` solves ``u_t - Laplace(u) = f``."""
    return (np.cos(t) + len(coords) * np.pi**2) * heat_exact(coords, t)


PRESETS = {
    "ac2d": lambda c: _cos_product(c, [np.pi, 2 * np.pi, 6.0][: len(c)]),
    "ac3d": lambda c: _cos_product(c, [np.pi, 2 * np.pi, 6.0][: len(c)]),
    "ch3d": lambda c: _cos_product(c, [2 * np.pi, 2 * np.pi, np.pi][: len(c)]),
    "heat": lambda c: heat_exact(c, 0.0),
    "cross": _cross,
    "two_circles": _two_circles,
    "zero": lambda c: np.zeros_like(c[0]),
}

_PLANAR = {"cross", "two_circles"}


def builtin_initial_conditions(name: str, n: int, dim: int, centering: str = "vertex") -> np.ndarray:
    """Deterministic initial field for a named preset on an ``n^dim`` grid."""
    key = name.strip().lower()
    if key not in PRESETS:
        raise ParameterError(f"unknown initial condition {name!r}; known: {sorted(PRESETS)}")
    if key in _PLANAR and dim < 2:
        raise ParameterError(f"preset {key!r} needs at least two dimensions")
    return PRESETS[key](grid_nodes(n, dim, centering))


def two_stripes(n: int = 64, band: int = 12, stripe: int = 8, gap: int = 16):
    """Two vertical stripes crossed by a horizontal occluding band.

    Returns ``(image, mask, truth)``: the damaged 8-bit image (the band is
    painted mid-gray), the known-pixel mask (0 inside the band) and the
    undamaged binary image.
    """
    truth = np.zeros((n, n), dtype=np.uint8)
    left = (n - 2 * stripe - gap) // 2
    truth[:, left:left + stripe] = 255
    truth[:, left + stripe + gap:left + 2 * stripe + gap] = 255
    mask = np.ones((n, n))
    top = (n - band) // 2
    mask[top:top + band, :] = 0.0
    image = truth.copy()
    image[top:top + band, :] = 128
    return image, mask, truth


def disk_image(n: int = 128, radius: float = 0.3, center=(0.5, 0.5), contrast=(0.2, 0.8)):
    """Grayscale disk on a flat background sampled at cell centers, in [0, 1]."""
    x, y = grid_nodes(n, 2, "cell")
    inside = (x - center[0]) ** 2 + (y - center[1]) ** 2 < radius**2
    return np.where(inside, contrast[1], contrast[0]), inside
