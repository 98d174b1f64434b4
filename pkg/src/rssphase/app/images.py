"""Grayscale PGM images and their conversion to phase fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ImageFormatError

__all__ = [
    "RasterImage",
    "load_pgm",
    "save_pgm",
    "image_to_field",
    "field_to_image",
    "threshold",
]


@dataclass(frozen=True)
class RasterImage:
    """8-bit grayscale image; ``pixels`` is a ``(height, width)`` uint8 array."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.size != self.width * self.height:
            raise ImageFormatError(
                f"{px.size} pixels do not fill a {self.width}x{self.height} image"
            )
        if px.size and (px.min() < 0 or px.max() > 255):
            raise ImageFormatError("pixel values must lie in 0..255")
        object.__setattr__(self, "pixels", px.astype(np.uint8).reshape(self.height, self.width))

    @classmethod
    def from_array(cls, array) -> "RasterImage":
        a = np.asarray(array)
        if a.ndim != 2:
            raise ImageFormatError(f"expected a 2D array, got shape {a.shape}")
        return cls(a.shape[1], a.shape[0], a)


def _tokens(data: bytes, count: int, start: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments.

    Returns the tokens and the offset just past the last token.
    """
    out = []
    pos = start
    n = len(data)
    while len(out) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        if pos >= n:
            raise ImageFormatError("truncated PGM header")
        begin = pos
        while pos < n and not data[pos:pos + 1].isspace() and data[pos:pos + 1] != b"#":
            pos += 1
        out.append(data[begin:pos])
    return out, pos


def _parse_pgm(data: bytes) -> RasterImage:
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ImageFormatError(f"not a PGM file (magic {magic!r})")
    try:
        raw, pos = _tokens(data, 3, 2)
        width, height, maxval = (int(t) for t in raw)
    except ValueError:
        raise ImageFormatError("non-integer PGM header field") from None
    if width <= 0 or height <= 0:
        raise ImageFormatError(f"invalid image size {width}x{height}")
    if maxval != 255:
        raise ImageFormatError(f"only maxval 255 is supported, got {maxval}")
    count = width * height
    if magic == b"P5":
        payload = data[pos + 1:pos + 1 + count]
        if len(payload) < count:
            raise ImageFormatError(f"truncated payload: {len(payload)} of {count} bytes")
        pixels = np.frombuffer(payload, dtype=np.uint8)
    else:
        body = data[pos:].split()
        if len(body) < count:
            raise ImageFormatError(f"truncated payload: {len(body)} of {count} values")
        try:
            pixels = np.array([int(t) for t in body[:count]])
        except ValueError:
            raise ImageFormatError("non-integer pixel value") from None
        if pixels.min() < 0 or pixels.max() > 255:
            raise ImageFormatError("pixel value out of range 0..255")
    return RasterImage(width, height, pixels.reshape(height, width))


def load_pgm(path) -> RasterImage:
    with open(path, "rb") as fh:
        return _parse_pgm(fh.read())


def save_pgm(image: RasterImage, path, binary: bool = True) -> None:
    header = f"{'P5' if binary else 'P2'}\n{image.width} {image.height}\n255\n".encode()
    with open(path, "wb") as fh:
        fh.write(header)
        if binary:
            fh.write(image.pixels.tobytes())
        else:
            for row in image.pixels:
                fh.write((" ".join(str(int(v)) for v in row) + "\n").encode())


def image_to_field(image: RasterImage, target=(-1.0, 1.0)) -> np.ndarray:
    """Affine map of the pixel range onto ``target``; a constant image maps to
    the midpoint of the range."""
    lo, hi = target
    px = image.pixels.astype(float)
    pmin, pmax = px.min(), px.max()
    if pmax == pmin:
        return np.full(px.shape, 0.5 * (lo + hi))
    return lo + (hi - lo) * (px - pmin) / (pmax - pmin)


def field_to_image(values, source=(-1.0, 1.0)) -> RasterImage:
    """Map ``source`` linearly onto 0..255, clamping and rounding.

    3D fields are sliced at the middle of the last axis; 1D fields become a
    single-row image.
    """
    v = np.asarray(values, dtype=float)
    if v.ndim == 3:
        v = v[:, :, v.shape[2] // 2]
    elif v.ndim == 1:
        v = v[None, :]
    lo, hi = source
    scaled = np.clip((v - lo) / (hi - lo), 0.0, 1.0) * 255.0
    return RasterImage.from_array(np.rint(scaled).astype(np.uint8))


def threshold(values) -> np.ndarray:
    """Dominant-phase mask for a ``[-1, 1]`` phase: 1 where ``value >= 0``."""
    v = np.asarray(values, dtype=float)
    return (v >= 0).astype(float)
