"""Dense 2D grids, radio-map containers and their file formats.

Arrays are stored row-major with 0-based indices: ``values[i, j]`` is row
``i`` (y) and column ``j`` (x).  All containers are immutable; the backing
array is copied on construction and flagged read-only.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from .errors import (
    BadMagic,
    DimensionMismatch,
    NegativePower,
    TruncatedFile,
    ValueOutOfRange,
)

RMG_MAGIC = b"RMG1"
_RMG_HEADER = struct.Struct("<4sIId")


def _frozen(arr, dtype) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True, order="C")
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Grid2D:
    """Finite scalar field on a regular grid with cell size ``spacing_h`` (m)."""

    values: np.ndarray
    spacing_h: float = 1.0

    def __post_init__(self):
        vals = _frozen(self.values, np.float64)
        if vals.ndim != 2 or vals.shape[0] < 1 or vals.shape[1] < 1:
            raise DimensionMismatch(f"expected a non-empty 2D array, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueOutOfRange("grid values must be finite")
        spacing = float(self.spacing_h)
        if not (spacing > 0 and math.isfinite(spacing)):
            raise ValueOutOfRange(f"spacing_h must be positive, got {self.spacing_h}")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "spacing_h", spacing)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape

    def with_values(self, values) -> "Grid2D":
        return Grid2D(values, self.spacing_h)

    def __eq__(self, other):
        if not isinstance(other, Grid2D):
            return NotImplemented
        return (self.spacing_h == other.spacing_h
                and self.shape == other.shape
                and np.array_equal(self.values, other.values))


@dataclass(frozen=True, eq=False)
class BinaryMask:
    bits: np.ndarray

    def __post_init__(self):
        raw = np.asarray(self.bits)
        if raw.ndim != 2:
            raise DimensionMismatch(f"mask must be 2D, got shape {raw.shape}")
        if not np.all((raw == 0) | (raw == 1)):
            raise ValueOutOfRange("mask elements must be exactly 0 or 1")
        object.__setattr__(self, "bits", _frozen(raw, np.uint8))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.bits.shape

    def to_grid(self, spacing_h: float = 1.0) -> Grid2D:
        return Grid2D(self.bits.astype(np.float64), spacing_h)

    def __eq__(self, other):
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)


@dataclass(frozen=True)
class RadioMap:
    """Normalized power map ``I`` in [0, 1] plus transmitter metadata.

    ``norm_bounds`` holds the (min, max) dBm values that were mapped to 0 and 1,
    so the map can be converted back with :func:`denormalize`.
    """

    grid: Grid2D
    tx_pos: Tuple[float, float]
    freq_hz: float
    norm_bounds: Tuple[float, float]

    def __post_init__(self):
        v = self.grid.values
        if v.min() < 0.0 or v.max() > 1.0:
            raise ValueOutOfRange("radio map values must lie in [0, 1]")
        lo, hi = self.norm_bounds
        if not lo < hi:
            raise ValueOutOfRange(f"norm_bounds must satisfy min < max, got {self.norm_bounds}")
        if not self.freq_hz > 0:
            raise ValueOutOfRange("freq_hz must be positive")
        x, y = self.tx_pos
        h = self.grid.spacing_h
        if not (0.0 <= x <= self.grid.width * h and 0.0 <= y <= self.grid.height * h):
            raise ValueOutOfRange(f"tx_pos {self.tx_pos} outside the grid extent")


@dataclass(frozen=True)
class AmplitudeMap:
    grid: Grid2D

    def __post_init__(self):
        if self.grid.values.min() < 0.0:
            raise ValueOutOfRange("amplitude must be nonnegative")


GridLike = Union[Grid2D, RadioMap, AmplitudeMap]


def as_grid(g) -> Grid2D:
    """Unwrap any grid container (or a bare 2D array, spacing 1) to a Grid2D."""
    if isinstance(g, Grid2D):
        return g
    if isinstance(g, (RadioMap, AmplitudeMap)):
        return g.grid
    if isinstance(g, BinaryMask):
        return g.to_grid()
    return Grid2D(np.asarray(g, dtype=np.float64))


def normalize_minmax(g: Grid2D) -> Tuple[Grid2D, Tuple[float, float]]:
    """Map ``g`` linearly onto [0, 1].

    A constant grid maps to all zeros with bounds ``(c, c)``.
    """
    g = as_grid(g)
    lo = float(g.values.min())
    hi = float(g.values.max())
    if hi == lo:
        return g.with_values(np.zeros(g.shape)), (lo, lo)
    out = (g.values - lo) / (hi - lo)
    # guard against 1 ulp overshoot from the division
    np.clip(out, 0.0, 1.0, out=out)
    return g.with_values(out), (lo, hi)


def denormalize(g: Grid2D, bounds: Tuple[float, float]) -> Grid2D:
    lo, hi = bounds
    g = as_grid(g)
    return g.with_values(g.values * (hi - lo) + lo)


def amplitude(power) -> AmplitudeMap:
    """Elementwise square root of a power map."""
    g = as_grid(power)
    if g.values.min() < 0.0:
        raise NegativePower("power map contains negative values")
    return AmplitudeMap(g.with_values(np.sqrt(g.values)))


def write_rmg(g: Grid2D, path) -> None:
    g = as_grid(g)
    header = _RMG_HEADER.pack(RMG_MAGIC, g.width, g.height, g.spacing_h)
    payload = np.ascontiguousarray(g.values, dtype="<f8").tobytes()
    Path(path).write_bytes(header + payload)


def read_rmg(path) -> Grid2D:
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != RMG_MAGIC:
        raise BadMagic(f"{path}: not an RMG1 file")
    if len(data) < _RMG_HEADER.size:
        raise TruncatedFile(f"{path}: header truncated")
    _, width, height, spacing = _RMG_HEADER.unpack_from(data)
    expected = _RMG_HEADER.size + 8 * width * height
    if len(data) < expected:
        raise TruncatedFile(f"{path}: expected {expected} bytes, found {len(data)}")
    if len(data) > expected:
        raise DimensionMismatch(
            f"{path}: {len(data) - expected} trailing bytes after {width}x{height} payload")
    vals = np.frombuffer(data, dtype="<f8", count=width * height,
                         offset=_RMG_HEADER.size).reshape(height, width)
    return Grid2D(vals.astype(np.float64), spacing)


def to_pixels(g) -> np.ndarray:
    """8-bit pixels: round-half-up of 255*v for grids, {0, 255} for masks."""
    if isinstance(g, BinaryMask):
        return (g.bits * 255).astype(np.uint8)
    vals = as_grid(g).values
    if vals.min() < 0.0 or vals.max() > 1.0:
        raise ValueOutOfRange("PGM export requires values in [0, 1]")
    return np.floor(255.0 * vals + 0.5).astype(np.uint8)


def write_pgm(g, path) -> None:
    write_pgm_pixels(to_pixels(g), path)


def write_pgm_pixels(pixels: np.ndarray, path) -> None:
    height, width = pixels.shape
    header = f"P5\n{width} {height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + np.ascontiguousarray(pixels, dtype=np.uint8).tobytes())


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise BadMagic(f"{path}: not a binary PGM")
    width, height, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueOutOfRange("only maxval 255 is supported")
    pixels = np.frombuffer(data[-width * height:], dtype=np.uint8)
    return pixels.reshape(height, width)
