"""Curvature-based edge extraction and the classical comparison detectors.

The K map marks cells whose effective squared wavenumber

    k_eff^2 = -lap(A) / (A + eps)

is negative, where ``A`` is the amplitude of the power map and ``lap`` is the
5-point Laplacian.  Canny and LBP masks are provided as image-domain baselines.
All stencils pad by replicating the border cell.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import BadThresholds, GridTooSmall, ValueOutOfRange
from .grid import AmplitudeMap, BinaryMask, Grid2D, as_grid


class CurvatureKind(enum.Enum):
    EFFECTIVE_WAVENUMBER_SQ = "k_eff_sq"
    LOG_CURVATURE = "k_log"


@dataclass(frozen=True)
class CurvatureMap:
    grid: Grid2D
    kind: CurvatureKind


@dataclass(frozen=True)
class EdgeParams:
    epsilon: float = 1e-6
    canny_sigma: float = 1.0
    canny_low: float = 0.05
    canny_high: float = 0.2
    lbp_edge_threshold: int = 2
    # K = 1 where k_eff^2 > 0 instead of < 0
    flip_sign: bool = False

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueOutOfRange("epsilon must be positive")
        if not self.canny_sigma > 0:
            raise ValueOutOfRange("canny_sigma must be positive")
        if not 0 <= self.canny_low < self.canny_high:
            raise BadThresholds(
                f"need 0 <= canny_low < canny_high, got {self.canny_low}, {self.canny_high}")
        if not 0 <= self.lbp_edge_threshold <= 8:
            raise ValueOutOfRange("lbp_edge_threshold must be in [0, 8]")


def _require_min_size(shape, n=3):
    if shape[0] < n or shape[1] < n:
        raise GridTooSmall(f"grid must be at least {n}x{n}, got {shape[0]}x{shape[1]}")


def laplacian5_array(a: np.ndarray, h: float = 1.0) -> np.ndarray:
    """5-point Laplacian of a 2D array with replicate padding."""
    p = np.pad(a, 1, mode="edge")
    lap = p[2:, 1:-1] + p[:-2, 1:-1] + p[1:-1, 2:] + p[1:-1, :-2] - 4.0 * a
    return lap / (h * h)


def laplacian5(A) -> Grid2D:
    g = as_grid(A)
    _require_min_size(g.shape)
    return g.with_values(laplacian5_array(g.values, g.spacing_h))


def _amplitude_grid(A) -> Grid2D:
    g = as_grid(A)
    if g.values.min() < 0.0:
        raise ValueOutOfRange("amplitude must be nonnegative")
    return g


def k_eff_sq(A, params: EdgeParams = EdgeParams()) -> CurvatureMap:
    g = _amplitude_grid(A)
    lap = laplacian5(g).values
    return CurvatureMap(g.with_values(-lap / (g.values + params.epsilon)),
                        CurvatureKind.EFFECTIVE_WAVENUMBER_SQ)


def k_log(A, params: EdgeParams = EdgeParams()) -> CurvatureMap:
    g = _amplitude_grid(A)
    _require_min_size(g.shape)
    logged = np.log(g.values + params.epsilon)
    return CurvatureMap(g.with_values(-laplacian5_array(logged, g.spacing_h)),
                        CurvatureKind.LOG_CURVATURE)


def k_edge_map(A, params: EdgeParams = EdgeParams()) -> BinaryMask:
    """Binary K map: 1 where k_eff^2 < 0, 0 where k_eff^2 >= 0."""
    k2 = k_eff_sq(A, params).grid.values
    bits = k2 > 0 if params.flip_sign else k2 < 0
    return BinaryMask(bits.astype(np.uint8))


# --- Canny -----------------------------------------------------------------

def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = int(math.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(a: np.ndarray, sigma: float) -> np.ndarray:
    k = _gaussian_kernel(sigma)
    out = ndimage.correlate1d(a, k, axis=0, mode="nearest")
    return ndimage.correlate1d(out, k, axis=1, mode="nearest")


def sobel(a: np.ndarray):
    """Sobel derivatives (gy, gx) normalized by 1/8, replicate border."""
    p = np.pad(a, 1, mode="edge")
    gx = ((p[:-2, 2:] + 2 * p[1:-1, 2:] + p[2:, 2:])
          - (p[:-2, :-2] + 2 * p[1:-1, :-2] + p[2:, :-2])) / 8.0
    gy = ((p[2:, :-2] + 2 * p[2:, 1:-1] + p[2:, 2:])
          - (p[:-2, :-2] + 2 * p[:-2, 1:-1] + p[:-2, 2:])) / 8.0
    return gy, gx


def non_max_suppression(mag: np.ndarray, gy: np.ndarray, gx: np.ndarray) -> np.ndarray:
    """Thin ``mag`` along the gradient direction quantized to 0/45/90/135 degrees.

    A cell survives if it is >= its neighbor behind and > its neighbor ahead,
    so an exact plateau of two cells keeps one of them.
    """
    angle = np.rad2deg(np.arctan2(gy, gx)) % 180.0
    sector = np.zeros(mag.shape, dtype=np.int8)
    sector[(angle >= 22.5) & (angle < 67.5)] = 1
    sector[(angle >= 67.5) & (angle < 112.5)] = 2
    sector[(angle >= 112.5) & (angle < 157.5)] = 3
    # (di, dj) steps toward increasing x / y for each sector
    steps = {0: (0, 1), 1: (1, 1), 2: (1, 0), 3: (1, -1)}
    p = np.pad(mag, 1, mode="constant", constant_values=0.0)
    H, W = mag.shape
    keep = np.zeros(mag.shape, dtype=bool)
    for s, (di, dj) in steps.items():
        ahead = p[1 + di:1 + di + H, 1 + dj:1 + dj + W]
        behind = p[1 - di:1 - di + H, 1 - dj:1 - dj + W]
        sel = sector == s
        keep |= sel & (mag >= behind) & (mag > ahead)
    return np.where(keep, mag, 0.0)


def hysteresis(thin: np.ndarray, low: float, high: float) -> np.ndarray:
    weak = thin >= low
    strong = thin >= high
    labels, n = ndimage.label(weak, structure=np.ones((3, 3), dtype=int))
    if n == 0:
        return np.zeros(thin.shape, dtype=bool)
    has_strong = np.zeros(n + 1, dtype=bool)
    has_strong[np.unique(labels[strong])] = True
    has_strong[0] = False
    return has_strong[labels]


def canny(g, params: EdgeParams = EdgeParams()) -> BinaryMask:
    """Canny edges: blur, Sobel, NMS, then 8-connected double-threshold hysteresis."""
    if not params.canny_low < params.canny_high:
        raise BadThresholds("canny_low must be below canny_high")
    vals = as_grid(g).values
    blurred = gaussian_blur(vals, params.canny_sigma)
    gy, gx = sobel(blurred)
    mag = np.hypot(gx, gy)
    thin = non_max_suppression(mag, gy, gx)
    return BinaryMask(hysteresis(thin, params.canny_low, params.canny_high).astype(np.uint8))


# --- LBP -------------------------------------------------------------------

# clockwise from the top-left neighbor; bit k has weight 2**(7-k)
LBP_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1))


def lbp_codes(a: np.ndarray) -> np.ndarray:
    """8-bit LBP codes on interior cells (border rows/cols are 0)."""
    _require_min_size(a.shape)
    H, W = a.shape
    center = a[1:-1, 1:-1]
    codes = np.zeros(a.shape, dtype=np.uint8)
    inner = np.zeros(center.shape, dtype=np.int32)
    for k, (di, dj) in enumerate(LBP_OFFSETS):
        nbr = a[1 + di:H - 1 + di, 1 + dj:W - 1 + dj]
        inner |= (nbr >= center).astype(np.int32) << (7 - k)
    codes[1:-1, 1:-1] = inner
    return codes


def lbp_transitions(codes: np.ndarray) -> np.ndarray:
    """Number of 0/1 changes around each circular 8-bit code."""
    c = codes.astype(np.int32)
    rotated = ((c << 1) | (c >> 7)) & 0xFF
    diff = c ^ rotated
    return np.unpackbits(diff.astype(np.uint8)[..., None], axis=-1).sum(axis=-1)


def lbp_edge(g, params: EdgeParams = EdgeParams()) -> BinaryMask:
    vals = as_grid(g).values
    codes = lbp_codes(vals)
    bits = lbp_transitions(codes) > params.lbp_edge_threshold
    bits[0, :] = bits[-1, :] = False
    bits[:, 0] = bits[:, -1] = False
    return BinaryMask(bits.astype(np.uint8))
