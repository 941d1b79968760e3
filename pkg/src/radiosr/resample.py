"""Low-resolution map construction and upsampling.

Two coordinate conventions are used, each paired with its inverse:

* lattice: LR cell ``i`` sits at HR cell ``s*i`` (``uniform_downsample``; the
  upsamplers with ``stride=s``), and HR cells past ``s*(n-1)`` replicate the
  last LR sample;
* align-corners: LR cell ``i`` sits at HR coordinate ``i*(N-1)/(n-1)``
  (``bilinear_resample``; the upsamplers without ``stride``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from .errors import DimensionMismatch, IndivisibleStride, SourceTooSmall, ValueOutOfRange
from .grid import BinaryMask, Grid2D, as_grid, normalize_minmax

Size = Union[int, Tuple[int, int]]


@dataclass(frozen=True)
class SamplingSpec:
    stride_s: int
    hr_size_N: int
    lr_size_n: int

    def __post_init__(self):
        if min(self.stride_s, self.hr_size_N, self.lr_size_n) < 1:
            raise ValueOutOfRange("sampling sizes must be positive")
        if self.hr_size_N != self.stride_s * self.lr_size_n:
            raise IndivisibleStride(
                f"N={self.hr_size_N} != s*n = {self.stride_s}*{self.lr_size_n}")

    @classmethod
    def from_hr(cls, N: int, s: int) -> "SamplingSpec":
        if s < 1 or N % s:
            raise IndivisibleStride(f"grid size {N} is not divisible by stride {s}")
        return cls(s, N, N // s)


def _pair(n: Size) -> Tuple[int, int]:
    if isinstance(n, (tuple, list)):
        return int(n[0]), int(n[1])
    return int(n), int(n)


def uniform_downsample(P, s: int) -> Grid2D:
    """Keep every ``s``-th cell along both axes, anchored at (0, 0)."""
    g = as_grid(P)
    s = int(s)
    if s < 1 or g.height % s or g.width % s:
        raise IndivisibleStride(f"grid {g.height}x{g.width} is not divisible by stride {s}")
    return Grid2D(g.values[::s, ::s], g.spacing_h * s)


def _align_corner_coords(n_out: int, n_src: int) -> np.ndarray:
    if n_out == 1:
        return np.zeros(1)
    # integer numerator keeps exact-integer locations exact
    return np.arange(n_out) * (n_src - 1) / (n_out - 1)


def _lattice_coords(n_out: int, n_src: int, stride: int) -> np.ndarray:
    return np.minimum(np.arange(n_out) / stride, n_src - 1)


def _bilinear_at(src: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    H, W = src.shape
    p0 = np.floor(ys).astype(int)
    q0 = np.floor(xs).astype(int)
    p1 = np.minimum(p0 + 1, H - 1)
    q1 = np.minimum(q0 + 1, W - 1)
    wy1 = ys - p0
    wx1 = xs - q0
    wy0 = 1.0 - wy1
    wx0 = 1.0 - wx1
    out = (wy0[:, None] * wx0[None, :] * src[np.ix_(p0, q0)]
           + wy0[:, None] * wx1[None, :] * src[np.ix_(p0, q1)]
           + wy1[:, None] * wx0[None, :] * src[np.ix_(p1, q0)]
           + wy1[:, None] * wx1[None, :] * src[np.ix_(p1, q1)])
    return out


def bilinear_resample(K, n: Size) -> Grid2D:
    """Resample ``K`` to ``n`` cells per axis with align-corners bilinear weights."""
    g = as_grid(K)
    ny, nx = _pair(n)
    H, W = g.shape
    if ny < 2 or nx < 2 or ny > H or nx > W:
        raise SourceTooSmall(f"cannot resample {H}x{W} to {ny}x{nx}")
    ys = _align_corner_coords(ny, H)
    xs = _align_corner_coords(nx, W)
    out = _bilinear_at(g.values, ys, xs)
    return Grid2D(out, g.spacing_h * (W - 1) / (nx - 1))


def _upsample_coords(n_out, n_src, stride):
    if stride is None:
        return _align_corner_coords(n_out, n_src)
    return _lattice_coords(n_out, n_src, stride)


def _check_up(g: Grid2D, ny: int, nx: int):
    if ny < g.height or nx < g.width:
        raise SourceTooSmall(f"upsample target {ny}x{nx} smaller than source {g.shape}")


def upsample_bilinear(g, N: Size, stride: Optional[int] = None) -> Grid2D:
    src = as_grid(g)
    ny, nx = _pair(N)
    _check_up(src, ny, nx)
    ys = _upsample_coords(ny, src.height, stride)
    xs = _upsample_coords(nx, src.width, stride)
    spacing = src.spacing_h / stride if stride else src.spacing_h * src.width / nx
    return Grid2D(_bilinear_at(src.values, ys, xs), spacing)


def _catmull_rom(t: np.ndarray) -> np.ndarray:
    """Weights for taps at offsets -1, 0, 1, 2 given fractional position t."""
    t2 = t * t
    t3 = t2 * t
    return np.stack([
        0.5 * (-t3 + 2 * t2 - t),
        0.5 * (3 * t3 - 5 * t2 + 2),
        0.5 * (-3 * t3 + 4 * t2 + t),
        0.5 * (t3 - t2),
    ], axis=-1)


def _cubic_matrix(coords: np.ndarray, n_src: int) -> np.ndarray:
    base = np.floor(coords).astype(int)
    w = _catmull_rom(coords - base)
    M = np.zeros((len(coords), n_src))
    rows = np.arange(len(coords))
    for k, off in enumerate((-1, 0, 1, 2)):
        idx = np.clip(base + off, 0, n_src - 1)
        np.add.at(M, (rows, idx), w[:, k])
    return M


def upsample_bicubic(g, N: Size, stride: Optional[int] = None) -> Grid2D:
    """Catmull-Rom upsampling, replicate borders, clamped to the source range."""
    src = as_grid(g)
    ny, nx = _pair(N)
    _check_up(src, ny, nx)
    My = _cubic_matrix(_upsample_coords(ny, src.height, stride), src.height)
    Mx = _cubic_matrix(_upsample_coords(nx, src.width, stride), src.width)
    out = My @ src.values @ Mx.T
    out = np.clip(out, src.values.min(), src.values.max())
    spacing = src.spacing_h / stride if stride else src.spacing_h * src.width / nx
    return Grid2D(out, spacing)


def make_lr_pair(P, K, s: int, k_source: str = "hr") -> Tuple[Grid2D, Grid2D]:
    """Build the normalized (P_LR, K_LR) inputs.

    ``k_source="hr"`` resamples the given high-resolution K map.  With
    ``k_source="lr"`` the K argument is ignored and K is recomputed from the
    bilinearly upsampled P_LR instead (no access to high-resolution edges).
    """
    Pg = as_grid(P)
    if isinstance(K, BinaryMask):
        Kg = K.to_grid(Pg.spacing_h)
    else:
        Kg = as_grid(K)
    if Kg.shape != Pg.shape:
        raise DimensionMismatch(f"P {Pg.shape} and K {Kg.shape} differ")
    p_lr = uniform_downsample(Pg, s)
    p_lr_n, _ = normalize_minmax(p_lr)
    if k_source == "lr":
        from .helm_edge import k_edge_map
        from .grid import amplitude
        up = upsample_bilinear(p_lr_n, Pg.shape, stride=s)
        Kg = k_edge_map(amplitude(up)).to_grid(Pg.spacing_h)
    elif k_source != "hr":
        raise ValueError(f"unknown k_source {k_source!r}")
    if s == 1:
        k_lr = Kg
    else:
        k_lr = bilinear_resample(Kg, p_lr.shape)
    k_lr_n, _ = normalize_minmax(k_lr)
    return p_lr_n, Grid2D(k_lr_n.values, p_lr.spacing_h)
