"""Seeded synthetic urban scenes and a free-space + wall-loss pathloss model.

Scenes are axis-aligned rectangular buildings snapped to cell boundaries plus
one transmitter in free space.  Randomness comes from :class:`SplitMix64`, a
fixed 64-bit generator, so a seed produces the same scene on every platform:

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    out = z ^ (z >> 31)                      (all arithmetic mod 2**64)

Uniform floats take the top 53 bits: ``(out >> 11) * 2**-53``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import PlacementFailure, ValueOutOfRange
from .grid import BinaryMask, Grid2D, RadioMap, normalize_minmax

MASK64 = (1 << 64) - 1
MAX_REJECTIONS = 10_000

# metadata only; the 2D model ignores heights
BUILDING_HEIGHT_M = 25.0
ANTENNA_HEIGHT_M = 1.5

Rect = Tuple[float, float, float, float]


class SplitMix64:
    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Float in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def randint(self, lo: int, hi: int) -> int:
        """Integer in [lo, hi] inclusive (modulo reduction; bias is negligible here)."""
        return lo + self.next_u64() % (hi - lo + 1)


@dataclass(frozen=True)
class SceneConfig:
    N: int = 128
    spacing_h: float = 1.0
    building_count_range: Tuple[int, int] = (5, 15)
    # building side lengths in cells
    size_range: Tuple[int, int] = (6, 24)

    def __post_init__(self):
        lo, hi = self.building_count_range
        slo, shi = self.size_range
        if self.N < 32:
            raise ValueOutOfRange("scene grid must be at least 32 cells")
        if not (0 <= lo <= hi):
            raise ValueOutOfRange(f"empty building_count_range {self.building_count_range}")
        if not (1 <= slo <= shi <= self.N):
            raise ValueOutOfRange(f"invalid size_range {self.size_range}")
        if not self.spacing_h > 0:
            raise ValueOutOfRange("spacing_h must be positive")


@dataclass(frozen=True)
class Scene:
    extent_m: Tuple[float, float]
    buildings: Tuple[Rect, ...]
    tx_pos: Tuple[float, float]
    seed: int
    grid_N: int

    @property
    def spacing_h(self) -> float:
        return self.extent_m[0] / self.grid_N

    def validate(self) -> None:
        W, H = self.extent_m
        for k, (x0, y0, x1, y1) in enumerate(self.buildings):
            if not (0 <= x0 < x1 <= W and 0 <= y0 < y1 <= H):
                raise ValueOutOfRange(f"building {k} outside extent")
            for other in self.buildings[k + 1:]:
                if _overlaps((x0, y0, x1, y1), other):
                    raise ValueOutOfRange("buildings overlap")
        if any(_inside(self.tx_pos, b) for b in self.buildings):
            raise ValueOutOfRange("transmitter inside a building")

    def to_text(self) -> str:
        lines = [
            f"seed={self.seed}",
            f"N={self.grid_N}",
            f"extent={self.extent_m[0]!r},{self.extent_m[1]!r}",
            f"tx={self.tx_pos[0]!r},{self.tx_pos[1]!r}",
        ]
        lines += ["bldg=" + ",".join(repr(float(v)) for v in b) for b in self.buildings]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Scene":
        fields = {}
        buildings = []
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            key, _, val = line.partition("=")
            if key == "bldg":
                buildings.append(tuple(float(v) for v in val.split(",")))
            else:
                fields[key] = val
        ex = [float(v) for v in fields["extent"].split(",")]
        tx = [float(v) for v in fields["tx"].split(",")]
        scene = cls((ex[0], ex[1]), tuple(buildings), (tx[0], tx[1]),
                    int(fields["seed"]), int(fields["N"]))
        scene.validate()
        return scene

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path) -> "Scene":
        return cls.from_text(Path(path).read_text())


@dataclass(frozen=True)
class PropagationParams:
    tx_power_dbm: float = 23.0
    freq_hz: float = 5.9e9
    wall_loss_db: float = 10.0
    floor_dbm: float = -150.0

    def __post_init__(self):
        if not self.floor_dbm < self.tx_power_dbm:
            raise ValueOutOfRange("floor_dbm must be below tx_power_dbm")
        if not self.wall_loss_db > 0:
            raise ValueOutOfRange("wall_loss_db must be positive")
        if not self.freq_hz > 0:
            raise ValueOutOfRange("freq_hz must be positive")


def _overlaps(a: Rect, b: Rect) -> bool:
    return a[0] < b[2] and b[0] < a[2] and a[1] < b[3] and b[1] < a[3]


def _inside(p, b: Rect) -> bool:
    return b[0] <= p[0] <= b[2] and b[1] <= p[1] <= b[3]


def gen_scene(seed: int, config: SceneConfig = SceneConfig()) -> Scene:
    rng = SplitMix64(seed)
    N, h = config.N, config.spacing_h
    lo, hi = config.building_count_range
    slo, shi = config.size_range
    count = rng.randint(lo, hi)
    buildings: List[Rect] = []
    rejections = 0
    while len(buildings) < count:
        w = rng.randint(slo, shi)
        ht = rng.randint(slo, shi)
        c0 = rng.randint(0, N - w)
        r0 = rng.randint(0, N - ht)
        rect = (c0 * h, r0 * h, (c0 + w) * h, (r0 + ht) * h)
        if any(_overlaps(rect, b) for b in buildings):
            rejections += 1
            if rejections > MAX_REJECTIONS:
                raise PlacementFailure(
                    f"placed {len(buildings)}/{count} buildings after {MAX_REJECTIONS} rejections")
            continue
        buildings.append(rect)
    extent = N * h
    while True:
        tx = (rng.uniform() * extent, rng.uniform() * extent)
        if not any(_inside(tx, b) for b in buildings):
            break
        rejections += 1
        if rejections > MAX_REJECTIONS:
            raise PlacementFailure("no free space for the transmitter")
    return Scene((extent, extent), tuple(buildings), tx, int(seed), N)


def cell_centers(scene: Scene):
    h = scene.spacing_h
    c = (np.arange(scene.grid_N) + 0.5) * h
    xs, ys = np.meshgrid(c, c)  # xs varies along columns (j), ys along rows (i)
    return xs, ys


def building_mask(scene: Scene) -> BinaryMask:
    """1 where a cell center lies in a building (low edges inclusive, high exclusive)."""
    xs, ys = cell_centers(scene)
    bits = np.zeros(xs.shape, dtype=bool)
    for x0, y0, x1, y1 in scene.buildings:
        bits |= (xs >= x0) & (xs < x1) & (ys >= y0) & (ys < y1)
    return BinaryMask(bits.astype(np.uint8))


def _segment_rect_crossings(tx, xs, ys, rect: Rect) -> np.ndarray:
    """Boundary crossings of segments tx -> (xs, ys) with one rectangle.

    2 when the segment passes through the open interior, 1 when it only
    touches the boundary, 0 when it misses.
    """
    x0, y0, x1, y1 = rect
    dx = xs - tx[0]
    dy = ys - tx[1]
    t_lo = np.zeros(xs.shape)
    t_hi = np.ones(xs.shape)
    miss = np.zeros(xs.shape, dtype=bool)
    for d, p0, lo, hi in ((dx, tx[0], x0, x1), (dy, tx[1], y0, y1)):
        par = d == 0
        miss |= par & ((p0 < lo) | (p0 > hi))
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (lo - p0) / d
            tb = (hi - p0) / d
        t_near = np.where(par, -np.inf, np.minimum(ta, tb))
        t_far = np.where(par, np.inf, np.maximum(ta, tb))
        t_lo = np.maximum(t_lo, t_near)
        t_hi = np.minimum(t_hi, t_far)
    hit = ~miss & (t_lo <= t_hi)
    tm = 0.5 * (t_lo + t_hi)
    mx = tx[0] + tm * dx
    my = tx[1] + tm * dy
    through = hit & (mx > x0) & (mx < x1) & (my > y0) & (my < y1)
    return np.where(through, 2, np.where(hit, 1, 0))


def wall_crossings(scene: Scene) -> np.ndarray:
    xs, ys = cell_centers(scene)
    X = np.zeros(xs.shape, dtype=np.int64)
    for rect in scene.buildings:
        X += _segment_rect_crossings(scene.tx_pos, xs, ys, rect)
    return X


def fspl_db(d_m, freq_hz: float):
    """Free-space path loss in dB for distance in meters."""
    return 20.0 * np.log10(d_m) + 20.0 * math.log10(freq_hz) - 147.55


def simulate_pathloss(scene: Scene, params: PropagationParams = PropagationParams()):
    """Return ``(RadioMap, dbm_grid)`` for the scene.

    Free cells get ``tx_power - FSPL(d) - wall_loss * crossings`` with
    ``d >= h/2``; building cells get ``floor_dbm``.
    """
    h = scene.spacing_h
    xs, ys = cell_centers(scene)
    d = np.maximum(np.hypot(xs - scene.tx_pos[0], ys - scene.tx_pos[1]), h / 2)
    X = wall_crossings(scene)
    dbm = params.tx_power_dbm - fspl_db(d, params.freq_hz) - params.wall_loss_db * X
    dbm = np.where(building_mask(scene).bits == 1, params.floor_dbm, dbm)
    dbm = np.clip(dbm, params.floor_dbm, params.tx_power_dbm)
    dbm_grid = Grid2D(dbm, h)
    norm, bounds = normalize_minmax(dbm_grid)
    if bounds[0] == bounds[1]:
        bounds = (bounds[0], bounds[0] + 1.0)
    rm = RadioMap(norm, scene.tx_pos, params.freq_hz, bounds)
    return rm, dbm_grid
