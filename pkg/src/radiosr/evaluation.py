"""Image metrics and the guidance-comparison harness.

SSIM uses the usual constants (11x11 Gaussian window, sigma 1.5, K1 = 0.01,
K2 = 0.03, data range 1) averaged over the fully-covered ("valid") windows.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionMismatch, GridTooSmall, ZeroReference
from .grid import Grid2D, as_grid, read_rmg, to_pixels, write_pgm_pixels, write_rmg
from .helm_edge import EdgeParams
from .recon import GuidanceMethod, SrConfig, guidance_from_method, lift_guidance, reconstruct
from .resample import make_lr_pair

log = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
IOU_THRESHOLD = 10.0 / 255.0
METRICS = ("rmse", "nmse", "ssim", "psnr_db", "iou")
DEFAULT_METHODS = (GuidanceMethod.KEDGE, GuidanceMethod.LBP, GuidanceMethod.CANNY,
                   GuidanceMethod.NONE)


def _pair(p_hat, p):
    a = as_grid(p_hat).values
    b = as_grid(p).values
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    return a, b


def rmse(p_hat, p) -> float:
    a, b = _pair(p_hat, p)
    return math.sqrt(float(np.mean((a - b) ** 2)))


def nmse(p_hat, p) -> float:
    a, b = _pair(p_hat, p)
    ref = float(np.sum(b * b))
    if ref == 0.0:
        raise ZeroReference("NMSE is undefined for an all-zero reference")
    return float(np.sum((a - b) ** 2)) / ref


def psnr(p_hat, p, max_val: float = 1.0) -> float:
    """PSNR in dB; identical inputs give ``math.inf``."""
    a, b = _pair(p_hat, p)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(max_val * max_val / mse)


def _gauss_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    k = np.exp(-(x * x) / (2 * sigma * sigma))
    return k / k.sum()


def _filter_valid(a: np.ndarray, k: np.ndarray) -> np.ndarray:
    n = k.size
    rows = sliding_window_view(a, n, axis=0) @ k
    return sliding_window_view(rows, n, axis=1) @ k


def ssim_map(p_hat, p, data_range: float = 1.0) -> np.ndarray:
    a, b = _pair(p_hat, p)
    if min(a.shape) < SSIM_WINDOW:
        raise GridTooSmall(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    k = _gauss_window()
    C1 = (SSIM_K1 * data_range) ** 2
    C2 = (SSIM_K2 * data_range) ** 2
    mu_a = _filter_valid(a, k)
    mu_b = _filter_valid(b, k)
    var_a = _filter_valid(a * a, k) - mu_a * mu_a
    var_b = _filter_valid(b * b, k) - mu_b * mu_b
    cov = _filter_valid(a * b, k) - mu_a * mu_b
    num = (2 * mu_a * mu_b + C1) * (2 * cov + C2)
    den = (mu_a * mu_a + mu_b * mu_b + C1) * (var_a + var_b + C2)
    return num / den


def ssim(p_hat, p) -> float:
    return float(np.mean(ssim_map(p_hat, p)))


def iou(p_hat, p_gt, threshold: float = IOU_THRESHOLD) -> float:
    """IoU of the ``>= threshold`` foregrounds; two empty foregrounds give 1.0."""
    a, b = _pair(p_hat, p_gt)
    fa = a >= threshold
    fb = b >= threshold
    union = int(np.count_nonzero(fa | fb))
    if union == 0:
        return 1.0
    return int(np.count_nonzero(fa & fb)) / union


@dataclass
class MetricsReport:
    rmse: float
    nmse: float
    psnr_db: float
    ssim: float
    iou: float
    method_label: str
    scene_seed: int


def compute_metrics(p_hat, p_gt, free_space, method_label: str, seed: int) -> MetricsReport:
    """All five metrics.  IoU compares the reconstruction with the free-space mask."""
    return MetricsReport(
        rmse=rmse(p_hat, p_gt),
        nmse=nmse(p_hat, p_gt),
        psnr_db=psnr(p_hat, p_gt),
        ssim=ssim(p_hat, p_gt),
        iou=iou(p_hat, free_space),
        method_label=method_label,
        scene_seed=seed,
    )


@dataclass(frozen=True)
class ManifestRow:
    seed: int
    scene_path: str
    gt_path: str
    mask_path: str


MANIFEST_FIELDS = ("seed", "scene_path", "gt_path", "mask_path")


def read_manifest(path) -> List[ManifestRow]:
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        def resolve(p):
            q = Path(p)
            return str(q if q.is_absolute() else path.parent / q)
        out.append(ManifestRow(int(r["seed"]), resolve(r["scene_path"]),
                               resolve(r["gt_path"]), resolve(r["mask_path"])))
    return out


def write_manifest(rows: Sequence[ManifestRow], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_FIELDS)
        for r in rows:
            w.writerow([r.seed, r.scene_path, r.gt_path, r.mask_path])


@dataclass(frozen=True)
class ComparisonSettings:
    stride: int = 4
    sr_config: SrConfig = SrConfig()
    edge_params: EdgeParams = EdgeParams()
    methods: tuple = DEFAULT_METHODS
    # "lr": reconstruct from K_LR; "hr": from the full-resolution guidance
    guidance_res: str = "lr"
    out_dir: Optional[str] = None
    write_panels: bool = False


@dataclass
class SceneOutcome:
    seed: int
    reports: List[MetricsReport]
    error: Optional[str] = None


def _panel(gt: np.ndarray, guidance: Optional[np.ndarray], recon: np.ndarray) -> np.ndarray:
    g = np.zeros_like(gt) if guidance is None else guidance
    sep = np.full((gt.shape[0], 2), 255, dtype=np.uint8)
    return np.hstack([to_pixels(Grid2D(gt)), sep, to_pixels(Grid2D(g)), sep,
                      to_pixels(Grid2D(recon))])


def evaluate_scene(row: ManifestRow, settings: ComparisonSettings) -> SceneOutcome:
    """Reconstruct one scene under every method and score it."""
    try:
        gt = read_rmg(row.gt_path)
        mask = read_rmg(row.mask_path)
        free = 1.0 - mask.values
        out_dir = Path(settings.out_dir) if settings.out_dir else None
        reports = []
        for method in settings.methods:
            m = GuidanceMethod.parse(method)
            K = guidance_from_method(gt, m, settings.edge_params)
            K_for_lr = K if K is not None else Grid2D(np.zeros(gt.shape), gt.spacing_h)
            p_lr, k_lr = make_lr_pair(gt, K_for_lr, settings.stride)
            if K is None:
                guide = None
            elif settings.guidance_res == "hr":
                guide = K
            else:
                guide = k_lr
            res = reconstruct(p_lr, guide, settings.stride, settings.sr_config)
            p_hat = res.p_hat.grid
            reports.append(compute_metrics(p_hat, gt, free, m.value, row.seed))
            if out_dir is not None:
                if K is not None:
                    write_rmg(K, out_dir / f"k_{m.value}_{row.seed}.rmg")
                write_rmg(p_hat, out_dir / f"phat_{m.value}_{row.seed}.rmg")
                if settings.write_panels:
                    shown = None if guide is None else lift_guidance(guide, gt.shape).values
                    write_pgm_pixels(_panel(gt.values, shown, p_hat.values),
                                     out_dir / f"panel_{m.value}_{row.seed}.pgm")
        return SceneOutcome(row.seed, reports)
    except Exception as exc:  # a failed scene is recorded, not fatal
        log.error("scene %s failed: %s", row.seed, exc)
        return SceneOutcome(row.seed, [], f"{type(exc).__name__}: {exc}")


def _evaluate_star(args):
    return evaluate_scene(*args)


def run_comparison(manifest: Sequence[ManifestRow], settings: ComparisonSettings = ComparisonSettings(),
                   workers: int = 1) -> List[SceneOutcome]:
    """Evaluate every scene; results come back in manifest order for any ``workers``."""
    rows = list(manifest)
    if not rows:
        raise ValueError("manifest has no scenes")
    jobs = [(r, settings) for r in rows]
    if workers <= 1:
        return [evaluate_scene(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_evaluate_star, jobs))


def _fmt(v: float) -> str:
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(float(v))


REPORT_FIELDS = ("seed", "method", "rmse", "nmse", "ssim", "psnr_db", "iou")


def write_report(outcomes: Iterable[SceneOutcome], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_FIELDS)
        for o in outcomes:
            for r in o.reports:
                w.writerow([r.scene_seed, r.method_label] + [_fmt(getattr(r, k)) for k in METRICS])


def summarize(outcomes: Iterable[SceneOutcome], methods=DEFAULT_METHODS) -> List[dict]:
    by_method: Dict[str, List[MetricsReport]] = {}
    for o in outcomes:
        for r in o.reports:
            by_method.setdefault(r.method_label, []).append(r)
    rows = []
    for method in methods:
        label = GuidanceMethod.parse(method).value
        reps = by_method.get(label, [])
        for metric in METRICS:
            vals = np.array([getattr(r, metric) for r in reps], dtype=np.float64)
            if vals.size and np.all(np.isfinite(vals)):
                mean, std = float(vals.mean()), float(vals.std())
            elif vals.size:
                mean, std = float(np.mean(vals)), math.nan
            else:
                mean = std = math.nan
            rows.append({"method": label, "metric": metric, "mean": mean, "std": std,
                         "n": int(vals.size)})
    return rows


def write_summary(rows: Sequence[dict], path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("method", "metric", "mean", "std", "n"))
        for r in rows:
            w.writerow([r["method"], r["metric"], _fmt(r["mean"]), _fmt(r["std"]), r["n"]])
