"""Command-line entry point: ``radiosr <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import logging
import math
import re
import sys
from dataclasses import replace
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import diffusion
from .config import RunConfig, config_to_text, load_config
from .errors import MomentCheckFailed, RadioSRError
from .evaluation import (
    ComparisonSettings,
    ManifestRow,
    read_manifest,
    run_comparison,
    summarize,
    write_manifest,
    write_report,
    write_summary,
)
from .grid import Grid2D, read_rmg, write_pgm, write_pgm_pixels, write_rmg
from .recon import GuidanceMethod, guidance_from_method, reconstruct
from .resample import make_lr_pair, upsample_bilinear
from .scenegen import building_mask, gen_scene, simulate_pathloss

log = logging.getLogger("radiosr")


# --- helpers -----------------------------------------------------------------

def _config(args) -> RunConfig:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        overrides["workers"] = args.workers
    if getattr(args, "stride", None) is not None:
        overrides["stride"] = args.stride
    if getattr(args, "out", None) is not None:
        overrides["output_dir"] = args.out
    for attr, key in (("lambda_data", "sr.lambda_data"), ("lambda_smooth", "sr.lambda_smooth"),
                      ("lambda_helm", "sr.lambda_helm"), ("count", "scene.count"),
                      ("size", "scene.N")):
        if getattr(args, attr, None) is not None:
            overrides[key] = getattr(args, attr)
    return load_config(getattr(args, "config", None), overrides)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _map_id(path) -> str:
    stem = Path(path).stem
    m = re.match(r"^(?:gt|plr)_(.+)$", stem)
    return m.group(1) if m else stem


def _gen_one(args):
    seed, cfg, out = args
    scene = gen_scene(seed, cfg.scene)
    rm, _ = simulate_pathloss(scene, cfg.prop)
    mask = building_mask(scene)
    scene_path = f"scene_{seed}.txt"
    gt_path = f"gt_{seed}.rmg"
    mask_path = f"mask_{seed}.rmg"
    scene.save(out / scene_path)
    write_rmg(rm.grid, out / gt_path)
    write_pgm(rm.grid, out / f"gt_{seed}.pgm")
    write_rmg(mask.to_grid(rm.grid.spacing_h), out / mask_path)
    return ManifestRow(seed, scene_path, gt_path, mask_path)


def generate(cfg: RunConfig) -> List[ManifestRow]:
    """Generate ``scene.count`` scenes with seeds ``seed, seed+1, ...``."""
    out = _out_dir(cfg)
    jobs = [(cfg.seed + i, cfg, out) for i in range(cfg.scene_count)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_gen_one, jobs))
    else:
        rows = [_gen_one(j) for j in jobs]
    write_manifest(rows, out / "manifest.csv")
    return rows


def _settings(cfg: RunConfig, out: Optional[Path]) -> ComparisonSettings:
    return ComparisonSettings(
        stride=cfg.stride, sr_config=cfg.sr, edge_params=cfg.edge, methods=tuple(cfg.methods),
        guidance_res=cfg.guidance_res, out_dir=str(out) if out else None,
        write_panels=cfg.panels)


def evaluate(cfg: RunConfig, manifest_path) -> int:
    out = _out_dir(cfg)
    rows = read_manifest(manifest_path)
    outcomes = run_comparison(rows, _settings(cfg, out), workers=cfg.workers)
    write_report(outcomes, out / "report.csv")
    write_summary(summarize(outcomes, cfg.methods), out / "summary.csv")
    failed = [o for o in outcomes if o.error]
    for o in failed:
        print(f"scene {o.seed} failed: {o.error}", file=sys.stderr)
    return 1 if failed else 0


def _write_run_config(cfg: RunConfig, out: Path):
    # workers and output_dir do not affect results; keep them out for byte-identity
    text = "".join(line + "\n" for line in config_to_text(cfg).splitlines()
                   if not line.startswith(("workers", "output_dir")))
    (out / "run_config.txt").write_text(text)


# --- subcommands ---------------------------------------------------------------

def cmd_gen(args) -> int:
    cfg = _config(args)
    rows = generate(cfg)
    _write_run_config(cfg, _out_dir(cfg))
    print(f"wrote {len(rows)} scenes to {cfg.output_dir}")
    return 0


def cmd_edge(args) -> int:
    cfg = _config(args)
    out = _out_dir(cfg)
    gt = read_rmg(args.input)
    method = GuidanceMethod.parse(args.method)
    K = guidance_from_method(gt, method, cfg.edge)
    if K is None:
        print("method 'base' has no edge map", file=sys.stderr)
        return 2
    name = f"k_{method.value}_{_map_id(args.input)}"
    write_rmg(K, out / f"{name}.rmg")
    write_pgm(K, out / f"{name}.pgm")
    print(out / f"{name}.rmg")
    return 0


def cmd_down(args) -> int:
    cfg = _config(args)
    out = _out_dir(cfg)
    gt = read_rmg(args.input)
    method = GuidanceMethod.parse(args.method)
    K = guidance_from_method(gt, method, cfg.edge)
    if K is None:
        K = Grid2D(np.zeros(gt.shape), gt.spacing_h)
    p_lr, k_lr = make_lr_pair(gt, K, cfg.stride)
    mid = _map_id(args.input)
    write_rmg(p_lr, out / f"plr_{mid}.rmg")
    write_pgm(p_lr, out / f"plr_{mid}.pgm")
    if method is not GuidanceMethod.NONE:
        write_rmg(k_lr, out / f"klr_{method.value}_{mid}.rmg")
    print(out / f"plr_{mid}.rmg")
    return 0


def cmd_sr(args) -> int:
    cfg = _config(args)
    out = _out_dir(cfg)
    p_lr = read_rmg(args.input)
    s = cfg.stride
    method = GuidanceMethod.parse(args.method)
    if args.guidance:
        guidance = read_rmg(args.guidance)
    elif method is GuidanceMethod.NONE:
        guidance = None
    else:
        # no high-resolution map available: extract edges from the upsampled input
        up = upsample_bilinear(p_lr, (p_lr.height * s, p_lr.width * s), stride=s)
        guidance = guidance_from_method(up, method, cfg.edge)
    res = reconstruct(p_lr, guidance, s, cfg.sr)
    write_rmg(res.p_hat.grid, out / "p_hat.rmg")
    write_pgm(res.p_hat.grid, out / "p_hat.pgm")
    with (out / "energy_trace.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("iteration", "energy"))
        for k, e in enumerate(res.energy_trace):
            w.writerow((k, repr(float(e))))
    print(f"iterations={res.iterations} energy={res.final_energy:.6g} converged={res.converged}")
    return 0


def histogram_pixels(x: np.ndarray, lo: float, hi: float, bins: int = 64,
                     height: int = 48) -> np.ndarray:
    counts, _ = np.histogram(x, bins=bins, range=(lo, hi))
    top = max(int(counts.max()), 1)
    bars = np.ceil(counts / top * height).astype(int)
    img = np.zeros((height, bins), dtype=np.uint8)
    for j, b in enumerate(bars):
        if b:
            img[height - b:, j] = 255
    return img


def run_ddm_demo(steps: int, samples: int, seed: int, mu0: float, var0: float,
                 out: Path, posterior_sampling: bool = True):
    """Sample N(mu0, var0) with the oracle denoiser; returns (mean, var, passed)."""
    rng = np.random.default_rng(seed)
    x1 = rng.standard_normal(samples)
    rows = [(0, 1.0, float(x1.mean()), float(x1.var(ddof=1)))]

    def denoise(x, t, z):
        return diffusion.gaussian_oracle_denoiser(x, t, mu0, var0, z)

    def record(k, t, x):
        rows.append((k, t, float(x.mean()), float(x.var(ddof=1))))

    x0 = diffusion.ddm_sample_chain(x1, steps, denoise, rng, record, posterior_sampling)
    with (out / "ddm_trace.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("step", "t", "mean", "var"))
        for k, t, m, v in rows:
            w.writerow((k, repr(t), repr(m), repr(v)))
    sd = math.sqrt(var0)
    write_pgm_pixels(histogram_pixels(x0, mu0 - 4 * sd - 1e-9, mu0 + 4 * sd + 1e-9),
                     out / "ddm_hist.pgm")
    mean = float(x0.mean())
    var = float(x0.var(ddof=1))
    se_mean = math.sqrt(var0 / samples)
    se_var = var0 * math.sqrt(2.0 / (samples - 1))
    passed = abs(mean - mu0) <= 4 * se_mean and abs(var - var0) <= 4 * se_var
    return mean, var, passed


def cmd_ddm_demo(args) -> int:
    cfg = _config(args)
    steps = args.steps if args.steps is not None else cfg.ddm_steps
    samples = args.samples if args.samples is not None else cfg.ddm_samples
    if steps < 2:
        args.parser.error("ddm-demo needs --steps >= 2")
    if samples < 2:
        args.parser.error("ddm-demo needs --samples >= 2")
    posterior = cfg.ddm_posterior_sampling and not args.mean_denoiser
    out = _out_dir(cfg)
    mean, var, passed = run_ddm_demo(steps, samples, cfg.seed, cfg.ddm_mu0, cfg.ddm_var0,
                                     out, posterior)
    print(f"mean={mean:.6f} var={var:.6f} target=({cfg.ddm_mu0}, {cfg.ddm_var0}) "
          f"{'PASS' if passed else 'FAIL'}")
    if not passed:
        raise MomentCheckFailed("final moments outside the 4-standard-error band")
    return 0


def cmd_eval(args) -> int:
    cfg = _config(args)
    if args.method:
        cfg = replace(cfg, methods=tuple(GuidanceMethod.parse(m) for m in args.method))
    return evaluate(cfg, args.manifest)


def cmd_pipeline(args) -> int:
    cfg = _config(args)
    if args.method:
        cfg = replace(cfg, methods=tuple(GuidanceMethod.parse(m) for m in args.method))
    out = _out_dir(cfg)
    generate(cfg)
    _write_run_config(cfg, out)
    return evaluate(cfg, out / "manifest.csv")


# --- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radiosr", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, stride=False, method=False):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--workers", type=int)
        if stride:
            p.add_argument("--stride", type=int)
        if method:
            p.add_argument("--method", default="kedge",
                           choices=[m.value for m in GuidanceMethod])
        p.set_defaults(parser=p)

    p = sub.add_parser("gen", help="generate scenes, ground-truth maps and a manifest")
    common(p)
    p.add_argument("--count", type=int, help="number of scenes")
    p.add_argument("--size", type=int, help="grid size N")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("edge", help="edge map from a ground-truth map")
    common(p, method=True)
    p.add_argument("input", help="power map .rmg")
    p.set_defaults(func=cmd_edge)

    p = sub.add_parser("down", help="build the low-resolution (P_LR, K_LR) pair")
    common(p, stride=True, method=True)
    p.add_argument("input", help="power map .rmg")
    p.set_defaults(func=cmd_down)

    p = sub.add_parser("sr", help="reconstruct a high-resolution map")
    common(p, stride=True, method=True)
    p.add_argument("input", help="P_LR .rmg")
    p.add_argument("--guidance", help="guidance map .rmg (LR or HR size)")
    p.add_argument("--lambda-data", type=float, dest="lambda_data")
    p.add_argument("--lambda-smooth", type=float, dest="lambda_smooth")
    p.add_argument("--lambda-helm", type=float, dest="lambda_helm")
    p.set_defaults(func=cmd_sr)

    p = sub.add_parser("ddm-demo", help="oracle-denoiser reverse diffusion demo")
    common(p)
    p.add_argument("--steps", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--mean-denoiser", action="store_true",
                   help="use the posterior-mean denoiser instead of posterior draws")
    p.set_defaults(func=cmd_ddm_demo)

    p = sub.add_parser("eval", help="compare guidance methods over a manifest")
    common(p, stride=True)
    p.add_argument("manifest")
    p.add_argument("--method", action="append", choices=[m.value for m in GuidanceMethod])
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pipeline", help="gen + eval end to end")
    common(p, stride=True)
    p.add_argument("--count", type=int, help="number of scenes")
    p.add_argument("--size", type=int, help="grid size N")
    p.add_argument("--method", action="append", choices=[m.value for m in GuidanceMethod])
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except RadioSRError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
