"""Run configuration: flat ``key = value`` text with dotted section prefixes.

Example::

    seed = 7
    stride = 4
    scene.count = 20
    scene.N = 128
    sr.lambda_smooth = 0.1

Blank lines and ``#`` comments are ignored.  Unknown keys are an error.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, Tuple

from .diffusion import LossWeights
from .errors import ConfigError
from .evaluation import DEFAULT_METHODS
from .helm_edge import EdgeParams
from .recon import BacktrackingLineSearch, FixedStep, GuidanceMethod, SrConfig
from .scenegen import PropagationParams, SceneConfig


def _bool(v: str) -> bool:
    low = v.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _methods(v: str) -> tuple:
    return tuple(GuidanceMethod.parse(m.strip()) for m in v.split(",") if m.strip())


# key -> (section, attribute, parser)
_KEYS: Dict[str, Tuple[str, str, Callable]] = {
    "seed": ("", "seed", int),
    "stride": ("", "stride", int),
    "workers": ("", "workers", int),
    "output_dir": ("", "output_dir", str),
    "scene.count": ("", "scene_count", int),
    "scene.N": ("scene", "N", int),
    "scene.spacing": ("scene", "spacing_h", float),
    "scene.buildings_min": ("scene", "buildings_min", int),
    "scene.buildings_max": ("scene", "buildings_max", int),
    "scene.size_min": ("scene", "size_min", int),
    "scene.size_max": ("scene", "size_max", int),
    "prop.tx_power_dbm": ("prop", "tx_power_dbm", float),
    "prop.freq_hz": ("prop", "freq_hz", float),
    "prop.wall_loss_db": ("prop", "wall_loss_db", float),
    "prop.floor_dbm": ("prop", "floor_dbm", float),
    "edge.epsilon": ("edge", "epsilon", float),
    "edge.canny_sigma": ("edge", "canny_sigma", float),
    "edge.canny_low": ("edge", "canny_low", float),
    "edge.canny_high": ("edge", "canny_high", float),
    "edge.lbp_threshold": ("edge", "lbp_edge_threshold", int),
    "edge.flip_sign": ("edge", "flip_sign", _bool),
    "sr.lambda_data": ("sr", "lambda_data", float),
    "sr.lambda_smooth": ("sr", "lambda_smooth", float),
    "sr.lambda_helm": ("sr", "lambda_helm", float),
    "sr.k_eff": ("sr", "k_eff", float),
    "sr.edge_weight_floor": ("sr", "edge_weight_floor", float),
    "sr.max_iters": ("sr", "max_iters", int),
    "sr.grad_tol": ("sr", "grad_tol", float),
    "sr.fixed_step": ("sr", "fixed_step", float),
    "loss.lambda1": ("loss", "lambda1", float),
    "loss.lambda2": ("loss", "lambda2", float),
    "loss.lambda3": ("loss", "lambda3", float),
    "eval.methods": ("", "methods", _methods),
    "eval.guidance_res": ("", "guidance_res", str),
    "eval.panels": ("", "panels", _bool),
    "ddm.steps": ("", "ddm_steps", int),
    "ddm.samples": ("", "ddm_samples", int),
    "ddm.mu0": ("", "ddm_mu0", float),
    "ddm.var0": ("", "ddm_var0", float),
    "ddm.posterior_sampling": ("", "ddm_posterior_sampling", _bool),
}


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    stride: int = 4
    workers: int = 1
    output_dir: str = "out"
    scene_count: int = 1
    scene: SceneConfig = field(default_factory=SceneConfig)
    prop: PropagationParams = field(default_factory=PropagationParams)
    edge: EdgeParams = field(default_factory=EdgeParams)
    sr: SrConfig = field(default_factory=SrConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    methods: tuple = DEFAULT_METHODS
    guidance_res: str = "lr"
    panels: bool = True
    ddm_steps: int = 200
    ddm_samples: int = 10_000
    ddm_mu0: float = 1.5
    ddm_var0: float = 0.25
    ddm_posterior_sampling: bool = True

    def __post_init__(self):
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        if self.stride < 1:
            raise ConfigError("stride must be positive")
        if self.scene_count < 1:
            raise ConfigError("scene.count must be positive")
        if self.scene.N % self.stride:
            raise ConfigError(f"scene.N={self.scene.N} not divisible by stride={self.stride}")
        if self.guidance_res not in ("lr", "hr"):
            raise ConfigError("eval.guidance_res must be 'lr' or 'hr'")


def parse_config_text(text: str) -> Dict[str, str]:
    pairs: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        pairs[key] = val
    return pairs


def build_config(pairs: Dict[str, str]) -> RunConfig:
    """Turn parsed key/value strings into a validated :class:`RunConfig`."""
    top: Dict[str, object] = {}
    sections: Dict[str, Dict[str, object]] = {s: {} for s in ("scene", "prop", "edge", "sr", "loss")}
    for key, raw in pairs.items():
        if key not in _KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        section, attr, parse = _KEYS[key]
        try:
            value = parse(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
        (sections[section] if section else top)[attr] = value
    try:
        sc = sections["scene"]
        base_scene = SceneConfig()
        scene = SceneConfig(
            N=sc.get("N", base_scene.N),
            spacing_h=sc.get("spacing_h", base_scene.spacing_h),
            building_count_range=(sc.get("buildings_min", base_scene.building_count_range[0]),
                                  sc.get("buildings_max", base_scene.building_count_range[1])),
            size_range=(sc.get("size_min", base_scene.size_range[0]),
                        sc.get("size_max", base_scene.size_range[1])),
        )
        sr_kw = dict(sections["sr"])
        fixed = sr_kw.pop("fixed_step", None)
        if fixed is not None:
            sr_kw["step_rule"] = FixedStep(fixed)
        return RunConfig(
            scene=scene,
            prop=PropagationParams(**sections["prop"]),
            edge=EdgeParams(**sections["edge"]),
            sr=SrConfig(**sr_kw),
            loss=LossWeights(**sections["loss"]),
            **top,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path=None, overrides: Dict[str, str] = None) -> RunConfig:
    """Read ``path`` (if given), apply ``overrides``, then the RMSUP_WORKERS env var."""
    pairs = parse_config_text(Path(path).read_text()) if path else {}
    for key, val in (overrides or {}).items():
        if val is not None:
            pairs[key] = str(val)
    env_workers = os.environ.get("RMSUP_WORKERS")
    if env_workers:
        pairs["workers"] = env_workers
    return build_config(pairs)


def config_to_text(cfg: RunConfig) -> str:
    """Render every key so the exact run can be repeated."""
    lines = []
    for key, (section, attr, _) in _KEYS.items():
        if section == "scene":
            v = {"N": cfg.scene.N, "spacing_h": cfg.scene.spacing_h,
                 "buildings_min": cfg.scene.building_count_range[0],
                 "buildings_max": cfg.scene.building_count_range[1],
                 "size_min": cfg.scene.size_range[0], "size_max": cfg.scene.size_range[1]}[attr]
        elif section == "sr" and attr == "fixed_step":
            if not isinstance(cfg.sr.step_rule, FixedStep):
                continue
            v = cfg.sr.step_rule.eta
        elif section:
            v = getattr(getattr(cfg, section), attr)
        else:
            v = getattr(cfg, attr)
        if attr == "methods":
            v = ",".join(GuidanceMethod.parse(m).value for m in v)
        if isinstance(v, bool):
            v = "true" if v else "false"
        lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"
