"""Edge-guided radio map super-resolution toolkit."""

from .grid import (
    AmplitudeMap,
    BinaryMask,
    Grid2D,
    RadioMap,
    amplitude,
    normalize_minmax,
    read_rmg,
    write_pgm,
    write_rmg,
)
from .helm_edge import EdgeParams, canny, k_edge_map, k_eff_sq, k_log, laplacian5, lbp_edge
from .recon import GuidanceMethod, SrConfig, SrResult, guidance_from_method, reconstruct
from .resample import bilinear_resample, make_lr_pair, uniform_downsample
from .scenegen import PropagationParams, Scene, SceneConfig, gen_scene, simulate_pathloss
from .estimators import EdgeGuidanceTransformer, RadioMapSuperResolver, UniformDownsampler

__version__ = "0.1.0"
