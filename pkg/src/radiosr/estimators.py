"""scikit-learn compatible wrappers.

Inputs are single maps ``(H, W)`` or stacks ``(n_maps, H, W)`` of normalized
power.  Edge extractors and the downsampler are stateless transformers; the
super-resolver is a regressor-like estimator whose ``predict`` maps LR maps to
HR maps.  All of them support ``get_params``/``set_params``/``clone`` and drop
into a :class:`sklearn.pipeline.Pipeline`.
"""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .evaluation import nmse
from .grid import Grid2D
from .helm_edge import EdgeParams
from .recon import GuidanceMethod, SrConfig, guidance_from_method, reconstruct
from .resample import make_lr_pair, uniform_downsample
from .validation import check_maps, check_same_stack, check_unit_interval, unstack


class EdgeGuidanceTransformer(TransformerMixin, BaseEstimator):
    """Map power maps to binary guidance masks (as float arrays).

    Parameters
    ----------
    method : {"kedge", "lbp", "canny", "base"}
        ``"base"`` returns all-zero masks.
    epsilon, canny_sigma, canny_low, canny_high, lbp_edge_threshold, flip_sign
        Forwarded to :class:`~radiosr.helm_edge.EdgeParams`.
    """

    def __init__(self, method="kedge", epsilon=1e-6, canny_sigma=1.0, canny_low=0.05,
                 canny_high=0.2, lbp_edge_threshold=2, flip_sign=False, spacing_h=1.0):
        self.method = method
        self.epsilon = epsilon
        self.canny_sigma = canny_sigma
        self.canny_low = canny_low
        self.canny_high = canny_high
        self.lbp_edge_threshold = lbp_edge_threshold
        self.flip_sign = flip_sign
        self.spacing_h = spacing_h

    def _params(self):
        return EdgeParams(self.epsilon, self.canny_sigma, self.canny_low, self.canny_high,
                          self.lbp_edge_threshold, self.flip_sign)

    def fit(self, X, y=None):
        check_maps(X)
        self.method_ = GuidanceMethod.parse(self.method)
        self.edge_params_ = self._params()
        return self

    def transform(self, X):
        check_is_fitted(self, "method_")
        arr, single = check_maps(X)
        out = np.zeros_like(arr)
        for k, m in enumerate(arr):
            K = guidance_from_method(Grid2D(m, self.spacing_h), self.method_, self.edge_params_)
            if K is not None:
                out[k] = K.values
        return unstack(out, single)


class UniformDownsampler(TransformerMixin, BaseEstimator):
    """Keep every ``stride``-th cell along both axes, optionally renormalizing."""

    def __init__(self, stride=4, normalize=True):
        self.stride = stride
        self.normalize = normalize

    def fit(self, X, y=None):
        check_maps(X)
        return self

    def transform(self, X):
        arr, single = check_maps(X)
        maps = []
        for m in arr:
            if self.normalize:
                p_lr, _ = make_lr_pair(m, np.zeros(m.shape), self.stride)
            else:
                p_lr = uniform_downsample(Grid2D(m), self.stride)
            maps.append(p_lr.values)
        return unstack(np.stack(maps), single)


class RadioMapSuperResolver(RegressorMixin, BaseEstimator):
    """Edge-guided variational super-resolution.

    ``fit`` only validates and records the LR shape; the reconstruction is an
    optimization run per map in ``predict``.  ``guidance`` maps (LR or HR size,
    values in [0, 1]) are passed to ``predict``; without them the unguided
    baseline is solved.  Per-map solver results are kept in ``results_``.
    """

    def __init__(self, stride=4, lambda_data=1.0, lambda_smooth=0.1, lambda_helm=0.0,
                 k_eff=0.0, edge_weight_floor=0.05, max_iters=500, grad_tol=1e-6):
        self.stride = stride
        self.lambda_data = lambda_data
        self.lambda_smooth = lambda_smooth
        self.lambda_helm = lambda_helm
        self.k_eff = k_eff
        self.edge_weight_floor = edge_weight_floor
        self.max_iters = max_iters
        self.grad_tol = grad_tol

    def _config(self):
        return SrConfig(self.lambda_data, self.lambda_smooth, self.lambda_helm, self.k_eff,
                        self.edge_weight_floor, self.max_iters, self.grad_tol)

    def fit(self, X, y=None):
        arr, _ = check_maps(X)
        check_unit_interval(arr)
        self.config_ = self._config()
        self.lr_shape_ = arr.shape[1:]
        self.hr_shape_ = (arr.shape[1] * self.stride, arr.shape[2] * self.stride)
        return self

    def predict(self, X, guidance=None):
        check_is_fitted(self, "config_")
        arr, single = check_maps(X)
        check_unit_interval(arr)
        if guidance is not None:
            G, _ = check_maps(guidance, "guidance")
            check_unit_interval(G, "guidance")
            G = check_same_stack(arr, G)
        self.results_ = []
        out = []
        for k, m in enumerate(arr):
            g = None if guidance is None else G[k]
            res = reconstruct(m, g, self.stride, self.config_)
            self.results_.append(res)
            out.append(res.p_hat.grid.values)
        return unstack(np.stack(out), single)

    def score(self, X, y, guidance=None):
        """Negative mean NMSE of the reconstructions against HR maps ``y``."""
        pred, single = check_maps(self.predict(X, guidance))
        Y, _ = check_maps(y, "y")
        return -float(np.mean([nmse(p, t) for p, t in zip(pred, Y)]))
