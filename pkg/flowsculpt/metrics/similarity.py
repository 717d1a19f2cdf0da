"""
Pixel match rate and windowed structural similarity of binary rasters.
"""
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .exceptions import MetricInputError


def _pair(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise MetricInputError(f'images differ in size: {p.shape} vs {q.shape}')
    if p.size == 0:
        raise MetricInputError('images are empty')
    return p, q


def pmr(p, p_hat):
    """
    1 minus the fraction of mismatched pixels.
    """
    p, p_hat = _pair(p, p_hat)
    return float(1.0 - np.abs(p - p_hat).sum() / p.size)


@dataclass(frozen=True)
class SsimParams:
    """
    Attributes:
        k1 (float): Luminance stabiliser factor.
        k2 (float): Contrast stabiliser factor.
        dynamic_range (float): L, 1 for binary rasters.
        window (int): Side of the square uniform window.
        stride (int): Step between windows.
    """
    k1: float = 0.01
    k2: float = 0.03
    dynamic_range: float = 1.0
    window: int = 8
    stride: int = 1

    def __post_init__(self):
        if self.dynamic_range <= 0:
            raise MetricInputError(f'dynamic range must be positive, got {self.dynamic_range}')
        if self.window < 1 or self.stride < 1:
            raise MetricInputError('window and stride must be at least 1')

    @property
    def c1(self):
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self):
        return (self.k2 * self.dynamic_range) ** 2


def ssim(x, y, params=None):
    """
    Mean over all windows of
    (2 mu_x mu_y + c1)(2 sigma_xy + c2) / ((mu_x^2 + mu_y^2 + c1)(sigma_x^2 + sigma_y^2 + c2)),
    with population (co)variances inside each window.

    Raises:
        MetricInputError: If sizes differ or an image is smaller than the window.
    """
    params = params or SsimParams()
    x, y = _pair(x, y)
    if x.ndim != 2 or min(x.shape) < params.window:
        raise MetricInputError(f'image {x.shape} is smaller than the {params.window}x{params.window} window')
    shape = (params.window, params.window)
    wx = sliding_window_view(x, shape)[::params.stride, ::params.stride]
    wy = sliding_window_view(y, shape)[::params.stride, ::params.stride]
    mu_x = wx.mean(axis=(-2, -1))
    mu_y = wy.mean(axis=(-2, -1))
    dx = wx - mu_x[..., None, None]
    dy = wy - mu_y[..., None, None]
    var_x = (dx * dx).mean(axis=(-2, -1))
    var_y = (dy * dy).mean(axis=(-2, -1))
    cov = (dx * dy).mean(axis=(-2, -1))
    numerator = (2 * mu_x * mu_y + params.c1) * (2 * cov + params.c2)
    denominator = (mu_x * mu_x + mu_y * mu_y + params.c1) * (var_x + var_y + params.c2)
    return float((numerator / denominator).mean())
