"""Image quality scores against a reference."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from skimage.metrics import structural_similarity

from .grids import ImageField


@dataclass(frozen=True)
class MetricsReport:
    mse: float
    ssim: float
    psnr: float
    snr: float

    FIELDS = ("mse", "ssim", "psnr", "snr")

    def as_row(self):
        return {k: getattr(self, k) for k in self.FIELDS}


def _values(img):
    return np.asarray(img.values if isinstance(img, ImageField) else img, dtype=float)


def peak(ref):
    return float(np.max(np.abs(ref)))


def ssim(rec, ref):
    """Gaussian-window SSIM (11x11, sigma 1.5) with data range ``peak(ref)``."""
    rec, ref = _values(rec), _values(ref)
    return float(structural_similarity(
        ref, rec, data_range=peak(ref), gaussian_weights=True, sigma=1.5,
        use_sample_covariance=False, K1=0.01, K2=0.03,
    ))


def metrics(rec, ref) -> MetricsReport:
    """MSE, SSIM, PSNR and SNR of ``rec`` against ``ref``; exact matches give ``inf``."""
    rec, ref = _values(rec), _values(ref)
    if rec.shape != ref.shape:
        raise ValueError(f"shape mismatch: {rec.shape} vs {ref.shape}")
    err = ref - rec
    mse = float(np.mean(err ** 2))
    err_norm = float(np.linalg.norm(err))
    if mse == 0.0:
        psnr = snr = math.inf
    else:
        psnr = 10 * math.log10(peak(ref) ** 2 / mse)
        snr = 20 * math.log10(float(np.linalg.norm(ref)) / err_norm)
    return MetricsReport(mse=mse, ssim=ssim(rec, ref), psnr=psnr, snr=snr)
