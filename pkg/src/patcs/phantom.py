"""Procedural vessel phantoms: curved tubes with Gaussian cross-sections."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import ImageField

CUTOFF = 2.5  # profile support radius in units of the Gaussian width


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple = (42, 172)
    seed: int = 0
    n_vessels: int = 4
    radius_range: tuple = (0.5, 1.1)
    amplitude_range: tuple = (0.5, 1.0)
    margin: int = 2
    spacing: float = 11.628e-6

    def __post_init__(self):
        lo, hi = self.radius_range
        if not 0 < lo <= hi:
            raise ValueError("radius range must be positive and ordered")
        a_lo, a_hi = self.amplitude_range
        if not 0 < a_lo <= a_hi <= 1:
            raise ValueError("amplitudes must lie in (0, 1]")
        if self.n_vessels < 0 or self.margin < 1:
            raise ValueError("n_vessels must be >= 0 and margin >= 1")
        reach = self.margin + CUTOFF * hi
        if min(self.dims) <= 2 * reach + 1:
            raise ValueError(f"dims {self.dims} too small for margin {self.margin} and radius {hi}")


def _bezier(p0, p1, p2, n=600):
    t = np.linspace(0.0, 1.0, n)[:, None]
    return (1 - t) ** 2 * p0 + 2 * (1 - t) * t * p1 + t ** 2 * p2


def make_phantom(spec: PhantomSpec = PhantomSpec()) -> ImageField:
    """Tubes along random quadratic Bezier curves, combined by pointwise max.

    Each tube profile is ``a * exp(-d^2 / 2r^2)`` cut off at ``d = 2.5r`` and
    every centreline keeps ``margin + 2.5r`` voxels from the border, so the
    image vanishes near the boundary.
    """
    rng = np.random.default_rng(spec.seed)
    n1, n2 = spec.dims
    img = np.zeros(spec.dims)
    ii, jj = np.mgrid[:n1, :n2]
    pix = np.stack([ii.ravel(), jj.ravel()], axis=1).astype(float)
    for _ in range(spec.n_vessels):
        radius = rng.uniform(*spec.radius_range)
        amp = rng.uniform(*spec.amplitude_range)
        lo = spec.margin + CUTOFF * radius
        hi = np.array([n1 - 1, n2 - 1]) - lo
        # mostly lateral vessels, as seen under a planar sensor
        ends = np.stack([rng.uniform(lo, hi[0], 3), rng.uniform(lo, hi[1], 3)], axis=1)
        ends[:, 1] = np.sort(ends[:, 1])
        curve = _bezier(ends[0], ends[1], ends[2])
        d2 = np.min(((pix[:, None, :] - curve[None, ::4, :]) ** 2).sum(-1), axis=1)
        near = d2 < (CUTOFF * radius + 2) ** 2
        if np.any(near):
            d2[near] = np.min(((pix[near][:, None, :] - curve[None, :, :]) ** 2).sum(-1), axis=1)
        prof = np.where(d2 <= (CUTOFF * radius) ** 2, amp * np.exp(-d2 / (2 * radius ** 2)), 0.0)
        img = np.maximum(img, prof.reshape(spec.dims))
    img[:1, :] = img[-1:, :] = 0.0
    img[:, :1] = img[:, -1:] = 0.0
    return ImageField(np.clip(img, 0.0, 1.0), spec.spacing)
