"""Acquisition geometry and the scaling rules tying image grids to data grids.

A planar sensor sits on the first image row.  Data volumes are stored as
``(n_t, n_sensor)`` arrays with time along axis 0, images as
``(n_perp, n_sensor)`` arrays with depth along axis 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


@dataclass(frozen=True)
class AcousticConfig:
    """Homogeneous medium and sampling steps.

    ``T`` is the recording duration in seconds; ``None`` means "long enough
    for the diagonal of the image to be crossed once" (see :func:`compute_n_t`).
    """

    c: float
    h_x: float
    h_t: float
    n_perp: int
    n_sensor: int
    T: float | None = None

    def __post_init__(self):
        for name in ("c", "h_x", "h_t"):
            v = getattr(self, name)
            if np.ndim(v) != 0:
                raise ValueError(f"{name} must be a scalar (homogeneous medium only)")
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive, got {v!r}")
        if self.n_perp < 1:
            raise ValueError(f"n_perp must be >= 1, got {self.n_perp}")
        if self.n_sensor < 2:
            raise ValueError(f"n_sensor must be >= 2, got {self.n_sensor}")
        if self.T is not None and not self.T > 0:
            raise ValueError(f"T must be positive, got {self.T!r}")
        if self.cv > 1.0 + 1e-12:
            raise ValueError(f"voxel sound speed c*h_t/h_x = {self.cv:.4g} > 1 (temporally aliased)")

    @classmethod
    def from_cv(cls, c, h_x, cv, n_perp, n_sensor, T=None):
        """Build a config from the voxel sound speed instead of the time step."""
        return cls(c=c, h_x=h_x, h_t=cv * h_x / c, n_perp=n_perp, n_sensor=n_sensor, T=T)

    @property
    def cv(self) -> float:
        return self.c * self.h_t / self.h_x

    @property
    def x_max(self) -> float:
        return self.h_x * math.hypot(self.n_perp, self.n_sensor)

    @property
    def T_max(self) -> float:
        return self.x_max / self.c

    @property
    def n_t(self) -> int:
        if self.T is None:
            return compute_n_t(self)
        return math.ceil(self.T / self.h_t - 1e-9)


def compute_cv(cfg: AcousticConfig) -> float:
    return cfg.c * cfg.h_t / cfg.h_x


def compute_n_t(cfg: AcousticConfig) -> int:
    # the small slack absorbs round-off when h_t itself was derived from c_v
    return math.ceil(math.hypot(cfg.n_perp, cfg.n_sensor) / compute_cv(cfg) - 1e-9)


def compute_upscale(n_t, n_perp, d: int = 2, sensor_dims=None):
    """Uniform upscaling factor making image and data voxel counts agree.

    Returns ``(alpha, dims)`` where ``dims`` is the upscaled image grid
    ``(round(alpha*n_perp), *round(alpha*sensor_dims))`` or ``None`` when no
    sensor dims are given.
    """
    if d not in (2, 3):
        raise ValueError(f"d must be 2 or 3, got {d}")
    if not n_perp >= 1:
        raise ValueError(f"n_perp must be >= 1, got {n_perp}")
    if n_t < n_perp:
        raise ValueError(f"n_t={n_t} < n_perp={n_perp}: no time oversampling to redistribute")
    alpha = (n_t / n_perp) ** (1.0 / d)
    if sensor_dims is None:
        return alpha, None
    sensor_dims = np.atleast_1d(sensor_dims)
    if len(sensor_dims) != d - 1:
        raise ValueError(f"expected {d - 1} sensor dims, got {len(sensor_dims)}")
    dims = (round_half_away(alpha * n_perp),) + tuple(round_half_away(alpha * s) for s in sensor_dims)
    return alpha, dims


@dataclass(frozen=True)
class ImageField:
    values: np.ndarray
    spacing: float

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError(f"image must be 2D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("image contains non-finite values")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class DataField:
    values: np.ndarray
    dt: float
    cv: float
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError(f"data must be 2D (n_t, n_sensor), got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("data contains non-finite values")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape

    def with_values(self, values):
        return DataField(values, self.dt, self.cv, dict(self.meta))


def bilinear_upscale(img, target_dims, scale=None):
    """Bilinear interpolation onto a grid at least as large as the source.

    By default the corner samples of both grids coincide.  With ``scale``
    given, target sample ``i`` sits at source coordinate ``i/scale`` (origins
    aligned, spacing ``h/scale``), clamped to the source extent.
    """
    is_field = isinstance(img, ImageField)
    src = img.values if is_field else np.asarray(img, dtype=float)
    target_dims = tuple(int(t) for t in target_dims)
    if len(target_dims) != src.ndim:
        raise ValueError("target dims must match image rank")
    if any(t < s for t, s in zip(target_dims, src.shape)):
        raise ValueError(f"cannot shrink {src.shape} to {target_dims}")
    axes = []
    for n_src, n_dst in zip(src.shape, target_dims):
        if scale is not None:
            x = np.arange(n_dst) / scale
        elif n_dst == 1:
            x = np.zeros(1)
        else:
            x = np.arange(n_dst) * ((n_src - 1) / (n_dst - 1))
        axes.append(np.clip(x, 0, n_src - 1))
    coords = np.meshgrid(*axes, indexing="ij")
    out = ndimage.map_coordinates(src, coords, order=1, mode="nearest")
    if is_field:
        spacing = img.spacing / scale if scale is not None else img.spacing
        return ImageField(out, spacing)
    return out
