"""Curvelets restricted to the orientations a planar sensor can record.

Data live on a ``(time, sensor)`` grid.  A wavefront reaching the sensor at
angle ``beta`` (measured from the time-frequency axis in units where the
sound speed is one voxel per sample) is physical only for ``|beta| <= pi/4``;
the admissible set is the double wedge ``[-theta_w, theta_w]`` around that
axis.  Wedges are named by compass cones: ``E``/``W`` are centred on the
time-frequency axis, ``N``/``S`` on the sensor-frequency axis.  Because
frequencies are normalized per axis, slopes inside a cone convert to
physical angles through the voxel sound speed ``cv``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curvelet import CurveletCoeffs, Tiling
from .grids import DataField


@dataclass(frozen=True)
class WedgeAngle:
    scale: int
    angle: int
    quadrant: str
    l: int
    beta_hat: float
    beta: float
    in_range: bool


class WedgeSpec:
    """Admissible double wedge plus the discrete angle of every wedge of a tiling."""

    def __init__(self, tiling: Tiling, cv: float, theta_w: float = math.pi / 4):
        if not 0 < cv <= 1:
            raise ValueError(f"cv must lie in (0, 1], got {cv}")
        if not 0 < theta_w <= math.pi / 2:
            raise ValueError("theta_w must lie in (0, pi/2]")
        self.tiling = tiling
        self.cv = float(cv)
        self.theta_w = float(theta_w)
        self.angles = []
        mask = np.zeros(tiling.n_coeffs, dtype=bool)
        for w in tiling.wedges:
            entry = self._classify(w)
            self.angles.append(entry)
            if entry.in_range:
                mask[w.offset: w.offset + w.size] = True
        self.mask = mask
        self.mask.flags.writeable = False

    def _classify(self, w):
        if w.cone in ("coarse", "wavelet"):
            return WedgeAngle(w.scale, w.angle, "-", 0, 0.0, 0.0, True)
        L = self.tiling.angles_at(w.scale)
        l = int(round(w.slope * L / 8 + 0.5))
        if w.cone == "v":
            quadrant = "EW"[w.part]
            beta_hat = math.atan(self.cv * w.slope)
            beta = beta_hat
        else:
            quadrant = "NS"[w.part]
            beta_hat = math.atan(w.slope / self.cv)
            beta = math.atan2(self.cv, w.slope)
            if beta > math.pi / 2:
                beta -= math.pi
        inside = abs(beta) <= self.theta_w + 1e-12
        return WedgeAngle(w.scale, w.angle, quadrant, l, beta_hat, beta, inside)

    def angle(self, scale, angle) -> WedgeAngle:
        for a in self.angles:
            if a.scale == scale and a.angle == angle:
                return a
        raise KeyError((scale, angle))

    def in_range_count(self, scale):
        return sum(a.in_range for a in self.angles if a.scale == scale)

    def project(self, vec):
        return np.where(self.mask, vec, 0.0)


def discrete_angles(tiling: Tiling, cv: float, theta_w: float = math.pi / 4) -> WedgeSpec:
    return WedgeSpec(tiling, cv, theta_w)


def project_range(coeffs, spec: WedgeSpec):
    if isinstance(coeffs, CurveletCoeffs):
        if coeffs.tiling is not spec.tiling:
            raise ValueError("coefficients and wedge spec use different tilings")
        return CurveletCoeffs(spec.project(coeffs.data), coeffs.tiling)
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != spec.mask.shape:
        raise ValueError("coefficient vector does not match the wedge spec's tiling")
    return spec.project(coeffs)


class WedgeFrame:
    """The restricted frame as a pair of flat-vector operators."""

    def __init__(self, tiling: Tiling, spec: WedgeSpec):
        if spec.tiling is not tiling:
            raise ValueError("wedge spec was built for a different tiling")
        self.tiling = tiling
        self.spec = spec
        self.dims = tiling.dims
        self.n_coeffs = tiling.n_coeffs

    def analyze(self, u):
        return self.spec.project(self.tiling.analyze(u))

    def synthesize(self, vec):
        return self.tiling.synthesize(self.spec.project(vec))


def analyze_wedge(u, tiling: Tiling, spec: WedgeSpec) -> CurveletCoeffs:
    values = u.values if isinstance(u, DataField) else u
    return CurveletCoeffs(WedgeFrame(tiling, spec).analyze(values), tiling)


def synthesize_wedge(coeffs, tiling: Tiling, spec: WedgeSpec, like: DataField | None = None):
    vec = coeffs.data if isinstance(coeffs, CurveletCoeffs) else coeffs
    out = WedgeFrame(tiling, spec).synthesize(vec)
    return like.with_values(out) if like is not None else out


def out_of_range_energy(vec, spec: WedgeSpec) -> float:
    vec = vec.data if isinstance(vec, CurveletCoeffs) else np.asarray(vec)
    return float(np.sum(vec[~spec.mask] ** 2))
