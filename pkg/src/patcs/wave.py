"""Spectral wave propagation in a homogeneous medium with a line sensor.

All operators share one discretization: the image grid is embedded in a
zero-padded periodic grid, large enough that nothing wraps around onto the
sensor within the recording time, and advanced by the exact two-step rule

    p[n+1] = 2 cos(c dt |k|) p[n] - p[n-1],    p[1] = cos(c dt |k|) p[0].

The sensor records row 0 of the image.  Because the rule is exact its
solution is ``p[n] = cos(n c dt |k|) p[0]``; :class:`Propagator` tabulates the
sensor response per lateral wavenumber once, which makes the forward map and
its transpose two small batched matrix products instead of ``n_t`` padded
FFT pairs.  The literal time stepping is kept in :meth:`Propagator.fields` and is what
time reversal uses.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import fft as sfft

from .grids import AcousticConfig, DataField, ImageField, round_half_away

# Pressure imposed on a line radiates into both half-spaces, so re-emission
# delivers half the amplitude to the image side.
HALF_SPACE_GAIN = 2.0


class Propagator:
    """Discretized forward/adjoint/time-reversal operators for one geometry.

    Parameters
    ----------
    c, dt, n_t : sound speed, time step and number of recorded samples.
    spacing : image voxel size.
    shape : image grid ``(n_rows, n_cols)``; row 0 is the sensor line.
    sensor_x : lateral sensor coordinates in units of ``spacing``.  Defaults
        to one sensor per image column.
    """

    def __init__(self, c, dt, n_t, spacing, shape, sensor_x=None):
        if np.ndim(c) != 0:
            raise ValueError("heterogeneous sound speed is not supported")
        if not (c > 0 and dt > 0 and spacing > 0):
            raise ValueError("c, dt and spacing must be positive")
        self.c = float(c)
        self.dt = float(dt)
        self.n_t = int(n_t)
        self.h = float(spacing)
        self.shape = tuple(int(s) for s in shape)
        n_rows, n_cols = self.shape
        if self.n_t < 1 or n_rows < 1 or n_cols < 1:
            raise ValueError("empty grid")
        if sensor_x is None:
            sensor_x = np.arange(n_cols, dtype=float)
        self.sensor_x = np.asarray(sensor_x, dtype=float)
        if self.sensor_x.min() < 0 or self.sensor_x.max() > n_cols - 1:
            raise ValueError("sensors must lie within the image's lateral extent")
        self.sensor_row = 0
        self.travel = math.ceil(self.c * self.dt * self.n_t / self.h)
        self.padded_shape = (
            sfft.next_fast_len(n_rows + self.travel + 1, real=True),
            sfft.next_fast_len(n_cols + self.travel + 1, real=True),
        )
        self.pad = (self.padded_shape[0] - n_rows, self.padded_shape[1] - n_cols)
        self._kernel = None
        self._cos_table = None
        self._lateral = None

    @classmethod
    def from_config(cls, cfg: AcousticConfig, alpha=None, n_t=None):
        """Operators for ``cfg`` on the acquisition grid (``alpha=None``) or on
        the grid upscaled by ``alpha`` with sensors at every ``alpha``-th voxel."""
        n_t = cfg.n_t if n_t is None else int(n_t)
        if alpha is None:
            return cls(cfg.c, cfg.h_t, n_t, cfg.h_x, (cfg.n_perp, cfg.n_sensor))
        dims = (round_half_away(alpha * cfg.n_perp), round_half_away(alpha * cfg.n_sensor))
        sensor_x = np.minimum(np.arange(cfg.n_sensor) * alpha, dims[1] - 1)
        return cls(cfg.c, cfg.h_t, n_t, cfg.h_x / alpha, dims, sensor_x)

    @property
    def n_sensor(self):
        return self.sensor_x.size

    @property
    def data_shape(self):
        return (self.n_t, self.n_sensor)

    @property
    def courant(self):
        return self.c * self.dt / self.h

    def wavenumbers(self):
        """Angular wavenumbers (depth: full FFT layout, lateral: real-FFT layout)."""
        n_p, n_l = self.padded_shape
        k_depth = 2 * np.pi * np.fft.fftfreq(n_p, self.h)
        k_lat = 2 * np.pi * np.fft.rfftfreq(n_l, self.h)
        return k_depth, k_lat

    @property
    def cos_table(self):
        """``cos(c dt |k|)`` on the padded grid, real-FFT layout."""
        if self._cos_table is None:
            k_depth, k_lat = self.wavenumbers()
            kk = np.hypot(k_depth[:, None], k_lat[None, :])
            self._cos_table = np.cos(self.c * self.dt * kk)
        return self._cos_table

    # -- sensor-restricted response ------------------------------------------
    def _lateral_matrices(self):
        # band-limited evaluation of the lateral inverse real FFT at sensor_x
        if self._lateral is None:
            n_l = self.padded_shape[1]
            k = np.arange(n_l // 2 + 1)
            w = np.full(k.size, 2.0)
            w[0] = 1.0
            if n_l % 2 == 0:
                w[-1] = 1.0
            phase = 2 * np.pi * np.outer(k, self.sensor_x) / n_l
            self._lateral = (w[:, None] / n_l * np.cos(phase), w[:, None] / n_l * np.sin(phase))
        return self._lateral

    @property
    def kernel(self):
        """``K[k_lat, n, r]``: sensor pressure at step ``n`` per unit lateral
        spectrum at depth row ``r``."""
        if self._kernel is None:
            n_p, n_l = self.padded_shape
            n_rows = self.shape[0]
            k_depth = 2 * np.pi * np.fft.rfftfreq(n_p, self.h)
            _, k_lat = self.wavenumbers()
            steps = np.arange(self.n_t, dtype=float)
            K = np.empty((k_lat.size, self.n_t, n_rows))
            for i, kl in enumerate(k_lat):
                phase = self.c * self.dt * np.sqrt(k_depth ** 2 + kl ** 2)
                K[i] = sfft.irfft(np.cos(np.outer(steps, phase)), n=n_p, axis=1)[:, :n_rows]
            self._kernel = K
        return self._kernel

    def forward(self, p0):
        p0 = self._check_image(p0)
        n_l = self.padded_shape[1]
        spec = sfft.rfft(p0, n=n_l, axis=1)
        stacked = np.stack([spec.real.T, spec.imag.T], axis=-1)
        resp = np.matmul(self.kernel, stacked)
        cos_m, sin_m = self._lateral_matrices()
        return resp[..., 0].T @ cos_m - resp[..., 1].T @ sin_m

    def adjoint(self, g):
        g = self._check_data(g)
        n_l = self.padded_shape[1]
        n_rows, n_cols = self.shape
        cos_m, sin_m = self._lateral_matrices()
        stacked = np.stack([cos_m @ g.T, -(sin_m @ g.T)], axis=-1)
        back = np.matmul(self.kernel.transpose(0, 2, 1), stacked)
        spec = np.zeros((n_rows, n_l), dtype=complex)
        spec[:, : back.shape[0]] = (back[..., 0] + 1j * back[..., 1]).T
        return (sfft.ifft(spec, axis=1) * n_l).real[:, :n_cols]

    # -- literal time stepping --------------------------------------------------
    def _embed(self, p0):
        field = np.zeros(self.padded_shape)
        field[: self.shape[0], : self.shape[1]] = p0
        return field

    def fields(self, p0):
        """Generator over padded pressure fields ``p[0], p[1], ...`` by the two-step rule."""
        p0 = self._check_image(p0)
        mult = self.cos_table
        n_p, n_l = self.padded_shape
        cur = sfft.rfft2(self._embed(p0))
        prev = None
        for n in range(self.n_t):
            yield sfft.irfft2(cur, s=(n_p, n_l))
            nxt = mult * cur if prev is None else 2 * mult * cur - prev
            prev, cur = cur, nxt

    def forward_stepping(self, p0):
        """Forward map by explicit time stepping; sensors must sit on grid columns."""
        cols = np.round(self.sensor_x).astype(int)
        if not np.allclose(cols, self.sensor_x):
            raise ValueError("time-stepping forward needs integer sensor positions")
        return np.array([f[self.sensor_row, cols] for f in self.fields(p0)])

    def time_reverse(self, g, selected=None, gain=HALF_SPACE_GAIN):
        """Dirichlet re-emission of ``g`` reversed in time, scaled by ``gain``.

        With ``selected=None`` every sensor trace is imposed and traces are
        linearly interpolated onto all image columns between the outer
        sensors.  Otherwise only the listed sensors are imposed, each on its
        nearest image column.
        """
        g = self._check_data(g)
        cols, weights = self._imposition(selected)
        values = g @ weights.T
        mult = self.cos_table
        n_p, n_l = self.padded_shape
        row = self.sensor_row
        prev = np.zeros(self.padded_shape)
        cur = np.zeros(self.padded_shape)
        cur[row, cols] = values[-1]
        for n in range(1, self.n_t):
            spec = mult * sfft.rfft2(cur)
            if n == 1:
                nxt = sfft.irfft2(spec, s=(n_p, n_l))
            else:
                nxt = 2 * sfft.irfft2(spec, s=(n_p, n_l)) - prev
            nxt[row, cols] = values[self.n_t - 1 - n]
            prev, cur = cur, nxt
        return gain * cur[: self.shape[0], : self.shape[1]]

    def _imposition(self, selected):
        n_cols = self.shape[1]
        x = self.sensor_x
        if selected is None or len(selected) == x.size:
            cols = np.arange(math.ceil(x[0]), math.floor(x[-1]) + 1)
            weights = np.zeros((cols.size, x.size))
            idx = np.clip(np.searchsorted(x, cols, side="right") - 1, 0, x.size - 2)
            frac = (cols - x[idx]) / (x[idx + 1] - x[idx])
            weights[np.arange(cols.size), idx] = 1 - frac
            weights[np.arange(cols.size), idx + 1] += frac
            return cols, weights
        selected = np.asarray(selected, dtype=int)
        cols = np.clip(np.round(x[selected]).astype(int), 0, n_cols - 1)
        weights = np.zeros((selected.size, x.size))
        weights[np.arange(selected.size), selected] = 1.0
        return cols, weights

    def _check_image(self, p0):
        p0 = np.asarray(p0.values if isinstance(p0, ImageField) else p0, dtype=float)
        if p0.shape != self.shape:
            raise ValueError(f"image shape {p0.shape} != propagator grid {self.shape}")
        if not np.all(np.isfinite(p0)):
            raise ValueError("image contains non-finite values")
        return p0

    def _check_data(self, g):
        g = np.asarray(g.values if isinstance(g, DataField) else g, dtype=float)
        if g.shape != self.data_shape:
            raise ValueError(f"data shape {g.shape} != expected {self.data_shape}")
        return g



def _as_propagator(prop_or_cfg):
    if isinstance(prop_or_cfg, Propagator):
        return prop_or_cfg
    if isinstance(prop_or_cfg, AcousticConfig):
        return Propagator.from_config(prop_or_cfg)
    raise TypeError("expected a Propagator or AcousticConfig")


def forward(p0, prop) -> DataField:
    """Sensor data ``g = A p0`` as a :class:`DataField`."""
    prop = _as_propagator(prop)
    return DataField(prop.forward(p0), prop.dt, prop.courant * _sensor_pitch(prop))


def adjoint(g, prop) -> ImageField:
    prop = _as_propagator(prop)
    return ImageField(prop.adjoint(g), prop.h)


def time_reverse(g, prop, selected=None) -> ImageField:
    prop = _as_propagator(prop)
    return ImageField(prop.time_reverse(g, selected), prop.h)


def _sensor_pitch(prop):
    # sensor spacing in image voxels; c_v refers to the acquisition grid
    if prop.n_sensor < 2:
        return 1.0
    return 1.0 / float(np.mean(np.diff(prop.sensor_x)))


def wavefront_map(theta):
    """Sensor-plane wavefront angle for a wavefront leaving the source at ``theta``."""
    theta = np.asarray(theta, dtype=float)
    if np.any(np.abs(theta) >= np.pi / 2):
        raise ValueError("theta must lie in (-pi/2, pi/2)")
    out = np.arctan(np.sin(theta))
    return float(out) if out.ndim == 0 else out
