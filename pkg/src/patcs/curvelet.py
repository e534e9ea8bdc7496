"""Real-valued 2D curvelet frame computed by wrapping.

Frequencies are integer vectors ``xi`` on the plane; the DFT bin holding
``xi`` is ``xi mod dims``.  The frame is built from

* a separable lowpass ``phi(xi_1/M_1) phi(xi_2/M_2)`` with ``M = dims/3`` whose
  squared periodization is exactly one, so the finest scale reaches the
  corners of the grid;
* smaller lowpasses with ``M`` halved per scale, and band windows
  ``sqrt(low_{j+1}^2 - low_j^2)`` between them;
* angular windows over a piecewise-linear angle coordinate ``s`` in [0, 4)
  that samples slopes uniformly within each of the four cones
  ``|xi_1/n_1| >= |xi_2/n_2|`` / ``|xi_2/n_2| > |xi_1/n_1|``.

Every wedge's windowed spectrum is wrapped onto a rectangle large enough
that no two frequencies of the wedge collide, then inverse-FFTed.  Only the
wedges centred in the first half of [0, 4) are computed; the real and
imaginary parts (times sqrt 2) give the coefficients of a wedge and of its
antipode.  The resulting frame is tight, so synthesis is the adjoint and the
left inverse.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import fft as sfft

SQRT2 = np.sqrt(2.0)


def meyer_step(t):
    """C-infinity step rising from 0 at t<=0 to 1 at t>=1, with
    ``meyer_step(t) + meyer_step(1-t) == 1``."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def lowpass_profile(x):
    """1 on |x| <= 1, smooth cosine roll-off to 0 at |x| = 2."""
    x = np.abs(np.asarray(x, dtype=float))
    return np.where(x <= 1, 1.0, np.cos(0.5 * np.pi * meyer_step(x - 1.0)))


def angle_coordinate(u1, u2):
    """Piecewise-linear angle in [0, 4): slope-uniform inside each cone.

    ``[0, 1)`` is the cone around +axis-0, ``[1, 2)`` around +axis-1 and the
    second half holds the antipodes, so negating ``u`` adds 2.
    """
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    vertical = np.abs(u1) >= np.abs(u2)
    with np.errstate(divide="ignore", invalid="ignore"):
        t_v = u2 / u1
        t_h = u1 / u2
    s = np.where(
        vertical,
        np.where(u1 > 0, 0.5 * (t_v + 1), 2 + 0.5 * (t_v + 1)),
        np.where(u2 > 0, 1 + 0.5 * (1 - t_h), 3 + 0.5 * (1 - t_h)),
    )
    return np.mod(s, 4.0)


@dataclass(frozen=True)
class Wedge:
    """One coefficient block.

    ``cone`` is ``"coarse"``, ``"wavelet"``, ``"v"`` (centred on the axis-0
    frequency axis) or ``"h"`` (centred on the axis-1 axis).  ``slope`` is the
    centre slope within the cone: ``u2/u1`` for ``"v"``, ``u1/u2`` for ``"h"``,
    with ``u = xi/dims``.  ``part`` is 0 for the real-part copy, 1 for the
    imaginary-part (antipodal) copy.
    """

    scale: int
    angle: int
    cone: str
    slope: float
    part: int
    shape: tuple
    offset: int

    @property
    def size(self):
        return int(np.prod(self.shape))


class _Group:
    """Wedges of one band and cone sharing a wrapping rectangle."""

    def __init__(self, scale, cone, n_wedges, dims, xi, bins, values, residues, re_offset, im_offset):
        self.scale = scale
        self.xi = xi
        self.cone = cone
        self.n_wedges = n_wedges
        self.dims = dims
        self.bins = bins
        self.values = values
        self.residues = residues
        self.re_offset = re_offset
        self.im_offset = im_offset

    @property
    def size(self):
        return self.n_wedges * self.dims[0] * self.dims[1]


class Tiling:
    """Frequency tiling and precomputed window tables.

    Parameters
    ----------
    dims : grid shape ``(n_1, n_2)``.
    n_scales : number of scales including the coarse isotropic one.
    n_angles : angles at the second coarsest scale, a multiple of 4.  The count
        doubles at every second scale: ``n_angles * 2**(j//2)`` at band ``j``.
    finest : ``"curvelets"`` (default) or ``"wavelets"`` for an isotropic
        finest band.
    """

    def __init__(self, dims, n_scales=4, n_angles=16, finest="curvelets"):
        dims = tuple(int(d) for d in dims)
        if len(dims) != 2 or min(dims) < 4:
            raise ValueError(f"need a 2D grid of at least 4x4, got {dims}")
        if n_scales < 2:
            raise ValueError("n_scales must be >= 2")
        if n_angles < 4 or n_angles % 4:
            raise ValueError("n_angles must be a positive multiple of 4")
        if finest not in ("curvelets", "wavelets"):
            raise ValueError("finest must be 'curvelets' or 'wavelets'")
        if finest == "wavelets" and n_scales < 3:
            raise ValueError("wavelets at the finest scale need n_scales >= 3")
        self.dims = dims
        self.n_scales = int(n_scales)
        self.n_angles_coarse2 = int(n_angles)
        self.finest = finest
        self._build()

    # -- construction ---------------------------------------------------------
    def angles_at(self, scale):
        if scale == 0:
            return 1
        if scale == self.n_scales - 1 and self.finest == "wavelets":
            return 1
        return self.n_angles_coarse2 * 2 ** (scale // 2)

    def _lowpass_widths(self):
        n = np.array(self.dims, dtype=float)
        J = self.n_scales
        widths = {J: n / 3.0}
        for j in range(J - 1, 0, -1):
            widths[j] = widths[j + 1] / 2.0
        return widths

    def _lowpass(self, xi1, xi2, width):
        return lowpass_profile(xi1 / width[0]) * lowpass_profile(xi2 / width[1])

    def _box(self, width):
        r1 = int(np.ceil(2 * width[0])) - 1
        r2 = int(np.ceil(2 * width[1])) - 1
        xi1, xi2 = np.meshgrid(np.arange(-r1, r1 + 1), np.arange(-r2, r2 + 1), indexing="ij")
        return xi1.ravel(), xi2.ravel(), (2 * r1 + 1, 2 * r2 + 1)

    def _bins(self, xi1, xi2):
        n1, n2 = self.dims
        return np.mod(xi1, n1) * n2 + np.mod(xi2, n2)

    def _build(self):
        J = self.n_scales
        n1, n2 = self.dims
        widths = self._lowpass_widths()
        self.wedges = []
        self._groups = []
        offset = 0

        # coarse isotropic block
        xi1, xi2, box = self._box(widths[1])
        if min(widths[1]) < 1 or box[0] > n1 or box[1] > n2:
            raise ValueError("grid too small for this many scales")
        vals = self._lowpass(xi1, xi2, widths[1])
        keep = vals > 0
        res = np.mod(xi1, box[0]) * box[1] + np.mod(xi2, box[1])
        self._coarse = (self._bins(xi1[keep], xi2[keep]), vals[keep], res[keep], box)
        self._coarse_xi = (xi1[keep], xi2[keep])
        self.wedges.append(Wedge(0, 0, "coarse", 0.0, 0, box, offset))
        offset += box[0] * box[1]

        last_band = J - 1
        self._wavelet = None
        for j in range(1, J):
            if j == last_band and self.finest == "wavelets":
                xi1 = np.fft.fftfreq(n1, 1.0 / n1).astype(int)
                xi2 = np.fft.fftfreq(n2, 1.0 / n2).astype(int)
                g1, g2 = np.meshgrid(xi1, xi2, indexing="ij")
                low = self._lowpass(g1, g2, widths[j])
                self._wavelet = np.sqrt(np.clip(1.0 - low ** 2, 0, None)).ravel()
                self.wedges.append(Wedge(j, 0, "wavelet", 0.0, 0, self.dims, offset))
                offset += n1 * n2
                continue
            outer = widths[j + 1]
            xi1, xi2, _ = self._box(outer)
            hi = self._lowpass(xi1, xi2, outer)
            lo = self._lowpass(xi1, xi2, widths[j])
            band = np.sqrt(np.clip(hi ** 2 - lo ** 2, 0, None))
            keep = band > 0
            offset = self._build_band(j, xi1[keep], xi2[keep], band[keep], offset)
        self.n_coeffs = offset
        self._all_bins = np.concatenate(
            [self._coarse[0]] + [g.bins for g in self._groups]
            + ([np.arange(n1 * n2)] if self._wavelet is not None else [])
        )

    def _build_band(self, j, xi1, xi2, band, offset):
        n1, n2 = self.dims
        L = self.angles_at(j)
        nq = L // 4
        delta = 1.0 / nq
        s = angle_coordinate(xi1 / n1, xi2 / n2)
        pos = s / delta - 0.5
        left = np.floor(pos).astype(int)
        frac = pos - left
        ramp = 0.5 * np.pi * meyer_step(frac)
        # each frequency feeds its two nearest wedges
        idx = np.concatenate([np.mod(left, L), np.mod(left + 1, L)])
        w = np.concatenate([band * np.cos(ramp), band * np.sin(ramp)])
        p1 = np.concatenate([xi1, xi1])
        p2 = np.concatenate([xi2, xi2])
        half = L // 2
        keep = (w > 0) & (idx < half)
        idx, w, p1, p2 = idx[keep], w[keep], p1[keep], p2[keep]

        order = np.argsort(idx, kind="stable")
        idx, w, p1, p2 = idx[order], w[order], p1[order], p2[order]
        starts = np.searchsorted(idx, np.arange(half + 1))

        groups = []
        for cone, first in (("v", 0), ("h", nq)):
            members = range(first, first + nq)
            extent = [0, 0]
            for i in members:
                a, b = starts[i], starts[i + 1]
                if a == b:
                    continue
                radial, across = (p1[a:b], p2[a:b]) if cone == "v" else (p2[a:b], p1[a:b])
                extent[0] = max(extent[0], int(radial.max() - radial.min() + 1))
                # widest cross-section at fixed radial frequency
                o = np.lexsort((across, radial))
                r_sorted, c_sorted = radial[o], across[o]
                cut = np.flatnonzero(np.diff(r_sorted)) + 1
                lo_c = np.minimum.reduceat(c_sorted, np.r_[0, cut])
                hi_c = np.maximum.reduceat(c_sorted, np.r_[0, cut])
                extent[1] = max(extent[1], int((hi_c - lo_c).max() + 1))
            dims = (extent[0], extent[1]) if cone == "v" else (extent[1], extent[0])
            groups.append((cone, first, dims))

        # lay out: real parts of all computed wedges, then imaginary parts
        re_offsets = {}
        for cone, first, dims in groups:
            re_offsets[cone] = offset
            offset += nq * dims[0] * dims[1]
        im_offsets = {}
        for cone, first, dims in groups:
            im_offsets[cone] = offset
            offset += nq * dims[0] * dims[1]

        for cone, first, dims in groups:
            size = dims[0] * dims[1]
            a, b = starts[first], starts[first + nq]
            local = idx[a:b] - first
            if size:
                res = local * size + np.mod(p1[a:b], dims[0]) * dims[1] + np.mod(p2[a:b], dims[1])
                if np.unique(res).size != res.size:
                    raise AssertionError("wrapping collision")
            else:
                res = np.zeros(0, dtype=int)
            self._groups.append(
                _Group(j, cone, nq, dims, (p1[a:b], p2[a:b]), self._bins(p1[a:b], p2[a:b]), w[a:b], res,
                       re_offsets[cone], im_offsets[cone])
            )
            for k in range(nq):
                i = first + k
                centre = (i + 0.5) * delta
                slope = 2 * centre - 1 if cone == "v" else 1 - 2 * (centre - 1)
                self.wedges.append(Wedge(j, i, cone, slope, 0, dims, re_offsets[cone] + k * size))
                self.wedges.append(Wedge(j, i + half, cone, slope, 1, dims, im_offsets[cone] + k * size))
        return offset

    # -- queries --------------------------------------------------------------
    def wedge(self, scale, angle) -> Wedge:
        if not hasattr(self, "_lookup"):
            self._lookup = {(w.scale, w.angle): w for w in self.wedges}
        try:
            return self._lookup[(scale, angle)]
        except KeyError:
            raise KeyError(f"no wedge at scale {scale}, angle {angle}") from None

    def wedges_at(self, scale):
        return sorted((w for w in self.wedges if w.scale == scale), key=lambda w: w.angle)

    def window_entries(self, scale, angle):
        """``(xi1, xi2, value)`` plane frequencies and window values feeding a
        wedge (for the imaginary-part copy: the antipodal frequencies)."""
        n1, n2 = self.dims
        w = self.wedge(scale, angle)
        if w.cone == "coarse":
            return self._coarse_xi[0], self._coarse_xi[1], self._coarse[1]
        if w.cone == "wavelet":
            xi1 = np.fft.fftfreq(n1, 1.0 / n1).astype(int)
            xi2 = np.fft.fftfreq(n2, 1.0 / n2).astype(int)
            g1, g2 = np.meshgrid(xi1, xi2, indexing="ij")
            return g1.ravel(), g2.ravel(), self._wavelet
        g = next(g for g in self._groups if g.scale == scale and g.cone == w.cone)
        size = g.dims[0] * g.dims[1]
        first = 0 if w.cone == "v" else self.angles_at(scale) // 4
        local = (w.angle % (self.angles_at(scale) // 2)) - first
        sel = g.residues // size == local if size else np.zeros(0, dtype=bool)
        sign = -1 if w.part else 1
        return sign * g.xi[0][sel], sign * g.xi[1][sel], g.values[sel]

    def label_image(self, scale=None):
        """Torus image labelling each bin by its dominant wedge (for display).

        Scale ``j`` wedges get labels ``1000*j + angle``; with ``scale`` given,
        only that scale is labelled and other bins are -1.
        """
        n1, n2 = self.dims
        best = np.zeros(n1 * n2)
        label = np.full(n1 * n2, -1.0)
        for w in self.wedges:
            if scale is not None and w.scale != scale:
                continue
            xi1, xi2, vals = self.window_entries(w.scale, w.angle)
            bins = self._bins(xi1, xi2)
            better = vals > best[bins]
            best[bins[better]] = vals[better]
            label[bins[better]] = 1000 * w.scale + w.angle
        return label.reshape(self.dims)

    # -- transforms -----------------------------------------------------------
    def analyze(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape != self.dims:
            raise ValueError(f"input shape {u.shape} != tiling dims {self.dims}")
        X = sfft.fft2(u, norm="ortho").ravel()
        out = np.empty(self.n_coeffs)

        bins, vals, res, box = self._coarse
        buf = np.zeros(box[0] * box[1], dtype=complex)
        buf[res] = X[bins] * vals
        out[: buf.size] = sfft.ifft2(buf.reshape(box), norm="ortho").real.ravel()

        for g in self._groups:
            if g.size == 0:
                continue
            buf = np.zeros(g.size, dtype=complex)
            buf[g.residues] = X[g.bins] * g.values
            c = sfft.ifft2(buf.reshape(g.n_wedges, *g.dims), norm="ortho", axes=(1, 2)).ravel()
            out[g.re_offset: g.re_offset + g.size] = SQRT2 * c.real
            out[g.im_offset: g.im_offset + g.size] = SQRT2 * c.imag

        if self._wavelet is not None:
            w = self.wedges[-1]
            c = sfft.ifft2((X * self._wavelet).reshape(self.dims), norm="ortho").real
            out[w.offset: w.offset + w.size] = c.ravel()
        return out

    def synthesize(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.n_coeffs,):
            raise ValueError(f"expected {self.n_coeffs} coefficients, got shape {coeffs.shape}")
        parts = []

        bins, vals, res, box = self._coarse
        C = sfft.fft2(coeffs[: box[0] * box[1]].reshape(box), norm="ortho").ravel()
        parts.append(C[res] * vals)

        for g in self._groups:
            if g.size == 0:
                parts.append(np.zeros(0, dtype=complex))
                continue
            z = coeffs[g.re_offset: g.re_offset + g.size] + 1j * coeffs[g.im_offset: g.im_offset + g.size]
            C = sfft.fft2(z.reshape(g.n_wedges, *g.dims), norm="ortho", axes=(1, 2)).ravel()
            parts.append(SQRT2 * C[g.residues] * g.values)

        if self._wavelet is not None:
            w = self.wedges[-1]
            C = sfft.fft2(coeffs[w.offset: w.offset + w.size].reshape(self.dims), norm="ortho").ravel()
            parts.append(C * self._wavelet)

        contrib = np.concatenate(parts)
        size = self.dims[0] * self.dims[1]
        V = np.bincount(self._all_bins, contrib.real, size) + 1j * np.bincount(self._all_bins, contrib.imag, size)
        return sfft.ifft2(V.reshape(self.dims), norm="ortho").real

    def __repr__(self):
        return (f"Tiling(dims={self.dims}, n_scales={self.n_scales}, "
                f"n_angles={self.n_angles_coarse2}, finest={self.finest!r}, N={self.n_coeffs})")


class CurveletCoeffs:
    """Flat coefficient vector bound to the tiling that produced it."""

    def __init__(self, data, tiling: Tiling):
        data = np.asarray(data, dtype=float)
        if data.shape != (tiling.n_coeffs,):
            raise ValueError(f"expected {tiling.n_coeffs} coefficients, got {data.shape}")
        self.data = data
        self.tiling = tiling

    def __getitem__(self, key):
        scale, angle = key
        w = self.tiling.wedge(scale, angle)
        return self.data[w.offset: w.offset + w.size].reshape(w.shape)

    @property
    def coarse(self):
        return self[0, 0]

    def norm(self):
        return float(np.linalg.norm(self.data))

    def copy(self):
        return CurveletCoeffs(self.data.copy(), self.tiling)


def analyze(u, tiling: Tiling) -> CurveletCoeffs:
    return CurveletCoeffs(tiling.analyze(u), tiling)


def synthesize(coeffs, tiling: Tiling | None = None):
    if isinstance(coeffs, CurveletCoeffs):
        if tiling is not None and tiling is not coeffs.tiling:
            raise ValueError("coefficients belong to a different tiling")
        return coeffs.tiling.synthesize(coeffs.data)
    if tiling is None:
        raise ValueError("a tiling is required for raw coefficient vectors")
    return tiling.synthesize(coeffs)


def keep_largest(vec, s):
    """Zero all but the ``s`` largest-magnitude entries."""
    vec = np.asarray(vec, dtype=float)
    if not 0 <= s <= vec.size:
        raise ValueError(f"s must lie in [0, {vec.size}], got {s}")
    out = np.zeros_like(vec)
    if s:
        top = np.argpartition(np.abs(vec), vec.size - s)[vec.size - s:]
        out[top] = vec[top]
    return out


def best_s_term_error(u, tiling: Tiling, s: int) -> float:
    """Relative error of the synthesis from the ``s`` largest coefficients."""
    u = np.asarray(u, dtype=float)
    approx = tiling.synthesize(keep_largest(tiling.analyze(u), s))
    return float(np.linalg.norm(u - approx) / np.linalg.norm(u))
