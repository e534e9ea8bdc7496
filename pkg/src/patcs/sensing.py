"""Sensor subsampling, zero filling and detector noise."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grids import DataField


@dataclass(frozen=True)
class SamplingPattern:
    selected: np.ndarray
    n_sensor: int
    seed: int
    scheme: str = "uniform"
    window: tuple | None = None
    weight: float = 1.0

    def __post_init__(self):
        sel = np.unique(np.asarray(self.selected, dtype=int))
        if sel.size != np.size(self.selected):
            raise ValueError("selected sensors must be unique")
        if sel.size == 0 or sel[0] < 0 or sel[-1] >= self.n_sensor:
            raise ValueError("selected sensors out of range")
        sel.flags.writeable = False
        object.__setattr__(self, "selected", sel)

    @property
    def m(self):
        return self.selected.size

    @property
    def mask(self):
        out = np.zeros(self.n_sensor, dtype=bool)
        out[self.selected] = True
        return out


@dataclass(frozen=True)
class Measurements:
    """Selected traces ``b = Phi g`` as an ``(n_t, m)`` array."""

    values: np.ndarray
    pattern: SamplingPattern
    dt: float = 1.0
    cv: float = 1.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[1] != self.pattern.m:
            raise ValueError(f"measurements shape {v.shape} does not match {self.pattern.m} sensors")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)


def default_window(n_sensor):
    quarter = n_sensor // 4
    return (quarter, n_sensor - quarter)


def make_pattern(n_sensor, rate, scheme="uniform", seed=0, window=None, weight=5.0) -> SamplingPattern:
    """Choose ``ceil(rate * n_sensor)`` distinct sensors.

    ``scheme="window"`` draws sensors in ``[window[0], window[1])`` with
    ``weight`` times the probability of the others.
    """
    if not 0 < rate <= 1:
        raise ValueError(f"rate must lie in (0, 1], got {rate}")
    m = math.ceil(rate * n_sensor - 1e-9)
    if rate * n_sensor < 1:
        raise ValueError(f"rate {rate} selects fewer than one of {n_sensor} sensors")
    rng = np.random.default_rng(seed)
    probs = np.ones(n_sensor)
    if scheme == "window":
        window = default_window(n_sensor) if window is None else tuple(int(w) for w in window)
        if not 0 <= window[0] < window[1] <= n_sensor:
            raise ValueError(f"window {window} outside the sensor extent [0, {n_sensor})")
        probs[window[0]: window[1]] = weight
    elif scheme == "uniform":
        window, weight = None, 1.0
    else:
        raise ValueError(f"unknown sampling scheme {scheme!r}")
    chosen = rng.choice(n_sensor, size=m, replace=False, p=probs / probs.sum())
    return SamplingPattern(np.sort(chosen), n_sensor, seed, scheme, window, float(weight))


def _values(g):
    return np.asarray(g.values if isinstance(g, (DataField, Measurements)) else g, dtype=float)


def subsample(g, pat: SamplingPattern) -> Measurements:
    values = _values(g)
    if values.ndim != 2 or values.shape[1] != pat.n_sensor:
        raise ValueError(f"data with {values.shape[-1]} sensors does not match pattern over {pat.n_sensor}")
    dt, cv = (g.dt, g.cv) if isinstance(g, DataField) else (1.0, 1.0)
    return Measurements(values[:, pat.selected], pat, dt, cv)


def zero_fill(b, pat: SamplingPattern | None = None) -> DataField:
    if isinstance(b, Measurements):
        if pat is not None and not np.array_equal(pat.selected, b.pattern.selected):
            raise ValueError("measurements were taken with a different pattern")
        pat, values, dt, cv = b.pattern, b.values, b.dt, b.cv
    else:
        if pat is None:
            raise ValueError("a pattern is required for raw measurement arrays")
        values, dt, cv = _values(b), 1.0, 1.0
    if values.shape[1] != pat.m:
        raise ValueError(f"{values.shape[1]} traces for a pattern of {pat.m} sensors")
    out = np.zeros((values.shape[0], pat.n_sensor))
    out[:, pat.selected] = values
    return DataField(out, dt, cv)


def add_noise(g, sigma, seed=0):
    """Add i.i.d. Gaussian noise of standard deviation ``sigma``."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    values = _values(g)
    noisy = values + sigma * np.random.default_rng(seed).standard_normal(values.shape) if sigma else values.copy()
    return g.with_values(noisy) if isinstance(g, DataField) else noisy


def save_pattern(path, pat: SamplingPattern, **extra):
    lines = [
        f"# n_sensor={pat.n_sensor}",
        f"# seed={pat.seed}",
        f"# scheme={pat.scheme}",
        f"# weight={pat.weight!r}",
    ]
    if pat.window is not None:
        lines.append(f"# window={pat.window[0]},{pat.window[1]}")
    lines += [f"# {k}={v}" for k, v in sorted(extra.items())]
    lines += [str(int(i)) for i in pat.selected]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n")


def load_pattern(path):
    """Return ``(pattern, extra_header_entries)``."""
    header, indices = {}, []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            header[key.strip()] = val.strip()
        else:
            indices.append(int(line))
    window = header.pop("window", None)
    pat = SamplingPattern(
        np.array(indices, dtype=int),
        int(header.pop("n_sensor")),
        int(header.pop("seed")),
        header.pop("scheme", "uniform"),
        tuple(int(w) for w in window.split(",")) if window else None,
        float(header.pop("weight", 1.0)),
    )
    return pat, header
