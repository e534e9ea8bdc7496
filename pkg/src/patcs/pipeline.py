"""Experiment configuration and the simulate / subsample / reconstruct / score stages."""

from __future__ import annotations

import configparser
import hashlib
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .curvelet import Tiling
from .grids import AcousticConfig, DataField, ImageField, bilinear_upscale, compute_upscale
from .metrics import MetricsReport, metrics
from .phantom import PhantomSpec, make_phantom
from .sensing import SamplingPattern, add_noise, make_pattern, subsample
from .solvers import SolverConfig, reconstruct_dr, reconstruct_p0r, reconstruct_p0r_plus
from .wave import Propagator
from .wedge import WedgeFrame, discrete_angles

METHODS = ("tr", "dr", "p0r", "p0r+")

DEFAULT_SOLVERS = {
    "dr": SolverConfig(tau=5e-5, mu=1.0, C=5.0, eta=5e-4, k_max=100),
    "p0r": SolverConfig(tau=1e-3, C=5.0, eta=5e-4, k_max=100),
    "p0r+": SolverConfig(tau=1e-4, mu=0.1, C=5.0, eta=5e-4, k_max=100),
}


@dataclass(frozen=True)
class TilingParams:
    n_scales: int = 4
    n_angles: int = 16
    finest: str = "curvelets"

    def build(self, dims):
        return Tiling(dims, self.n_scales, self.n_angles, self.finest)


@dataclass(frozen=True)
class ExperimentConfig:
    c: float = 1500.0
    h_x: float = 11.628e-6
    cv: float = 0.3
    phantom: PhantomSpec = PhantomSpec()
    sigma: float = 0.01
    noise_seed: int = 1
    rate: float = 0.25
    scheme: str = "window"
    window: tuple | None = None
    weight: float = 5.0
    pattern_seed: int = 2
    upscale: bool = True
    theta_w: float = math.pi / 4
    data_tiling: TilingParams = TilingParams(4, 152)
    image_tiling: TilingParams = TilingParams(4, 128)
    solvers: dict = field(default_factory=lambda: dict(DEFAULT_SOLVERS))
    out: str = "out"

    @property
    def acoustic(self) -> AcousticConfig:
        n_perp, n_sensor = self.phantom.dims
        return AcousticConfig.from_cv(self.c, self.h_x, self.cv, n_perp, n_sensor)

    @property
    def alpha(self):
        if not self.upscale:
            return 1.0
        return compute_upscale(self.acoustic.n_t, self.phantom.dims[0], 2)[0]

    def with_seed(self, seed):
        """Derive every stochastic seed from one master seed."""
        ss = np.random.SeedSequence(int(seed)).generate_state(3)
        return replace(self, phantom=replace(self.phantom, seed=int(ss[0])),
                       noise_seed=int(ss[1]), pattern_seed=int(ss[2]))

    # -- serialization ---------------------------------------------------------
    def to_parser(self) -> configparser.ConfigParser:
        cp = configparser.ConfigParser()
        cp["acoustic"] = {"c": repr(self.c), "h_x": repr(self.h_x), "cv": repr(self.cv)}
        ph = self.phantom
        cp["phantom"] = {
            "dims": f"{ph.dims[0]},{ph.dims[1]}", "seed": str(ph.seed), "n_vessels": str(ph.n_vessels),
            "radius_range": _pair(ph.radius_range), "amplitude_range": _pair(ph.amplitude_range),
            "margin": str(ph.margin),
        }
        cp["noise"] = {"sigma": repr(self.sigma), "seed": str(self.noise_seed)}
        cp["sampling"] = {
            "rate": repr(self.rate), "scheme": self.scheme, "weight": repr(self.weight),
            "seed": str(self.pattern_seed),
            "window": "" if self.window is None else f"{self.window[0]},{self.window[1]}",
        }
        cp["reconstruction"] = {"upscale": str(self.upscale).lower(), "theta_w": repr(self.theta_w)}
        for name, tp in (("tiling.data", self.data_tiling), ("tiling.image", self.image_tiling)):
            cp[name] = {"n_scales": str(tp.n_scales), "n_angles": str(tp.n_angles), "finest": tp.finest}
        for method, sc in sorted(self.solvers.items()):
            cp[f"solver.{method}"] = {
                "tau": repr(sc.tau), "mu": repr(sc.mu), "C": repr(sc.C), "eta": repr(sc.eta),
                "k_max": str(sc.k_max), "reweight": str(sc.reweight).lower(),
                "exact_inverse": str(sc.exact_inverse).lower(), "cgls_iter": str(sc.cgls_iter),
                "power_iter": str(sc.power_iter),
            }
        cp["output"] = {"dir": self.out}
        return cp

    def dumps(self) -> str:
        lines = []
        cp = self.to_parser()
        for section in cp.sections():
            lines.append(f"[{section}]")
            lines += [f"{k} = {v}" for k, v in cp[section].items()]
            lines.append("")
        return "\n".join(lines)

    def hash(self) -> str:
        """Digest of everything that affects results (the output dir is excluded)."""
        cp = self.to_parser()
        cp.remove_section("output")
        text = "\n".join(f"{s}.{k}={v}" for s in sorted(cp.sections()) for k, v in sorted(cp[s].items()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    @classmethod
    def from_parser(cls, cp: configparser.ConfigParser) -> "ExperimentConfig":
        base = cls()
        get = _Getter(cp)
        ph = base.phantom
        phantom = PhantomSpec(
            dims=get.ints("phantom", "dims", ph.dims),
            seed=get.int("phantom", "seed", ph.seed),
            n_vessels=get.int("phantom", "n_vessels", ph.n_vessels),
            radius_range=get.floats("phantom", "radius_range", ph.radius_range),
            amplitude_range=get.floats("phantom", "amplitude_range", ph.amplitude_range),
            margin=get.int("phantom", "margin", ph.margin),
            spacing=get.float("acoustic", "h_x", base.h_x),
        )
        solvers = {}
        for method, default in DEFAULT_SOLVERS.items():
            sec = f"solver.{method}"
            solvers[method] = replace(
                default,
                tau=get.float(sec, "tau", default.tau), mu=get.float(sec, "mu", default.mu),
                C=get.float(sec, "C", default.C), eta=get.float(sec, "eta", default.eta),
                k_max=get.int(sec, "k_max", default.k_max),
                reweight=get.bool(sec, "reweight", default.reweight),
                exact_inverse=get.bool(sec, "exact_inverse", default.exact_inverse),
                cgls_iter=get.int(sec, "cgls_iter", default.cgls_iter),
                power_iter=get.int(sec, "power_iter", default.power_iter),
            )
        window = get.str("sampling", "window", "")
        tilings = {}
        for name, default in (("tiling.data", base.data_tiling), ("tiling.image", base.image_tiling)):
            tilings[name] = TilingParams(
                get.int(name, "n_scales", default.n_scales),
                get.int(name, "n_angles", default.n_angles),
                get.str(name, "finest", default.finest),
            )
        return cls(
            c=get.float("acoustic", "c", base.c),
            h_x=get.float("acoustic", "h_x", base.h_x),
            cv=get.float("acoustic", "cv", base.cv),
            phantom=phantom,
            sigma=get.float("noise", "sigma", base.sigma),
            noise_seed=get.int("noise", "seed", base.noise_seed),
            rate=get.float("sampling", "rate", base.rate),
            scheme=get.str("sampling", "scheme", base.scheme),
            window=tuple(int(v) for v in window.split(",")) if window else None,
            weight=get.float("sampling", "weight", base.weight),
            pattern_seed=get.int("sampling", "seed", base.pattern_seed),
            upscale=get.bool("reconstruction", "upscale", base.upscale),
            theta_w=get.float("reconstruction", "theta_w", base.theta_w),
            data_tiling=tilings["tiling.data"],
            image_tiling=tilings["tiling.image"],
            solvers=solvers,
            out=get.str("output", "dir", base.out),
        )

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        with open(path) as fh:
            cp.read_file(fh)
        return cls.from_parser(cp)


def _pair(p):
    return f"{p[0]!r},{p[1]!r}"


class _Getter:
    def __init__(self, cp):
        self.cp = cp

    def str(self, sec, key, default):
        return self.cp.get(sec, key, fallback=default)

    def float(self, sec, key, default):
        return self.cp.getfloat(sec, key, fallback=default)

    def int(self, sec, key, default):
        return self.cp.getint(sec, key, fallback=default)

    def bool(self, sec, key, default):
        return self.cp.getboolean(sec, key, fallback=default)

    def ints(self, sec, key, default):
        raw = self.cp.get(sec, key, fallback=None)
        return default if raw is None else tuple(int(v) for v in raw.split(","))

    def floats(self, sec, key, default):
        raw = self.cp.get(sec, key, fallback=None)
        return default if raw is None else tuple(float(v) for v in raw.split(","))


# -- stages ---------------------------------------------------------------------

class Experiment:
    """Builds and caches the operators an :class:`ExperimentConfig` needs."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self._cache = {}

    def _get(self, key, build):
        if key not in self._cache:
            self._cache[key] = build()
        return self._cache[key]

    @property
    def acquisition(self) -> Propagator:
        return self._get("acq", lambda: Propagator.from_config(self.cfg.acoustic))

    @property
    def recon(self) -> Propagator:
        """Propagator on the reconstruction grid (upscaled unless disabled)."""
        if not self.cfg.upscale:
            return self.acquisition
        return self._get("rec", lambda: Propagator.from_config(self.cfg.acoustic, alpha=self.cfg.alpha))

    @property
    def data_frame(self) -> WedgeFrame:
        def build():
            tiling = self.cfg.data_tiling.build(self.acquisition.data_shape)
            return WedgeFrame(tiling, discrete_angles(tiling, self.cfg.cv, self.cfg.theta_w))
        return self._get("dframe", build)

    @property
    def image_tiling(self) -> Tiling:
        return self._get("itiling", lambda: self.cfg.image_tiling.build(self.recon.shape))

    def phantom(self) -> ImageField:
        return make_phantom(self.cfg.phantom)

    def reference(self, p0: ImageField | None = None) -> ImageField:
        """Ground truth on the reconstruction grid."""
        p0 = self.phantom() if p0 is None else p0
        if not self.cfg.upscale:
            return p0
        return bilinear_upscale(p0, self.recon.shape, scale=self.cfg.alpha)

    def simulate(self, p0=None):
        """Return ``(p0, clean data, noisy data)``."""
        p0 = self.phantom() if p0 is None else p0
        prop = self.acquisition
        clean = DataField(prop.forward(p0), prop.dt, self.cfg.cv)
        noisy = add_noise(clean, self.cfg.sigma, self.cfg.noise_seed)
        return p0, clean, noisy

    def pattern(self) -> SamplingPattern:
        c = self.cfg
        return make_pattern(self.acquisition.n_sensor, c.rate, c.scheme, c.pattern_seed, c.window, c.weight)

    def time_reverse(self, data, pattern=None) -> ImageField:
        """TR on the reconstruction grid; with a partial pattern only its sensors are imposed."""
        values = data.values if isinstance(data, DataField) else np.asarray(data)
        selected = None
        if pattern is not None and pattern.m < pattern.n_sensor:
            selected = pattern.selected
        prop = self.recon
        return ImageField(prop.time_reverse(values, selected), prop.h)

    def reconstruct(self, method, b, pattern):
        """Run one method on measurements ``b``; returns ``(p0, run, extra)``."""
        solvers = self.cfg.solvers
        if method == "tr":
            full = np.zeros((b.values.shape[0], pattern.n_sensor))
            full[:, pattern.selected] = b.values
            return self.time_reverse(full, pattern), None, {}
        if method == "dr":
            g_dr, run = reconstruct_dr(b, pattern, self.data_frame, solvers["dr"],
                                       dt=self.acquisition.dt, cv=self.cfg.cv)
            return self.time_reverse(g_dr), run, {"g_dr": g_dr}
        if method == "p0r":
            p0, run = reconstruct_p0r(b, pattern, self.image_tiling, solvers["p0r"], self.recon)
            return p0, run, {}
        if method == "p0r+":
            p0, run = reconstruct_p0r_plus(b, pattern, self.image_tiling, solvers["p0r+"], self.recon)
            return p0, run, {}
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")

    def score(self, rec: ImageField, p0: ImageField | None = None) -> MetricsReport:
        return metrics(rec, self.reference(p0))


def run_all(cfg: ExperimentConfig, methods=METHODS, experiment: Experiment | None = None):
    """Full pipeline in memory; returns ``{method: (MetricsReport, image, run)}``."""
    exp = experiment or Experiment(cfg)
    p0, _, noisy = exp.simulate()
    pattern = exp.pattern()
    b = subsample(noisy, pattern)
    results = {}
    for method in methods:
        rec, run, _ = exp.reconstruct(method, b, pattern)
        results[method] = (exp.score(rec, p0), rec, run)
    return results
