"""Reweighted l1 reconstruction: data recovery by SALSA, image recovery by FISTA/ADMM.

Operators are passed around as plain callables on numpy arrays.  Frames
expose ``analyze``/``synthesize`` on flat coefficient vectors (a
:class:`~patcs.curvelet.Tiling` or a :class:`~patcs.wedge.WedgeFrame`).
"""

from __future__ import annotations

import csv
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grids import DataField, ImageField
from .sensing import Measurements, SamplingPattern


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SolverConfig:
    tau: float
    mu: float = 1.0
    C: float = 5.0
    eta: float = 5e-4
    k_max: int = 100
    reweight: bool = True
    exact_inverse: bool = False
    cg_tol: float = 1e-10
    cg_iter: int = 200
    cgls_tol: float = 1e-8
    cgls_iter: int = 10
    power_tol: float = 1e-6
    power_iter: int = 200
    seed: int = 0

    def __post_init__(self):
        if not (self.tau > 0 and self.mu > 0 and self.C > 0 and self.eta > 0):
            raise ValueError("tau, mu, C and eta must be positive")
        if not self.eta < 1:
            raise ValueError("eta must be < 1")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")


@dataclass(frozen=True)
class WeightState:
    lam: np.ndarray
    S: int
    epsilon: float


@dataclass
class TraceRow:
    iteration: int
    objective: float
    fidelity: float
    rel_change: float
    wall_ms: float
    extra: dict = field(default_factory=dict)


@dataclass
class SolverRun:
    config: SolverConfig
    method: str
    trace: list = field(default_factory=list)
    f: np.ndarray | None = None
    converged: bool = False
    wall_time: float = 0.0
    info: dict = field(default_factory=dict)

    @property
    def iterations(self):
        return len(self.trace)

    def write_trace(self, path):
        extras = sorted({k for row in self.trace for k in row.extra})
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh)
            out.writerow(["iteration", "objective", "fidelity", "relative_change", "wall_ms", *extras])
            for row in self.trace:
                out.writerow([row.iteration, repr(row.objective), repr(row.fidelity),
                              repr(row.rel_change), f"{row.wall_ms:.3f}",
                              *(repr(row.extra.get(k, float("nan"))) for k in extras)])


# -- kernels -----------------------------------------------------------------

EPS_FLOOR = 1e-4


def sparsity_target(m, n, C):
    """``S = ceil(m / (C ln n))`` clamped to ``[1, n]``."""
    return int(min(n, max(1, math.ceil(m / (C * math.log(n))))))


def update_weights(f, S) -> WeightState:
    f = np.abs(np.asarray(f, dtype=float))
    if not 1 <= S <= f.size:
        raise ValueError(f"S must lie in [1, {f.size}], got {S}")
    top = f.max() if f.size else 0.0
    if top == 0.0:
        eps = EPS_FLOOR
    else:
        rho_S = np.partition(f, f.size - S)[f.size - S] / top
        eps = max(float(rho_S), EPS_FLOOR)
    return WeightState(1.0 / (f + eps), int(S), eps)


def soft_threshold(y, thresh):
    y = np.asarray(y, dtype=float)
    return np.sign(y) * np.maximum(np.abs(y) - thresh, 0.0)


def smw_inverse(apply_P, mu, rhs):
    """``(P + mu I)^{-1} rhs`` for an orthogonal projector ``P``."""
    return (rhs - apply_P(rhs) / (mu + 1.0)) / mu


def cg(apply_M, rhs, tol=1e-10, iter_max=200, x0=None):
    """Conjugate gradients for symmetric positive definite ``M``; returns ``(x, iterations)``."""
    x = np.zeros_like(rhs) if x0 is None else x0.copy()
    r = rhs - apply_M(x) if x0 is not None else rhs.copy()
    p = r.copy()
    rr = float(r @ r)
    stop = tol * math.sqrt(float(rhs @ rhs))
    it = 0
    while math.sqrt(rr) > stop and it < iter_max:
        Mp = apply_M(p)
        a = rr / float(p @ Mp)
        x += a * p
        r -= a * Mp
        rr_new = float(r @ r)
        p = r + (rr_new / rr) * p
        rr = rr_new
        it += 1
    return x, it


def power_iteration(apply_M, dims, tol=1e-6, iter_max=200, seed=0):
    """Largest eigenvalue of a symmetric positive semidefinite operator."""
    v = np.random.default_rng(seed).standard_normal(dims)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iter_max):
        Mv = apply_M(v)
        new = float(np.vdot(v, Mv))
        norm = np.linalg.norm(Mv)
        if norm == 0.0:
            return 0.0
        v = Mv / norm
        if est and abs(new - est) <= tol * abs(new):
            return new
        est = new
    warnings.warn(f"power iteration stopped after {iter_max} steps", ConvergenceWarning, stacklevel=2)
    return est


def cgls(apply_A, apply_At, rhs, tol=1e-8, iter_max=100, x0=None):
    """Least squares ``min ||A x - rhs||`` by CGLS.

    Stops when ``||A^T r|| <= tol * ||A^T r_0||`` (``r_0`` the starting residual).  Returns ``(x, info)`` with
    ``info = {"iterations", "converged", "residual"}`` where ``residual`` is
    the final ``rhs - A x``.
    """
    if x0 is None:
        r = rhs
        s = apply_At(r)
        x = np.zeros_like(s)
    else:
        x = x0.copy()
        r = _sub(rhs, apply_A(x))
        s = apply_At(r)
    ref = np.linalg.norm(s)
    p = s.copy()
    gamma = float(np.vdot(s, s))
    it = 0
    converged = math.sqrt(gamma) <= tol * ref
    while not converged and it < iter_max:
        q = apply_A(p)
        alpha = gamma / _dot(q, q)
        x = x + alpha * p
        r = _sub(r, _scale(q, alpha))
        s = apply_At(r)
        gamma_new = float(np.vdot(s, s))
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
        it += 1
        converged = math.sqrt(gamma) <= tol * ref
    return x, {"iterations": it, "converged": converged, "residual": r}


# stacked residuals in R-ADMM are tuples of arrays
def _sub(a, b):
    if isinstance(a, tuple):
        return tuple(x - y for x, y in zip(a, b))
    return a - b


def _scale(a, s):
    if isinstance(a, tuple):
        return tuple(s * x for x in a)
    return s * a


def _dot(a, b):
    if isinstance(a, tuple):
        return sum(float(np.vdot(x, y)) for x, y in zip(a, b))
    return float(np.vdot(a, b))


# -- algorithms ----------------------------------------------------------------

def _measurements(b, pat):
    if isinstance(b, Measurements):
        return np.asarray(b.values), b.pattern if pat is None else pat
    if pat is None:
        raise ValueError("a sampling pattern is required")
    return np.asarray(b, dtype=float), pat


def _rel_change(new, old):
    den = np.linalg.norm(old)
    return float(np.linalg.norm(new - old) / den) if den else math.inf


def reconstruct_dr(b, pat: SamplingPattern | None, frame, cfg: SolverConfig, dt=1.0, cv=1.0):
    """Recover full sensor data from selected traces (reweighted SALSA).

    ``frame`` is the data-domain frame, normally a wedge-restricted one.
    Returns ``(DataField, SolverRun)``.
    """
    b, pat = _measurements(b, pat)
    t0 = time.perf_counter()
    n_t = b.shape[0]
    sel = pat.mask
    support = getattr(getattr(frame, "spec", None), "mask", None)
    if support is None:
        support = np.ones(frame.n_coeffs, dtype=bool)

    def sample(g):
        return g[:, sel]

    def fill(v):
        out = np.zeros((n_t, pat.n_sensor))
        out[:, sel] = v
        return out

    def apply_P(v):
        g = frame.synthesize(v)
        g[:, ~sel] = 0.0
        return frame.analyze(g)

    n = n_t * pat.n_sensor
    S = sparsity_target(b.size, n, cfg.C)
    run = SolverRun(cfg, "dr", info={"S": S, "n": n, "m": int(b.size)})
    data_term = frame.analyze(fill(b))

    f = support.astype(float)
    y = np.zeros_like(f)
    w = np.zeros_like(f)
    lam = np.ones_like(f)
    gaps = []
    for k in range(1, cfg.k_max + 1):
        rhs = data_term + cfg.mu * (y + w)
        if cfg.exact_inverse:
            f_new, _ = cg(lambda v: apply_P(v) + cfg.mu * v, rhs, cfg.cg_tol, cfg.cg_iter)
        else:
            f_new = smw_inverse(apply_P, cfg.mu, rhs)
            if k == 1 or k == cfg.k_max:
                resid = apply_P(f_new) + cfg.mu * f_new - rhs
                gaps.append(float(np.linalg.norm(resid) / np.linalg.norm(rhs)))
        y = soft_threshold(f_new - w, (cfg.tau / cfg.mu) * lam)
        w = w - (f_new - y)
        fid = 0.5 * float(np.sum((sample(frame.synthesize(f_new)) - b) ** 2))
        obj = fid + cfg.tau * float(np.sum(lam * np.abs(f_new)))
        change = _rel_change(f_new, f)
        f = f_new
        if cfg.reweight:
            lam = update_weights(f, S).lam
        run.trace.append(TraceRow(k, obj, fid, change, 1e3 * (time.perf_counter() - t0)))
        if change < cfg.eta:
            run.converged = True
            break
    run.f = f
    if gaps:
        run.info["smw_gap"] = max(gaps)
    run.wall_time = time.perf_counter() - t0
    return DataField(frame.synthesize(f), dt, cv), run


class _ImageModel:
    """``b ~ Phi A p`` with ``A`` a propagator and ``Phi`` a sensor selection."""

    def __init__(self, propagator, pat):
        self.prop = propagator
        self.sel = pat.selected
        self.n_sensor = pat.n_sensor
        if propagator.n_sensor != pat.n_sensor:
            raise ValueError("propagator and pattern disagree on the sensor count")

    def forward(self, p):
        return self.prop.forward(p)[:, self.sel]

    def adjoint(self, r):
        g = np.zeros((r.shape[0], self.n_sensor))
        g[:, self.sel] = r
        return self.prop.adjoint(g)

    def normal(self, p):
        return self.adjoint(self.forward(p))


def lipschitz_constant(propagator, pat, cfg: SolverConfig):
    """``||Psi A^T Phi^T Phi A Psi^T||`` for a tight frame ``Psi``, which equals
    the largest eigenvalue of ``A^T Phi^T Phi A`` on the image grid."""
    model = _ImageModel(propagator, pat)
    return power_iteration(model.normal, propagator.shape, cfg.power_tol, cfg.power_iter, cfg.seed)


def reconstruct_p0r(b, pat, tiling, cfg: SolverConfig, propagator, L=None):
    """Initial pressure from selected traces (reweighted FISTA), clipped at zero."""
    b, pat = _measurements(b, pat)
    t0 = time.perf_counter()
    model = _ImageModel(propagator, pat)
    if L is None:
        L = lipschitz_constant(propagator, pat, cfg)
    step = 1.0 / L
    n = int(np.prod(propagator.shape))
    S = sparsity_target(b.size, n, cfg.C)
    run = SolverRun(cfg, "p0r", info={"S": S, "n": n, "m": int(b.size), "L": L})

    f = np.ones(tiling.n_coeffs)
    y = np.zeros_like(f)
    lam = np.ones_like(f)
    alpha = 1.0
    Ay = np.zeros_like(b)
    Af = None
    for k in range(1, cfg.k_max + 1):
        z = y - step * tiling.analyze(model.adjoint(Ay - b))
        f_new = soft_threshold(z, step * cfg.tau * lam)
        Af_new = model.forward(tiling.synthesize(f_new))
        alpha_new = 0.5 * (1 + math.sqrt(1 + 4 * alpha ** 2))
        beta = (alpha - 1) / alpha_new
        y = f_new + beta * (f_new - f)
        Ay = Af_new + beta * (Af_new - Af) if beta else Af_new
        fid = 0.5 * float(np.sum((Af_new - b) ** 2))
        obj = fid + cfg.tau * float(np.sum(lam * np.abs(f_new)))
        change = _rel_change(f_new, f)
        f, Af, alpha = f_new, Af_new, alpha_new
        if cfg.reweight:
            lam = update_weights(f, S).lam
        run.trace.append(TraceRow(k, obj, fid, change, 1e3 * (time.perf_counter() - t0)))
        if change < cfg.eta:
            run.converged = True
            break
    run.f = f
    run.wall_time = time.perf_counter() - t0
    p0 = np.maximum(tiling.synthesize(f), 0.0)
    return ImageField(p0, propagator.h), run


def reconstruct_p0r_plus(b, pat, tiling, cfg: SolverConfig, propagator):
    """Non-negative initial pressure from selected traces (reweighted ADMM).

    The split ``y = (Psi p, p)`` turns the p-update into the least-squares
    problem ``[Phi A; sqrt(2 mu) I] p ~ [b; sqrt(2 mu) r]`` because
    ``Psi^T Psi = I``; it is solved by warm-started CGLS.
    """
    b, pat = _measurements(b, pat)
    t0 = time.perf_counter()
    model = _ImageModel(propagator, pat)
    mu = cfg.mu
    root = math.sqrt(2 * mu)
    n = int(np.prod(propagator.shape))
    S = sparsity_target(b.size, n, cfg.C)
    run = SolverRun(cfg, "p0r+", info={"S": S, "n": n, "m": int(b.size)})

    def apply_A(p):
        return (model.forward(p), root * p)

    def apply_At(r):
        return model.adjoint(r[0]) + root * r[1]

    p = np.zeros(propagator.shape)
    f = np.ones(tiling.n_coeffs)
    y1 = np.zeros_like(f)
    w1 = np.zeros_like(f)
    y2 = np.zeros_like(p)
    w2 = np.zeros_like(p)
    lam = np.ones_like(f)
    cgls_total = 0
    for k in range(1, cfg.k_max + 1):
        target = 0.5 * (tiling.synthesize(y1 - w1) + (y2 - w2))
        p, info = cgls(apply_A, apply_At, (b, root * target), cfg.cgls_tol, cfg.cgls_iter, x0=p)
        cgls_total += info["iterations"]
        Psi_p = tiling.analyze(p)
        y1 = soft_threshold(Psi_p + w1, (cfg.tau / mu) * lam)
        y2 = np.maximum(p + w2, 0.0)
        w1 = w1 + Psi_p - y1
        w2 = w2 + p - y2
        fid = 0.5 * float(np.sum(info["residual"][0] ** 2))
        obj = fid + cfg.tau * float(np.sum(lam * np.abs(Psi_p)))
        change = _rel_change(Psi_p, f)
        f = Psi_p
        if cfg.reweight:
            lam = update_weights(f, S).lam
        primal = math.sqrt(float(np.sum((Psi_p - y1) ** 2) + np.sum((p - y2) ** 2)))
        run.trace.append(TraceRow(k, obj, fid, change, 1e3 * (time.perf_counter() - t0),
                                  {"primal_residual": primal}))
        if change < cfg.eta:
            run.converged = True
            break
    run.f = f
    run.info["cgls_iterations"] = cgls_total
    run.wall_time = time.perf_counter() - t0
    return ImageField(y2, propagator.h), run
