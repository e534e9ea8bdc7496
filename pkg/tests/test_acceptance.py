"""End-to-end acceptance checks; each prints one PASS/FAIL line.

Criteria 6 and 7 run the full 42x172 pipeline twice and take roughly
twenty minutes on one core.  Deselect them with ``-m "not slow"``.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from patcs.cli import main
from patcs.curvelet import Tiling, best_s_term_error, keep_largest
from patcs.pipeline import ExperimentConfig, Experiment, run_all
from patcs.sensing import make_pattern, subsample, zero_fill
from patcs.solvers import cg, cgls, power_iteration, smw_inverse, soft_threshold, update_weights
from patcs.wedge import out_of_range_energy

from test_cli import SMALL
from test_curvelet import dense_matrix


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'}: {detail}")
        return ok
    return emit


@pytest.fixture(scope="module")
def vessel():
    exp = Experiment(ExperimentConfig())
    p0, clean, noisy = exp.simulate()
    return exp, p0, clean, noisy


def _rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_1_tight_frame(report):
    t0 = time.perf_counter()
    tiling = Tiling((128, 128), 4, 32)
    rng = np.random.default_rng(0)
    rt = norm = 0.0
    for _ in range(20):
        u = rng.standard_normal((128, 128))
        c = tiling.analyze(u)
        rt = max(rt, _rel(tiling.synthesize(c), u))
        norm = max(norm, abs(np.linalg.norm(c) / np.linalg.norm(u) - 1))
    elapsed = time.perf_counter() - t0
    ok = rt <= 1e-6 and norm <= 1e-6 and elapsed < 30
    assert report(1, ok, f"roundtrip {rt:.2e}, norm {norm:.2e} (tol 1e-6), {elapsed:.1f}s (< 30s)")


def test_2_dense_oracle(report):
    worst = 0.0
    rng = np.random.default_rng(1)
    for dims, n_angles in (((32, 32), 8), ((32, 32), 16)):
        tiling = Tiling(dims, 3, n_angles)
        D = dense_matrix(tiling)
        for _ in range(3):
            u = rng.standard_normal(dims)
            worst = max(worst, _rel(tiling.analyze(u), D @ u.ravel()))
    assert report(2, worst <= 1e-8, f"max relative deviation {worst:.2e} (tol 1e-8)")


def _dot_test(apply, adjoint, x_shape, y_shape, seed):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        x = rng.standard_normal(x_shape)
        y = rng.standard_normal(y_shape)
        lhs = np.vdot(apply(x), y)
        rhs = np.vdot(x, adjoint(y))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs)))
    return worst


def test_3_dot_tests(report, vessel):
    exp = vessel[0]
    prop, frame = exp.acquisition, exp.data_frame
    n = frame.n_coeffs
    errs = {
        "wave": _dot_test(prop.forward, prop.adjoint, prop.shape, prop.data_shape, 0),
        "curvelet": _dot_test(frame.tiling.analyze, frame.tiling.synthesize, frame.dims, n, 1),
        "wedge": _dot_test(frame.analyze, frame.synthesize, frame.dims, n, 2),
    }
    ok = max(errs.values()) <= 1e-10
    assert report(3, ok, ", ".join(f"{k} {v:.2e}" for k, v in errs.items()) + " (tol 1e-10)")


def test_4_range_projection(report, vessel):
    t0 = time.perf_counter()
    exp, _, clean, noisy = vessel
    frame = exp.data_frame
    g = clean.values
    loss = _rel(frame.synthesize(frame.analyze(g)), g)
    pat = exp.pattern()
    z = zero_fill(subsample(noisy, pat), pat).values
    restricted = out_of_range_energy(frame.analyze(z), frame.spec)
    plain = out_of_range_energy(frame.tiling.analyze(z), frame.spec)
    elapsed = time.perf_counter() - t0
    ok = loss <= 0.08 and restricted == 0.0 and plain > 0 and elapsed < 120
    assert report(4, ok, f"projection loss {loss:.4f} (<= 0.08), out-of-range energy "
                         f"restricted {restricted} / plain {plain:.3e} of {np.sum(z ** 2):.3e}, {elapsed:.0f}s")


def test_5_sparsity_ordering(report, vessel):
    exp, p0, clean, _ = vessel
    ref = exp.reference(p0).values
    image_err = best_s_term_error(ref, exp.image_tiling, int(0.05 * ref.size))
    frame, g = exp.data_frame, clean.values
    approx = frame.synthesize(keep_largest(frame.analyze(g), int(0.05 * g.size)))
    data_err = _rel(approx, g)
    assert report(5, image_err < data_err, f"image {image_err:.4f} < data {data_err:.4f}")


@pytest.fixture(scope="module")
def runs():
    cache = {}

    def get(sigma):
        if sigma not in cache:
            cache[sigma] = {m: r[0] for m, r in run_all(ExperimentConfig(sigma=sigma)).items()}
        return cache[sigma]
    return get


def _table(res):
    return "; ".join(f"{m} psnr {r.psnr:.2f} ssim {r.ssim:.3f}" for m, r in res.items())


@pytest.mark.slow
def test_6_method_ordering(report, runs):
    t0 = time.perf_counter()
    r = runs(0.01)
    elapsed = time.perf_counter() - t0
    order = r["p0r"].psnr > r["dr"].psnr > r["tr"].psnr
    ssim = r["p0r+"].ssim >= 0.9 * r["p0r"].ssim
    ok = order and ssim and elapsed < 1800
    assert report(6, ok, f"{_table(r)}; PSNR order {'ok' if order else 'violated'}, "
                         f"SSIM(p0r+)/SSIM(p0r) = {r['p0r+'].ssim / r['p0r'].ssim:.3f} (>= 0.9), {elapsed:.0f}s")


@pytest.mark.slow
def test_7_noise_robustness(report, runs):
    low, high = runs(0.01), runs(0.04)
    drops = {m: low[m].psnr - high[m].psnr for m in low}
    ok = all(d > 0 for d in drops.values()) and high["p0r"].ssim >= high["dr"].ssim
    assert report(7, ok, f"sigma 0.04: {_table(high)}; PSNR drop "
                         + ", ".join(f"{m} {d:.2f}" for m, d in drops.items()))


def test_8_kernels(report):
    rng = np.random.default_rng(3)
    # soft threshold against a brute-force scalar minimizer
    def brute(y, t=0.7):
        x = np.linspace(-4, 4, 8001)
        for half in (1e-3, 1e-6):  # coarse scan, then refine around the best point
            best = x[np.argmin(0.5 * (x - y) ** 2 + t * np.abs(x))]
            x = np.linspace(best - half, best + half, 2001)
        return x[np.argmin(0.5 * (x - y) ** 2 + t * np.abs(x))]

    ys = np.append(rng.uniform(-3, 3, 25), [0.7, -0.7, 0.0])
    e_soft = np.max(np.abs(soft_threshold(ys, 0.7) - [brute(y) for y in ys]))

    w = update_weights(np.array([0.5, 0.05, 0.005]), 2)
    e_w = max(abs(w.epsilon - 0.1), np.max(np.abs(w.lam - [1 / 0.6, 1 / 0.15, 1 / 0.105])))

    tiling = Tiling((64, 32), 3, 8)
    pat = make_pattern(32, 0.4, seed=2)

    def apply_P(v):
        g = tiling.synthesize(v)
        g[:, ~pat.mask] = 0
        return tiling.analyze(g)

    rhs = rng.standard_normal(tiling.n_coeffs)
    exact, _ = cg(lambda v: apply_P(v) + 0.1 * v, rhs, 1e-13, 500)
    e_smw = _rel(smw_inverse(apply_P, 0.1, rhs), exact)

    B = rng.standard_normal((60, 60))
    M = B @ B.T
    e_pow = abs(power_iteration(lambda v: M @ v, 60, 1e-12, 5000) / np.linalg.eigvalsh(M)[-1] - 1)

    A = rng.standard_normal((40, 25))
    b = rng.standard_normal(40)
    x, _ = cgls(lambda v: A @ v, lambda r: A.T @ r, b, 1e-14, 200)
    e_cgls = _rel(x, np.linalg.solve(A.T @ A, A.T @ b))

    errs = {"soft_threshold": (e_soft, 1e-6), "update_weights": (e_w, 1e-12), "smw": (e_smw, 1e-8),
            "power": (e_pow, 1e-6), "cgls": (e_cgls, 1e-8)}
    ok = all(e <= tol for e, tol in errs.values())
    assert report(8, ok, ", ".join(f"{k} {e:.1e} (tol {tol:g})" for k, (e, tol) in errs.items()))


def test_9_determinism(report, tmp_path):
    cfg = tmp_path / "small.ini"
    cfg.write_text(SMALL)
    for name in ("first", "second"):
        main(["run", "--config", str(cfg), "--out", str(tmp_path / name)])
    a = (tmp_path / "first" / "metrics.csv").read_bytes()
    b = (tmp_path / "second" / "metrics.csv").read_bytes()
    assert report(9, a == b and len(a.splitlines()) == 5, f"metrics.csv byte-identical across reruns ({len(a)} bytes)")
