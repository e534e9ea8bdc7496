import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import ndimage

from patcs.grids import ImageField
from patcs.metrics import metrics, ssim
from patcs.phantom import PhantomSpec, make_phantom


def test_no_vessels():
    assert not make_phantom(PhantomSpec(n_vessels=0)).values.any()


def test_seeded_phantom_is_reproducible():
    a = make_phantom(PhantomSpec(seed=4)).values
    assert np.array_equal(a, make_phantom(PhantomSpec(seed=4)).values)
    assert not np.array_equal(a, make_phantom(PhantomSpec(seed=5)).values)


DEFAULT_SUPPORT = 0.1917


def test_default_support_fraction():
    img = make_phantom().values
    frac = float(np.mean(img > 0))
    assert 0.03 <= frac <= 0.25
    assert frac == pytest.approx(DEFAULT_SUPPORT, abs=5e-4)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(12, 60), st.integers(12, 120))
def test_range_and_compact_support(seed, n1, n2):
    img = make_phantom(PhantomSpec(dims=(n1, n2), seed=seed, margin=2)).values
    assert img.min() >= 0 and img.max() <= 1
    assert not img[0].any() and not img[-1].any()
    assert not img[:, 0].any() and not img[:, -1].any()


def test_invalid_specs():
    for kw in [dict(dims=(4, 4), margin=2), dict(radius_range=(2.0, 1.0)), dict(n_vessels=-1)]:
        with pytest.raises(ValueError):
            make_phantom(PhantomSpec(**kw))


def test_field_metadata():
    f = make_phantom(PhantomSpec(spacing=1e-5))
    assert isinstance(f, ImageField) and f.spacing == 1e-5


# ------------------------------------------------------------------ metrics ----


def _ssim_oracle(rec, ref):
    r = np.arange(-5, 6)
    g = np.exp(-(r ** 2) / (2 * 1.5 ** 2))
    win = np.outer(g, g) / np.outer(g, g).sum()

    def blur(x):
        return ndimage.correlate(x, win, mode="reflect")

    L = np.abs(ref).max()
    c1, c2 = (0.01 * L) ** 2, (0.03 * L) ** 2
    mx, my = blur(ref), blur(rec)
    vx = blur(ref * ref) - mx ** 2
    vy = blur(rec * rec) - my ** 2
    cxy = blur(ref * rec) - mx * my
    smap = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx ** 2 + my ** 2 + c1) * (vx + vy + c2))
    return smap[5:-5, 5:-5].mean()


def test_ssim_matches_explicit_window():
    rng = np.random.default_rng(0)
    ref = make_phantom(PhantomSpec(dims=(40, 60), seed=1)).values
    rec = ref + 0.05 * rng.normal(size=ref.shape)
    assert ssim(rec, ref) == pytest.approx(_ssim_oracle(rec, ref), abs=1e-8)


def test_identical_images():
    ref = make_phantom(PhantomSpec(dims=(40, 60))).values
    rep = metrics(ref, ref)
    assert rep.mse == 0 and rep.ssim == pytest.approx(1.0)
    assert rep.psnr == math.inf and rep.snr == math.inf


def test_zero_reconstruction_snr():
    ref = make_phantom(PhantomSpec(dims=(40, 60))).values
    assert metrics(np.zeros_like(ref), ref).snr == 0.0


def test_formulas():
    rng = np.random.default_rng(1)
    ref = rng.random((20, 30))
    rec = ref + 0.1 * rng.normal(size=ref.shape)
    rep = metrics(rec, ref)
    mse = np.mean((ref - rec) ** 2)
    assert rep.mse == pytest.approx(mse, rel=1e-14)
    assert rep.psnr == pytest.approx(10 * np.log10(ref.max() ** 2 / mse), rel=1e-12)
    assert rep.snr == pytest.approx(20 * np.log10(np.linalg.norm(ref) / np.linalg.norm(ref - rec)), rel=1e-12)


def test_ssim_decreases_with_noise():
    ref = make_phantom(PhantomSpec(dims=(64, 96), seed=2)).values
    rng = np.random.default_rng(2)
    noise = rng.normal(size=ref.shape)
    values = [ssim(ref + s * ref.max() * noise, ref) for s in (0.05, 0.1, 0.2)]
    assert all(0 < v < 1 for v in values)
    assert values[0] > values[1] > values[2]


def test_shape_mismatch():
    with pytest.raises(ValueError):
        metrics(np.zeros((3, 3)), np.ones((3, 4)))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_permutation_invariance_and_anchoring(seed):
    rng = np.random.default_rng(seed)
    ref = rng.random((12, 14))
    rec = ref + 0.2 * rng.normal(size=ref.shape)
    perm = rng.permutation(ref.size)
    a = metrics(rec, ref)
    b = metrics(rec.ravel()[perm].reshape(ref.shape), ref.ravel()[perm].reshape(ref.shape))
    assert b.mse == pytest.approx(a.mse, rel=1e-12)
    assert b.psnr == pytest.approx(a.psnr, rel=1e-12)
    assert b.snr == pytest.approx(a.snr, rel=1e-12)
    swapped = metrics(ref, rec)
    assert swapped.mse == pytest.approx(a.mse, rel=1e-12)
    assert swapped.psnr != pytest.approx(a.psnr, rel=1e-9)
    assert swapped.snr != pytest.approx(a.snr, rel=1e-9)
