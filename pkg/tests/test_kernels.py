"""Array kernels: backend selection, compiled/pure parity, EDT, smoothing."""

import importlib
import subprocess
import sys

import numpy as np
import pytest

import affplan._kernels as kernels
from affplan._kernels import _py

import oracles

try:
    from affplan._kernels import _ext
except ImportError:
    _ext = None

needs_ext = pytest.mark.skipif(_ext is None, reason="compiled kernels not built")


def test_backend_is_reported():
    assert kernels.BACKEND in ("py", "ext")
    assert kernels.backend_name() == kernels.BACKEND


def test_env_var_forces_pure_python():
    code = (
        "import affplan._kernels as k; print(k.BACKEND)"
    )
    out = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True,
        text=True,
        env={"AFFPLAN_KERNELS": "py", "PATH": "/usr/bin:/bin"},
    )
    assert out.returncode == 0
    assert out.stdout.strip() == "py"


def test_env_var_rejects_unknown_backend(monkeypatch):
    monkeypatch.setenv("AFFPLAN_KERNELS", "gpu")
    with pytest.raises(ValueError):
        importlib.reload(kernels)
    monkeypatch.delenv("AFFPLAN_KERNELS")
    importlib.reload(kernels)


def _random_attention(rng):
    c = int(rng.integers(1, 5))
    n = int(rng.integers(1, 7))
    a = rng.normal(size=(c, n))
    wk, wq, wv = (rng.normal(size=(c, c)) for _ in range(3))
    alpha = float(rng.normal())
    return a, wk, wq, wv, alpha


@needs_ext
def test_attention_forward_parity():
    rng = np.random.default_rng(11)
    for _ in range(40):
        a, wk, wq, wv, alpha = _random_attention(rng)
        b1, w1 = _py.attention_forward(a, wk, wq, wv, alpha)
        b2, w2 = _ext.attention_forward(a, wk, wq, wv, alpha)
        assert np.allclose(b1, b2, atol=1e-12)
        assert np.allclose(w1, w2, atol=1e-12)


@needs_ext
def test_attention_backward_parity():
    rng = np.random.default_rng(12)
    for _ in range(40):
        a, wk, wq, wv, alpha = _random_attention(rng)
        up = rng.normal(size=a.shape)
        g1 = _py.attention_backward(a, wk, wq, wv, alpha, up)
        g2 = _ext.attention_backward(a, wk, wq, wv, alpha, up)
        for x, y in zip(g1, g2):
            assert np.allclose(x, y, atol=1e-11)


@needs_ext
def test_edt_parity():
    rng = np.random.default_rng(13)
    for _ in range(40):
        h, w = (int(x) for x in rng.integers(1, 12, size=2))
        mask = rng.random(size=(h, w)) < 0.3
        d1 = _py.squared_edt(mask)
        d2 = _ext.squared_edt(mask)
        assert np.array_equal(d1, d2)


@needs_ext
def test_smooth_parity():
    rng = np.random.default_rng(14)
    for _ in range(40):
        h, w = (int(x) for x in rng.integers(1, 12, size=2))
        vals = rng.random(size=(h, w))
        fg = (rng.random(size=(h, w)) < 0.5).astype(np.float64)
        r = int(rng.integers(1, 6))
        s1 = _py.masked_gaussian_smooth(vals, fg, 2.0, r)
        s2 = _ext.masked_gaussian_smooth(vals, fg, 2.0, r)
        assert np.allclose(s1, s2, atol=1e-12, equal_nan=False)


@pytest.mark.parametrize("mod", [_py] + ([_ext] if _ext else []))
def test_edt_matches_bruteforce(mod):
    rng = np.random.default_rng(15)
    for _ in range(30):
        h, w = (int(x) for x in rng.integers(1, 8, size=2))
        mask = rng.random(size=(h, w)) < 0.35
        got = mod.squared_edt(mask)
        want = oracles.edt_bruteforce(mask)
        assert np.array_equal(got, want)


@pytest.mark.parametrize("mod", [_py] + ([_ext] if _ext else []))
def test_edt_empty_mask_is_infinite(mod):
    d = mod.squared_edt(np.zeros((3, 4), dtype=bool))
    assert np.all(np.isinf(d))


@pytest.mark.parametrize("mod", [_py] + ([_ext] if _ext else []))
def test_edt_full_mask_is_zero(mod):
    d = mod.squared_edt(np.ones((4, 3), dtype=bool))
    assert np.array_equal(d, np.zeros((4, 3)))


def test_edt_known_values():
    mask = np.zeros((3, 5), dtype=bool)
    mask[1, 1] = True
    d = kernels.squared_edt(mask)
    assert d[1, 1] == 0.0
    assert d[0, 0] == 2.0
    assert d[1, 4] == 9.0
    assert d[2, 3] == 5.0


def test_masked_smooth_single_site():
    # only one foreground pixel: the average is that pixel's own value
    vals = np.arange(12, dtype=np.float64).reshape(3, 4)
    fg = np.zeros((3, 4))
    fg[1, 2] = 1.0
    out = kernels.masked_gaussian_smooth(vals, fg, 2.0, 3)
    assert out[1, 2] == pytest.approx(vals[1, 2], abs=1e-12)


def test_masked_smooth_uniform_field():
    # averaging a constant field over any window returns the constant
    vals = np.full((5, 6), 0.7)
    fg = np.ones((5, 6))
    out = kernels.masked_gaussian_smooth(vals, fg, 1.5, 4)
    assert np.allclose(out, 0.7, atol=1e-12)


def test_masked_smooth_zero_where_no_support():
    vals = np.ones((4, 4))
    fg = np.zeros((4, 4))
    out = kernels.masked_gaussian_smooth(vals, fg, 1.0, 2)
    assert np.array_equal(out, np.zeros((4, 4)))
