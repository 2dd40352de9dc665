"""Convolution/pooling kernels: reference vs compiled vs naive loops."""

import subprocess
import sys

import numpy as np
import pytest

from melmask import kernels

from _oracles import grad_close, numeric_grad


def conv_loops(x, w, stride, pad):
    """Direct five-loop cross-correlation with zero padding."""
    n, cin, h, wd = x.shape
    cout, _, kh, kw = w.shape
    sh, sw = stride
    ph, pw = pad
    xp = np.zeros((n, cin, h + 2 * ph, wd + 2 * pw))
    xp[:, :, ph : ph + h, pw : pw + wd] = x
    ho = (h + 2 * ph - kh) // sh + 1
    wo = (wd + 2 * pw - kw) // sw + 1
    y = np.zeros((n, cout, ho, wo))
    for b in range(n):
        for co in range(cout):
            for i in range(ho):
                for j in range(wo):
                    patch = xp[b, :, i * sh : i * sh + kh, j * sw : j * sw + kw]
                    y[b, co, i, j] = np.sum(patch * w[co])
    return y


def pool_loops(x, pool):
    n, c, h, w = x.shape
    ph, pw = pool
    ho, wo = h // ph, w // pw
    y = np.zeros((n, c, ho, wo))
    for b in range(n):
        for ch in range(c):
            for i in range(ho):
                for j in range(wo):
                    y[b, ch, i, j] = np.max(
                        x[b, ch, i * ph : (i + 1) * ph, j * pw : (j + 1) * pw]
                    )
    return y


def cases():
    rng = np.random.default_rng(0)
    yield rng.standard_normal((2, 3, 8, 7)), rng.standard_normal((4, 3, 3, 3)), (1, 1), (1, 1)
    yield rng.standard_normal((1, 1, 5, 5)), rng.standard_normal((2, 1, 3, 3)), (1, 1), (0, 0)
    yield rng.standard_normal((3, 2, 9, 6)), rng.standard_normal((2, 2, 3, 3)), (2, 2), (1, 1)


class TestConvForward:
    def test_matches_loop_oracle(self):
        for x, w, stride, pad in cases():
            y = kernels.conv2d_forward(x, w, stride, pad)
            np.testing.assert_allclose(y, conv_loops(x, w, stride, pad), atol=1e-12)

    def test_backends_bit_identical(self):
        if len(kernels.available_backends()) < 2:
            pytest.skip("compiled backend not built")
        a = kernels.get_backend("numpy")
        b = kernels.get_backend("compiled")
        for x, w, stride, pad in cases():
            ya = a.conv2d_forward(x, w, stride, pad)
            yb = b.conv2d_forward(x, w, stride, pad)
            assert np.array_equal(ya, yb)


class TestConvBackward:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((2, 2, 6, 5))
        w = rng.standard_normal((3, 2, 3, 3))
        gy = rng.standard_normal(kernels.conv2d_forward(x, w, (1, 1), (1, 1)).shape)
        gx, gw = kernels.conv2d_backward(x, w, gy, (1, 1), (1, 1))
        num_x = numeric_grad(
            lambda arr: float(np.sum(kernels.conv2d_forward(arr, w, (1, 1), (1, 1)) * gy)), x
        )
        num_w = numeric_grad(
            lambda arr: float(np.sum(kernels.conv2d_forward(x, arr, (1, 1), (1, 1)) * gy)), w
        )
        assert grad_close(gx, num_x, 1e-6)
        assert grad_close(gw, num_w, 1e-6)

    def test_backends_bit_identical(self):
        if len(kernels.available_backends()) < 2:
            pytest.skip("compiled backend not built")
        rng = np.random.default_rng(2)
        for x, w, stride, pad in cases():
            gy = rng.standard_normal(kernels.conv2d_forward(x, w, stride, pad).shape)
            ga = kernels.get_backend("numpy").conv2d_backward(x, w, gy, stride, pad)
            gb = kernels.get_backend("compiled").conv2d_backward(x, w, gy, stride, pad)
            assert np.array_equal(ga[0], gb[0])
            assert np.array_equal(ga[1], gb[1])


class TestPooling:
    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((2, 3, 8, 12))
        y, _ = kernels.maxpool2d_forward(x, (2, 4))
        np.testing.assert_array_equal(y, pool_loops(x, (2, 4)))

    def test_remainder_rows_cropped(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((1, 1, 7, 9))
        y, _ = kernels.maxpool2d_forward(x, (2, 4))
        assert y.shape == (1, 1, 3, 2)
        np.testing.assert_array_equal(y, pool_loops(x[:, :, :6, :8], (2, 4)))

    def test_backward_routes_single_winner(self):
        x = np.zeros((1, 1, 2, 2))
        x[0, 0, 1, 0] = 5.0
        y, arg = kernels.maxpool2d_forward(x, (2, 2))
        gx = kernels.maxpool2d_backward(np.ones_like(y), arg, x.shape, (2, 2))
        expected = np.zeros_like(x)
        expected[0, 0, 1, 0] = 1.0
        np.testing.assert_array_equal(gx, expected)

    def test_backward_fd(self):
        rng = np.random.default_rng(5)
        x = (rng.permutation(np.arange(48)).astype(np.float64) * 0.31).reshape(1, 2, 4, 6)
        y, arg = kernels.maxpool2d_forward(x, (2, 2))
        gy = rng.standard_normal(y.shape)
        gx = kernels.maxpool2d_backward(gy, arg, x.shape, (2, 2))
        num = numeric_grad(
            lambda arr: float(np.sum(kernels.maxpool2d_forward(arr, (2, 2))[0] * gy)), x
        )
        assert grad_close(gx, num, 1e-6)

    def test_backends_bit_identical(self):
        if len(kernels.available_backends()) < 2:
            pytest.skip("compiled backend not built")
        rng = np.random.default_rng(6)
        x = rng.standard_normal((2, 2, 10, 8))
        ya, aa = kernels.get_backend("numpy").maxpool2d_forward(x, (2, 4))
        yb, ab = kernels.get_backend("compiled").maxpool2d_forward(x, (2, 4))
        assert np.array_equal(ya, yb)
        assert np.array_equal(aa, ab)
        gy = rng.standard_normal(ya.shape)
        ga = kernels.get_backend("numpy").maxpool2d_backward(gy, aa, x.shape, (2, 4))
        gb = kernels.get_backend("compiled").maxpool2d_backward(gy, ab, x.shape, (2, 4))
        assert np.array_equal(ga, gb)


class TestBackendSelection:
    def test_active_backend_is_listed(self):
        assert kernels.BACKEND in kernels.available_backends()

    def test_env_override_numpy(self):
        code = (
            "import os; os.environ['MELMASK_KERNELS'] = 'numpy'; "
            "from melmask import kernels; print(kernels.BACKEND)"
        )
        out = subprocess.run(
            [sys.executable, "-c", code], capture_output=True, text=True
        )
        assert out.returncode == 0
        assert out.stdout.strip() == "numpy"

    def test_env_override_unknown_rejected(self):
        code = (
            "import os; os.environ['MELMASK_KERNELS'] = 'cuda'; "
            "import melmask.kernels"
        )
        out = subprocess.run(
            [sys.executable, "-c", code], capture_output=True, text=True
        )
        assert out.returncode != 0
        assert "MELMASK_KERNELS" in out.stderr

    def test_get_backend_unknown_rejected(self):
        with pytest.raises(ValueError):
            kernels.get_backend("mystery")
