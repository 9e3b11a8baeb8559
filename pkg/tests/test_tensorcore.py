"""Kernel backends, checkpoint format, and optimizer state."""

import struct
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linker.errors import FormatError
from linker.tensorcore import BACKEND, Adam, Tensor, backward
from linker.tensorcore.checkpoint import load_checkpoint, save_checkpoint
from linker.tensorcore.kernels import fallback
from linker.tensorcore.optim import adam_step

_convcore = pytest.importorskip(
    "linker.tensorcore.kernels._convcore",
    reason="compiled kernels not built")


class TestBackendAgreement:
    """The compiled and numpy kernels must be interchangeable."""

    @pytest.mark.parametrize("c,h,w,o,k,stride,pad", [
        (1, 4, 4, 1, 3, 1, 1),
        (3, 8, 5, 4, 3, 1, 1),
        (2, 9, 9, 2, 3, 2, 1),
        (4, 7, 3, 8, 1, 1, 0),
        (2, 12, 6, 3, 5, 2, 2),
        (1, 3, 3, 1, 3, 3, 0),
    ])
    def test_conv2d_all_passes(self, c, h, w, o, k, stride, pad):
        rng = np.random.default_rng(c * 100 + h)
        x = rng.normal(size=(c, h, w))
        wt = rng.normal(size=(o, c, k, k))
        a = _convcore.conv2d_fwd(x, wt, stride, pad, pad)
        b = fallback.conv2d_fwd(x, wt, stride, pad, pad)
        assert a.shape == b.shape
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)

        gy = rng.normal(size=a.shape)
        np.testing.assert_allclose(
            _convcore.conv2d_bwd_weight(x, gy, stride, pad, pad, k, k),
            fallback.conv2d_bwd_weight(x, gy, stride, pad, pad, k, k),
            rtol=1e-13, atol=1e-13)
        np.testing.assert_allclose(
            _convcore.conv2d_bwd_input(gy, wt, stride, pad, pad, h, w),
            fallback.conv2d_bwd_input(gy, wt, stride, pad, pad, h, w),
            rtol=1e-13, atol=1e-13)

    @pytest.mark.parametrize("c,h,w,k,stride", [
        (1, 4, 4, 2, 2), (3, 9, 7, 2, 2), (2, 8, 8, 3, 1), (1, 5, 5, 2, 1),
    ])
    def test_maxpool_identical(self, c, h, w, k, stride):
        rng = np.random.default_rng(7)
        x = rng.normal(size=(c, h, w))
        ya, ia = _convcore.maxpool2d_fwd(x, k, stride)
        yb, ib = fallback.maxpool2d_fwd(x, k, stride)
        np.testing.assert_array_equal(ya, yb)
        # both resolve ties to the first window element, so even the
        # routing indices agree
        np.testing.assert_array_equal(ia, ib)
        gy = rng.normal(size=ya.shape)
        np.testing.assert_array_equal(
            _convcore.maxpool2d_bwd(gy, ia, h, w),
            fallback.maxpool2d_bwd(gy, ib, h, w))

    def test_maxpool_tie_routes_first(self):
        x = np.zeros((1, 2, 2))
        _, idx = _convcore.maxpool2d_fwd(x, 2, 2)
        assert idx[0, 0, 0] == 0
        _, idx = fallback.maxpool2d_fwd(x, 2, 2)
        assert idx[0, 0, 0] == 0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 3), st.integers(3, 10), st.integers(3, 10),
           st.integers(1, 4), st.integers(0, 2))
    def test_conv_fuzz(self, c, h, w, o, pad):
        rng = np.random.default_rng(h * 31 + w)
        x = rng.normal(size=(c, h, w))
        wt = rng.normal(size=(o, c, 3, 3))
        np.testing.assert_allclose(
            _convcore.conv2d_fwd(x, wt, 1, pad, pad),
            fallback.conv2d_fwd(x, wt, 1, pad, pad),
            rtol=1e-13, atol=1e-13)

    def test_backend_reports_and_env_forces_fallback(self):
        import os
        expected = "python" if os.environ.get("LINKER_PURE_PY") else "cython"
        assert BACKEND == expected
        out = subprocess.run(
            [sys.executable, "-c",
             "from linker.tensorcore import BACKEND; print(BACKEND)"],
            capture_output=True, text=True, check=True,
            env={"PATH": "/usr/bin:/bin", "LINKER_PURE_PY": "1"})
        assert out.stdout.strip() == "python"


class TestCheckpointFormat:
    def test_round_trip_mixed_records(self, tmp_path):
        rng = np.random.default_rng(0)
        records = [
            ("layer/w", rng.normal(size=(3, 4))),
            ("layer/b", rng.normal(size=4).astype(np.float32)),
            ("meta/epoch", np.array(17.0)),          # 0-d
            ("名前/テーブル", rng.normal(size=(2, 2, 2))),
        ]
        path = tmp_path / "m.lnkr"
        save_checkpoint(path, records)
        back = load_checkpoint(path)
        assert list(back) == [n for n, _ in records]
        for name, arr in records:
            assert back[name].dtype == arr.dtype
            np.testing.assert_array_equal(back[name], arr)

    def test_resave_is_byte_identical(self, tmp_path):
        rng = np.random.default_rng(1)
        save_checkpoint(tmp_path / "a.lnkr",
                        [("x", rng.normal(size=(5, 2)))])
        save_checkpoint(tmp_path / "b.lnkr",
                        list(load_checkpoint(tmp_path / "a.lnkr").items()))
        assert (tmp_path / "a.lnkr").read_bytes() == \
            (tmp_path / "b.lnkr").read_bytes()

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.lnkr"
        p.write_bytes(b"NOPE" + b"\x00" * 8)
        with pytest.raises(FormatError, match="not a LNKR"):
            load_checkpoint(p)

    def test_bad_version(self, tmp_path):
        p = tmp_path / "x.lnkr"
        p.write_bytes(b"LNKR" + struct.pack("<II", 99, 0))
        with pytest.raises(FormatError, match="version"):
            load_checkpoint(p)

    def test_truncated(self, tmp_path):
        p = tmp_path / "x.lnkr"
        save_checkpoint(p, [("x", np.ones((4, 4)))])
        blob = p.read_bytes()
        p.write_bytes(blob[:10])
        with pytest.raises(FormatError, match="truncated"):
            load_checkpoint(p)

    @settings(max_examples=25, deadline=None)
    @given(shape=st.lists(st.integers(0, 5), max_size=3))
    def test_arbitrary_shapes(self, tmp_path_factory, shape):
        path = tmp_path_factory.mktemp("ck") / "s.lnkr"
        arr = np.arange(int(np.prod(shape)), dtype=float).reshape(shape)
        save_checkpoint(path, [("a", arr)])
        got = load_checkpoint(path)["a"]
        assert got.shape == arr.shape
        np.testing.assert_array_equal(got, arr)


class TestAdam:
    def test_matches_hand_stepped_reference(self):
        rng = np.random.default_rng(3)
        p = Tensor(rng.normal(size=(4,)), requires_grad=True)
        opt = Adam([("p", p)], lr=0.01)
        ref_p = p.data.copy()
        ref_m = np.zeros(4)
        ref_v = np.zeros(4)
        for t in range(1, 4):
            loss = (p * p).sum()
            opt.zero_grad()
            backward(loss)
            g = 2.0 * ref_p
            np.testing.assert_allclose(p.grad, g, rtol=1e-12, atol=0)
            opt.step()
            ref_p, ref_m, ref_v = adam_step(ref_p, g, ref_m, ref_v, t, 0.01)
            np.testing.assert_array_equal(p.data, ref_p)
        assert opt.t == 3

    def test_missing_grad_treated_as_zero(self):
        p = Tensor(np.ones(3), requires_grad=True)
        opt = Adam([("p", p)], lr=0.5)
        opt.step()
        np.testing.assert_array_equal(p.data, np.ones(3))

    def test_state_round_trip_resumes_identically(self, tmp_path):
        rng = np.random.default_rng(4)

        def fresh():
            t = Tensor(np.linspace(-1, 1, 6), requires_grad=True)
            return t, Adam([("w", t)], lr=0.05)

        def one_step(t, opt, g):
            opt.zero_grad()
            t.grad = g.copy()
            opt.step()

        grads = [rng.normal(size=6) for _ in range(4)]
        a, opt_a = fresh()
        for g in grads:
            one_step(a, opt_a, g)

        b, opt_b = fresh()
        for g in grads[:2]:
            one_step(b, opt_b, g)
        save_checkpoint(tmp_path / "opt.lnkr",
                        [("w", b.data)] + opt_b.state_arrays())

        c, opt_c = fresh()
        back = load_checkpoint(tmp_path / "opt.lnkr")
        c.data = back["w"].copy()
        opt_c.load_state_arrays(back)
        assert opt_c.t == 2
        for g in grads[2:]:
            one_step(c, opt_c, g)
        np.testing.assert_array_equal(c.data, a.data)
        np.testing.assert_array_equal(opt_c.m["w"], opt_a.m["w"])
        np.testing.assert_array_equal(opt_c.v["w"], opt_a.v["w"])
