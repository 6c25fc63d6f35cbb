"""Network math against slow, independent oracles.

The forward pass is checked with explicit python loops (including the
asymmetric padding of the 4x4 layer), gradients against central finite
differences, and the optimizer against a scalar replay of its pinned
op sequence, which must match bit for bit.
"""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from leveltrace import neuralnet as nn
from leveltrace.errors import IoFailure, ShapeMismatch, VersionMismatch

EPSILON = 1e-4  # finite-difference step


def one_hot_state(rng, width, height):
    """Random grid state: exactly one active channel per cell."""
    chan = rng.integers(0, nn.N_INPUT_CHANNELS, size=(width, height))
    state = np.zeros((width, height, nn.N_INPUT_CHANNELS))
    for x in range(width):
        for y in range(height):
            state[x, y, chan[x, y]] = 1.0
    return state


def conv_same_loops(a, weights, bias, slope):
    """Stride-1 same conv + leaky rectifier, written as bare loops.

    Padding splits (k - 1) into (k - 1) // 2 before and the remainder
    after, which matters for the even 4x4 kernel.
    """
    w, h, c_in = a.shape
    f, k = weights.shape[0], weights.shape[1]
    pb = (k - 1) // 2
    out = np.zeros((w, h, f))
    for x in range(w):
        for y in range(h):
            for fi in range(f):
                acc = bias[fi]
                for dx in range(k):
                    for dy in range(k):
                        sx, sy = x + dx - pb, y + dy - pb
                        if 0 <= sx < w and 0 <= sy < h:
                            for c in range(c_in):
                                acc += weights[fi, dx, dy, c] * a[sx, sy, c]
                out[x, y, fi] = acc if acc > 0.0 else slope * acc
    return out


class TestForwardOracle:
    def test_full_chain_matches_loops(self):
        cfg = nn.NetworkConfig(width=3, height=3, seed=5)
        params = nn.init_params(cfg)
        rng = np.random.default_rng(9)
        state = one_hot_state(rng, 3, 3)

        a = state
        for i in range(len(nn.CONV_SPECS)):
            a = conv_same_loops(a, params.conv_w[i], params.conv_b[i], cfg.leaky_slope)
        flat = a.reshape(-1)
        n = flat.size
        out = np.zeros(n)
        for row in range(n):
            acc = params.dense_b[row]
            for col in range(n):
                acc += params.dense_w[row, col] * flat[col]
            out[row] = acc if acc > 0.0 else cfg.leaky_slope * acc

        got = nn.predict(params, state)
        np.testing.assert_allclose(got.reshape(-1), out, rtol=1e-10, atol=1e-12)

    def test_conv1_even_kernel_padding(self):
        # the 4x4 layer pads 1 before and 2 after; a translated input must
        # NOT produce a translated output at the grid edge
        cfg = nn.NetworkConfig(width=6, height=5, seed=2)
        params = nn.init_params(cfg)
        rng = np.random.default_rng(3)
        state = one_hot_state(rng, 6, 5)
        fwd = nn.forward(params, state)
        oracle = conv_same_loops(state, params.conv_w[0], params.conv_b[0], cfg.leaky_slope)
        np.testing.assert_allclose(fwd.conv_post[0], oracle, rtol=1e-10, atol=1e-12)

    def test_output_shape_and_dtype(self):
        cfg = nn.NetworkConfig(width=4, height=3, seed=0)
        params = nn.init_params(cfg)
        out = nn.predict(params, one_hot_state(np.random.default_rng(0), 4, 3))
        assert out.shape == (4, 3, nn.N_OUTPUT_CHANNELS)
        assert out.dtype == np.float64

    def test_im2col_row_and_column_order(self):
        # row x*h + y, column (dx*k + dy)*c_in + c
        w, h, c, k = 3, 2, 2, 3
        a = np.arange(w * h * c, dtype=np.float64).reshape(w, h, c)
        padded, pb = nn._pad_same(a, k)
        col = nn._im2col(padded, k, w, h)
        assert col.shape == (w * h, k * k * c)
        for x in range(w):
            for y in range(h):
                for dx in range(k):
                    for dy in range(k):
                        for cc in range(c):
                            sx, sy = x + dx - pb, y + dy - pb
                            want = 0.0
                            if 0 <= sx < w and 0 <= sy < h:
                                want = a[sx, sy, cc]
                            assert col[x * h + y, (dx * k + dy) * c + cc] == want


@given(
    hnp.arrays(np.float64, hnp.array_shapes(max_dims=3, max_side=6),
               elements=st.floats(-100, 100)),
    st.floats(0.001, 0.5),
)
def test_leaky_relu_is_piecewise_linear(z, slope):
    out = nn.leaky_relu(z, slope)
    for zi, oi in zip(z.ravel(), out.ravel()):
        assert oi == (zi if zi > 0.0 else slope * zi)


class TestGradcheck:
    """Central finite differences on a seed pinned away from rectifier kinks.

    rel = |a - n| / max(|a|, |n|, 1e-5); the 1e-5 floor keeps the ratio
    meaningful where the true derivative underflows the FD noise floor
    (~1e-11 at this step size).
    """

    W, H = 6, 5

    def setup_case(self):
        cfg = nn.NetworkConfig(width=self.W, height=self.H, seed=1)
        params = nn.init_params(cfg)
        rng = np.random.default_rng(112)
        state = one_hot_state(rng, self.W, self.H)
        target = rng.normal(0.0, 0.5, size=(self.W, self.H, nn.N_OUTPUT_CHANNELS))
        return params, state, target, rng

    def numeric_grad(self, params, state, target, array, idx):
        orig = array.flat[idx]
        array.flat[idx] = orig + EPSILON
        lp = nn.mse_loss(nn.predict(params, state), target)
        array.flat[idx] = orig - EPSILON
        lm = nn.mse_loss(nn.predict(params, state), target)
        array.flat[idx] = orig
        return (lp - lm) / (2.0 * EPSILON)

    def test_no_kink_within_fd_reach(self):
        # if any pre-activation sat within the FD step of zero, the
        # rectifier could change slope mid-difference and the comparison
        # below would be measuring the wrong thing
        params, state, target, _ = self.setup_case()
        fwd = nn.forward(params, state)
        margins = [np.min(np.abs(p)) for p in fwd.conv_pre]
        margins.append(np.min(np.abs(fwd.dense_pre)))
        assert min(margins) > 2.0 * EPSILON

    def test_analytic_matches_central_differences(self):
        params, state, target, rng = self.setup_case()
        _, grads, _ = nn.loss_and_gradients(params, state, target)
        arrays = [a for _, a in params.arrays()]
        garrays = grads.arrays()
        sizes = np.array([a.size for a in arrays])
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        picks = rng.integers(0, sizes.sum(), size=250)

        worst = 0.0
        for flat in picks:
            ai = int(np.searchsorted(offsets, flat, side="right") - 1)
            idx = int(flat - offsets[ai])
            num = self.numeric_grad(params, state, target, arrays[ai], idx)
            ana = garrays[ai].flat[idx]
            rel = abs(ana - num) / max(abs(ana), abs(num), 1e-5)
            worst = max(worst, rel)
        assert worst < 1e-5

    def test_harness_catches_a_corrupted_gradient(self):
        # sanity check on the checker itself: a 1e-3 error in one
        # coordinate must blow past the acceptance threshold
        params, state, target, _ = self.setup_case()
        _, grads, _ = nn.loss_and_gradients(params, state, target)
        num = self.numeric_grad(params, state, target, params.dense_b, 0)
        bad = grads.dense_b[0] + 1e-3
        rel = abs(bad - num) / max(abs(bad), abs(num), 1e-5)
        assert rel > 1e-5

    def test_loss_value_matches_mean_square(self):
        params, state, target, _ = self.setup_case()
        loss, _, fwd = nn.loss_and_gradients(params, state, target)
        diff = fwd.output - target
        assert loss == pytest.approx(np.mean(diff * diff), rel=1e-12)


def synthetic_grads(params, rng):
    return nn.Grads(
        conv_w=[rng.normal(0, 1, size=w.shape) for w in params.conv_w],
        conv_b=[rng.normal(0, 1, size=b.shape) for b in params.conv_b],
        dense_w=rng.normal(0, 1, size=params.dense_w.shape),
        dense_b=rng.normal(0, 1, size=params.dense_b.shape),
    )


class TestAdam:
    def test_bit_exact_against_scalar_replay(self):
        """Ten steps replayed coordinate-wise with python floats.

        The update writes through fixed scratch buffers precisely so this
        comparison can demand equality, not closeness.
        """
        cfg = nn.NetworkConfig(width=2, height=2, seed=11)
        params = nn.init_params(cfg)
        adam = cfg.adam
        state = nn.AdamState.for_params(params)
        rng = np.random.default_rng(77)
        step_grads = [synthetic_grads(params, rng) for _ in range(10)]

        arrays = [a for _, a in params.arrays()]
        tracked = []  # (array_index, flat_index, theta, m, v)
        for ai, a in enumerate(arrays):
            for idx in (0, a.size // 2, a.size - 1):
                tracked.append([ai, idx, float(a.flat[idx]), 0.0, 0.0])

        for t in range(1, 11):
            g_arrays = step_grads[t - 1].arrays()
            nn.adam_step(params, step_grads[t - 1], state)
            c1 = 1.0 - adam.beta1**t
            c2 = 1.0 - adam.beta2**t
            for rec in tracked:
                ai, idx = rec[0], rec[1]
                g = float(g_arrays[ai].flat[idx])
                rec[3] = adam.beta1 * rec[3] + (1.0 - adam.beta1) * g
                rec[4] = adam.beta2 * rec[4] + (1.0 - adam.beta2) * (g * g)
                rec[2] -= (adam.lr * (rec[3] / c1)) / (math.sqrt(rec[4] / c2) + adam.eps)
                assert arrays[ai].flat[idx] == rec[2], (t, ai, idx)
        assert state.t == 10

    def test_first_step_moves_by_lr(self):
        # bias correction makes the debut step lr * g / (|g| + eps), which
        # is lr in magnitude for any not-tiny gradient
        cfg = nn.NetworkConfig(width=2, height=2, seed=4)
        params = nn.init_params(cfg)
        before = params.dense_w.copy()
        state = nn.AdamState.for_params(params)
        grads = synthetic_grads(params, np.random.default_rng(5))
        nn.adam_step(params, grads, state)
        moved = np.abs(params.dense_w - before)
        big = np.abs(grads.dense_w) > 1e-2
        assert big.any()
        np.testing.assert_allclose(moved[big], cfg.adam.lr, atol=1e-6)
        signs_ok = np.sign(before - params.dense_w) == np.sign(grads.dense_w)
        assert signs_ok[big].all()

    def test_zero_gradient_is_a_fixed_point(self):
        cfg = nn.NetworkConfig(width=2, height=2, seed=4)
        params = nn.init_params(cfg)
        snap = params.copy()
        state = nn.AdamState.for_params(params)
        zeros = nn.Grads(
            conv_w=[np.zeros_like(w) for w in params.conv_w],
            conv_b=[np.zeros_like(b) for b in params.conv_b],
            dense_w=np.zeros_like(params.dense_w),
            dense_b=np.zeros_like(params.dense_b),
        )
        for _ in range(3):
            nn.adam_step(params, zeros, state)
        for (_, a), (_, b) in zip(params.arrays(), snap.arrays()):
            np.testing.assert_array_equal(a, b)


class TestInit:
    def test_he_uniform_bounds_and_spread(self):
        cfg = nn.NetworkConfig(width=3, height=3, seed=21)
        params = nn.init_params(cfg)
        for w, (f, k, c_in) in zip(params.conv_w, nn.conv_layer_channels()):
            bound = math.sqrt(6.0 / (k * k * c_in))
            assert np.abs(w).max() <= bound
            # uniform(-b, b) has std b / sqrt(3) = sqrt(2 / fan_in)
            assert w.std() == pytest.approx(math.sqrt(2.0 / (k * k * c_in)), rel=0.05)
        n = cfg.dense_size
        assert np.abs(params.dense_w).max() <= math.sqrt(6.0 / n)
        assert params.dense_w.std() == pytest.approx(math.sqrt(2.0 / n), rel=0.05)

    def test_biases_start_at_zero(self):
        params = nn.init_params(nn.NetworkConfig(width=2, height=2, seed=0))
        for b in params.conv_b:
            assert not b.any()
        assert not params.dense_b.any()

    def test_seed_pins_every_weight(self):
        cfg = nn.NetworkConfig(width=2, height=3, seed=8)
        a, b = nn.init_params(cfg), nn.init_params(cfg)
        for (_, x), (_, y) in zip(a.arrays(), b.arrays()):
            np.testing.assert_array_equal(x, y)
        other = nn.init_params(nn.NetworkConfig(width=2, height=3, seed=9))
        assert not np.array_equal(a.conv_w[0], other.conv_w[0])

    def test_conv_weight_counts(self):
        assert nn.conv_weight_counts() == [8 * 4 * 4 * 34, 16 * 3 * 3 * 8, 32 * 3 * 3 * 16]
        assert sum(nn.conv_weight_counts()) == 10112


class TestSerialization:
    def test_round_trip_is_exact(self, tmp_path):
        cfg = nn.NetworkConfig(width=3, height=2, seed=6,
                               adam=nn.AdamConfig(lr=5e-4))
        params = nn.init_params(cfg)
        params.fingerprint = "cafe" * 16
        path = str(tmp_path / "model.bin")
        nn.save_model(params, path)
        back = nn.load_model(path)
        assert back.config == cfg
        assert back.fingerprint == params.fingerprint
        for (na, a), (nb, b) in zip(params.arrays(), back.arrays()):
            assert na == nb
            np.testing.assert_array_equal(a, b)

    def test_save_is_byte_stable(self, tmp_path):
        params = nn.init_params(nn.NetworkConfig(width=2, height=2, seed=1))
        p1, p2 = str(tmp_path / "a.bin"), str(tmp_path / "b.bin")
        nn.save_model(params, p1)
        nn.save_model(params, p2)
        assert open(p1, "rb").read() == open(p2, "rb").read()

    def test_missing_fingerprint_round_trips_as_none(self, tmp_path):
        params = nn.init_params(nn.NetworkConfig(width=2, height=2, seed=1))
        path = str(tmp_path / "m.bin")
        nn.save_model(params, path)
        assert nn.load_model(path).fingerprint is None

    def test_wrong_magic_raises(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTMODEL" + b"\x00" * 64)
        with pytest.raises(VersionMismatch):
            nn.load_model(str(path))

    def test_truncated_file_raises(self, tmp_path):
        path = tmp_path / "short.bin"
        path.write_bytes(nn.MODEL_MAGIC[:4])
        with pytest.raises(VersionMismatch):
            nn.load_model(str(path))

    def test_corrupt_header_raises(self, tmp_path):
        import struct

        path = tmp_path / "bad.bin"
        blob = b"{not json"
        path.write_bytes(nn.MODEL_MAGIC + struct.pack("<Q", len(blob)) + blob)
        with pytest.raises(VersionMismatch):
            nn.load_model(str(path))

    def test_missing_file_raises_io_failure(self, tmp_path):
        with pytest.raises(IoFailure):
            nn.load_model(str(tmp_path / "absent.bin"))


class TestShapeErrors:
    def test_forward_rejects_wrong_state(self):
        params = nn.init_params(nn.NetworkConfig(width=3, height=2, seed=0))
        with pytest.raises(ShapeMismatch):
            nn.forward(params, np.zeros((2, 3, nn.N_INPUT_CHANNELS)))

    def test_gradients_reject_wrong_target(self):
        params = nn.init_params(nn.NetworkConfig(width=3, height=2, seed=0))
        state = np.zeros((3, 2, nn.N_INPUT_CHANNELS))
        with pytest.raises(ShapeMismatch):
            nn.loss_and_gradients(params, state, np.zeros((3, 2, 8)))

    def test_mse_rejects_mismatched_arrays(self):
        with pytest.raises(ShapeMismatch):
            nn.mse_loss(np.zeros((2, 2, 32)), np.zeros((2, 3, 32)))


class TestMemorization:
    def test_single_example_loss_collapses(self):
        cfg = nn.NetworkConfig(width=5, height=4, seed=3,
                               adam=nn.AdamConfig(lr=2e-3))
        params = nn.init_params(cfg)
        rng = np.random.default_rng(44)
        state = one_hot_state(rng, 5, 4)
        target = rng.normal(0.0, 0.5, size=(5, 4, nn.N_OUTPUT_CHANNELS))
        adam = nn.AdamState.for_params(params)
        first = None
        for _ in range(300):
            loss, grads, _ = nn.loss_and_gradients(params, state, target)
            if first is None:
                first = loss
            nn.adam_step(params, grads, adam)
        final = nn.mse_loss(nn.predict(params, state), target)
        assert final < 0.05 * first
