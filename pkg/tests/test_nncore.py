import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from a3ps import nncore as nn
from a3ps.errors import ContractError, NumericError, ParseError, ShapeError


def central_diff(f, arr, h=1e-5):
    """Independent finite-difference oracle; does not touch the tape."""
    out = np.zeros_like(arr)
    for j in range(arr.size):
        old = arr.flat[j]
        arr.flat[j] = old + h
        up = f()
        arr.flat[j] = old - h
        down = f()
        arr.flat[j] = old
        out.flat[j] = (up - down) / (2 * h)
    return out


def mlp_params(rng, n_in=4, hidden=6, n_out=3):
    l1 = nn.Linear(n_in, hidden, rng)
    l2 = nn.Linear(hidden, n_out, rng)
    return l1, l2


def test_softmax_uniform():
    np.testing.assert_array_equal(nn.softmax(np.zeros(5)).data, np.full(5, 0.2))


def test_cross_entropy_uniform_is_ln5():
    for label in range(5):
        assert abs(nn.cross_entropy(np.zeros(5), label).item() - math.log(5)) < 1e-9
        probs = np.full(5, 0.2)
        assert abs(nn.cross_entropy(probs, label, from_logits=False).item() - 1.6094379124341003) < 1e-9


def test_relu_values():
    np.testing.assert_array_equal(nn.relu(np.array([-1.0, 0.0, 3.0])).data, [0.0, 0.0, 3.0])


@settings(max_examples=60, deadline=None)
@given(
    arrays(np.float64, (3, 5), elements=st.floats(-60, 60)),
    st.floats(-15, 15),
)
def test_softmax_rows_sum_to_one_and_shift_invariant(logits, shift):
    s = nn.softmax(logits).data
    assert np.all(np.abs(s.sum(axis=1) - 1.0) <= 1e-12)
    np.testing.assert_allclose(nn.softmax(logits + shift).data, s, atol=1e-9, rtol=0)


def test_extreme_logits_stay_finite():
    s = nn.softmax(np.array([1e6, -1e6, 0.0, 3.0, 80.0])).data
    assert np.isfinite(s).all()
    assert abs(s.sum() - 1.0) < 1e-12


def test_non_finite_input_raises():
    with pytest.raises(NumericError):
        nn.Tensor([1.0, np.nan])
    with pytest.raises(NumericError):
        nn.log(np.array([0.0, 1.0]))


def test_shape_errors_name_operands():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(4, 2\)"):
        nn.matmul(np.ones((2, 3)), np.ones((4, 2)))
    with pytest.raises(ShapeError):
        nn.affine(np.ones((2, 3)), np.ones((4, 2)), np.ones(2))
    with pytest.raises(ShapeError):
        nn.add(np.ones((2, 3)), np.ones((4,)))


def test_linear_map_gradient_rows_equal_input():
    x = np.array([1.5, -2.0, 0.25])
    W = nn.Parameter(np.random.default_rng(0).normal(size=(4, 3)), "W")
    with nn.recording():
        nn.backward(nn.tsum(nn.matmul(W, x.reshape(3, 1))))
    for row in W.grad:
        np.testing.assert_array_equal(row, x)


def test_zero_input_affine_gradients():
    rng = np.random.default_rng(1)
    layer = nn.Linear(3, 4, rng)
    with nn.recording():
        nn.backward(nn.tsum(layer(np.zeros((2, 3)))))
    np.testing.assert_array_equal(layer.weight.grad, np.zeros((3, 4)))
    np.testing.assert_array_equal(layer.bias.grad, np.full(4, 2.0))


def test_backward_rejects_non_scalar():
    p = nn.Parameter(np.ones(3), "p")
    with nn.recording():
        out = nn.mul(p, 2.0)
        with pytest.raises(ContractError):
            nn.backward(out)


def test_backward_clears_tape():
    p = nn.Parameter(np.ones(3), "p")
    with nn.recording() as tape:
        loss = nn.tsum(nn.square(p))
        assert len(tape) > 0
        nn.backward(loss)
        assert len(tape) == 0
        with pytest.raises(ContractError):
            nn.backward(loss)


def test_two_layer_relu_vs_independent_finite_differences():
    rng = np.random.default_rng(3)
    l1, l2 = mlp_params(rng)
    x = rng.normal(size=(5, 4))

    def loss():
        return nn.tsum(nn.square(l2(nn.relu(l1(x)))))

    params = l1.parameters() + l2.parameters()
    with nn.recording():
        nn.backward(loss())
    worst = 0.0
    with nn.no_recording():
        for p in params:
            num = central_diff(lambda: loss().item(), p.data)
            rel = np.abs(p.grad - num) / np.maximum(np.abs(p.grad) + np.abs(num), 1e-5)
            worst = max(worst, rel.max())
    assert worst < 1e-4


def test_gradient_check_affine():
    rng = np.random.default_rng(4)
    layer = nn.Linear(5, 3, rng)
    x = rng.normal(size=(4, 5))
    err = nn.gradient_check(lambda: nn.tsum(layer(x)), layer.parameters())
    assert err < 1e-8


def test_gradient_check_mlp():
    rng = np.random.default_rng(5)
    l1, l2 = mlp_params(rng)
    x = rng.normal(size=(6, 4))
    labels = np.array([0, 1, 2, 0, 1, 2])
    err = nn.gradient_check(lambda: nn.cross_entropy(l2(nn.relu(l1(x))), labels), l1.parameters() + l2.parameters())
    assert err < 1e-4


def test_gradient_check_recurrent_length_three():
    rng = np.random.default_rng(6)
    gru = nn.GRU(3, 4, rng)
    seq = [nn.Tensor(rng.normal(size=(2, 3))) for _ in range(3)]
    err = nn.gradient_check(lambda: nn.tsum(nn.square(nn.recur(gru, seq))), gru.parameters())
    assert err < 1e-4


def test_gradient_check_masked_recurrence_and_embedding():
    rng = np.random.default_rng(7)
    emb = nn.Embedding(6, 3, rng)
    gru = nn.GRU(3, 4, rng)
    tokens = np.array([[1, 2], [3, 0], [5, 0]])  # time-major, second sequence padded
    mask = (tokens != 0).astype(float)

    def loss():
        steps = [emb(tokens[t]) for t in range(3)]
        return nn.tsum(nn.tanh(nn.recur(gru, steps, mask)))

    err = nn.gradient_check(loss, emb.parameters() + gru.parameters())
    assert err < 1e-4


def test_masked_step_keeps_hidden_state():
    rng = np.random.default_rng(8)
    gru = nn.GRU(2, 3, rng)
    h = nn.Tensor(rng.normal(size=(2, 3)))
    out = gru.step(rng.normal(size=(2, 2)), h, mask=np.array([1.0, 0.0]))
    np.testing.assert_array_equal(out.data[1], h.data[1])
    assert not np.allclose(out.data[0], h.data[0])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.floats(-3, 3), st.floats(-3, 3))
def test_backward_is_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    l1, l2 = mlp_params(rng)
    params = l1.parameters() + l2.parameters()
    x = rng.normal(size=(3, 4))

    def l_one():
        return nn.tsum(nn.square(l2(nn.tanh(l1(x)))))

    def l_two():
        return nn.tsum(nn.sigmoid(l2(nn.relu(l1(x)))))

    def grads(build):
        for p in params:
            p.zero_grad()
        with nn.recording():
            nn.backward(build())
        return [p.grad.copy() for p in params]

    g1, g2 = grads(l_one), grads(l_two)
    combined = grads(lambda: nn.add(nn.mul(l_one(), a), nn.mul(l_two(), b)))
    for c, x1, x2 in zip(combined, g1, g2):
        np.testing.assert_allclose(c, a * x1 + b * x2, rtol=1e-9, atol=1e-10)


def test_adam_zero_gradient_is_a_noop():
    p = nn.Parameter(np.array([1.0, -2.0]), "p")
    state = nn.AdamState.for_params([p], lr=0.1)
    nn.adam_step([p], state)
    np.testing.assert_array_equal(p.data, [1.0, -2.0])
    assert state.step == 1
    nn.adam_step([p], state)
    assert state.step == 2


def test_adam_constant_gradient_step_is_lr_times_sign():
    # With bias correction, m_hat = g and v_hat = g^2 exactly at every step,
    # so each update is lr * g / (|g| + eps).
    g = np.array([0.5, -3.0, 2e-3])
    p = nn.Parameter(np.zeros(3), "p")
    state = nn.AdamState.for_params([p], lr=1e-2)
    prev = p.data.copy()
    for _ in range(200):
        p.grad = g.copy()
        nn.adam_step([p], state)
        delta = p.data - prev
        prev = p.data.copy()
    np.testing.assert_allclose(delta, -1e-2 * g / (np.abs(g) + 1e-8), rtol=1e-6)
    np.testing.assert_allclose(np.abs(delta), 1e-2, rtol=1e-5)
    np.testing.assert_array_equal(p.grad, np.zeros(3))


def test_adam_missing_gradient():
    p = nn.Parameter(np.ones(2), "p")
    state = nn.AdamState.for_params([p], lr=0.1)
    p.grad = None
    with pytest.raises(ContractError):
        nn.adam_step([p], state)


def test_checkpoint_round_trip_and_layout(tmp_path):
    tensors = {"a.weight": np.arange(6.0).reshape(2, 3), "b": np.array([np.pi])}
    path = tmp_path / "ck.bin"
    nn.save_tensors(path, tensors)
    raw = path.read_bytes()
    assert raw[:4] == b"A3CK"
    assert struct.unpack_from("<II", raw, 4) == (1, 2)
    (n,) = struct.unpack_from("<I", raw, 12)
    assert raw[16 : 16 + n] == b"a.weight"
    back = nn.load_tensors(path)
    assert list(back) == list(tensors)
    for k in tensors:
        np.testing.assert_array_equal(back[k], tensors[k])


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.bin"
    path.write_bytes(b"nope")
    with pytest.raises(ParseError):
        nn.load_tensors(path)


def test_patch_encoder_shapes():
    rng = np.random.default_rng(0)
    imgs = rng.random((2, 100, 100, 3))
    tiles = nn.patchify(imgs, 10)
    assert tiles.shape == (2, 100, 300)
    np.testing.assert_array_equal(tiles[0, 1], imgs[0, 0:10, 10:20, :].reshape(-1))
    enc = nn.PatchEncoder(10, 3, 8, rng)
    assert enc(imgs).shape == (2, 8)
