import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genlab.linalg import InvalidInput, make_rng
from genlab.network import (Mlp, backprop_grad, forward, forward_trace, init_mlp, interlayer_jacobian,
                            load_checkpoint, loss_margin, loss_ramp, loss_zero_one, margin, margins,
                            save_checkpoint)


def naive_logits(net, x):
    f = list(x)
    for d, W in enumerate(net.weights):
        g = [sum(W[i, j] * f[j] for j in range(len(f))) for i in range(W.shape[0])]
        f = g if d == net.depth - 1 else [v if v > 0 else 0.0 for v in g]
    return np.array(f)


def test_forward_one_layer_is_matvec(rng):
    W = rng.standard_normal((3, 4))
    x = rng.standard_normal(4)
    np.testing.assert_array_equal(forward_trace(Mlp([W]), x).logits, W @ x)


def test_forward_nonnegative_chain(rng):
    Ws = [np.abs(rng.standard_normal((5, 4))), np.abs(rng.standard_normal((2, 5)))]
    x = np.abs(rng.standard_normal(4))
    np.testing.assert_allclose(forward_trace(Mlp(Ws), x).logits, Ws[1] @ Ws[0] @ x, rtol=1e-14)


def test_forward_matches_naive(rng):
    net = init_mlp([6, 5, 4, 3], 2)
    x = rng.standard_normal(6)
    tr = forward_trace(net, x)
    np.testing.assert_allclose(tr.logits, naive_logits(net, x), rtol=1e-13, atol=1e-15)
    for d in range(net.depth - 1):
        np.testing.assert_array_equal(tr.acts[d + 1], np.maximum(tr.preacts[d], 0))
    np.testing.assert_allclose(forward(net, x[None, :])[0], tr.logits, rtol=1e-14)
    with pytest.raises(InvalidInput):
        forward_trace(net, np.ones(5))


def test_mlp_shape_checks():
    with pytest.raises(InvalidInput):
        Mlp([np.ones((3, 2)), np.ones((2, 4))])
    with pytest.raises(InvalidInput):
        Mlp([np.ones((3, 2))], [np.ones((2, 2))])
    with pytest.raises(InvalidInput):
        Mlp([])


def test_margin_cases():
    assert margin([2.0, -1.0, 0.0], 0) == 2.0
    assert margin([-1.5], -1) == 1.5
    assert margin([0.0, 0.0], 1) == 0.0
    with pytest.raises(InvalidInput):
        margin([1.0, 2.0], 2)
    with pytest.raises(InvalidInput):
        margin([1.0], 0)


def test_losses():
    assert (loss_ramp(-0.1, 1), loss_margin(-0.1, 1), loss_zero_one(-0.1)) == (1.0, 1, 1)
    assert (loss_ramp(0.5, 1), loss_margin(0.5, 1), loss_zero_one(0.5)) == (0.5, 1, 0)
    assert (loss_ramp(2, 1), loss_margin(2, 1), loss_zero_one(2)) == (0.0, 0, 0)
    assert loss_ramp(0.0, 0.0) == loss_zero_one(0.0) and loss_margin(-1e-9, 0.0) == 1
    with pytest.raises(InvalidInput):
        loss_ramp(0.3, -1)
    with pytest.raises(InvalidInput):
        loss_margin(0.3, -1)


@settings(max_examples=100, deadline=None)
@given(st.floats(-10, 10), st.floats(0.001, 10))
def test_loss_ordering(g, gamma):
    assert loss_zero_one(g) <= loss_ramp(g, gamma) <= loss_margin(g, gamma)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.01, 100))
def test_positive_homogeneity(seed, a):
    net = init_mlp([4, 6, 3], seed)
    X = make_rng(seed + 1).standard_normal((5, 4))
    y = np.arange(5) % 3
    scaled = net.with_weights([net.weights[0], a * net.weights[1]])
    np.testing.assert_allclose(forward(scaled, X), a * forward(net, X), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(margins(forward(scaled, X), y), a * margins(forward(net, X), y),
                               rtol=1e-11, atol=1e-12)


def test_jacobian_trivial(rng):
    net = init_mlp([3, 4, 4, 2], 0)
    tr = forward_trace(net, rng.standard_normal(3))
    np.testing.assert_array_equal(interlayer_jacobian(tr, net, 2, 2), np.eye(4))
    W1 = np.abs(rng.standard_normal((4, 3)))
    W2 = rng.standard_normal((2, 4))
    net2 = Mlp([W1, W2])
    tr2 = forward_trace(net2, np.abs(rng.standard_normal(3)) + 0.1)
    np.testing.assert_array_equal(interlayer_jacobian(tr2, net2, 1, 2), W2)
    with pytest.raises(InvalidInput):
        interlayer_jacobian(tr, net, 3, 2)


def fd_jacobian(net, trace, a, b, h=1e-6):
    """Central differences of g^b with respect to g^a, re-running the layers above a."""
    def run(ga):
        g = ga
        for d in range(a + 1, b + 1):
            g = net.weights[d - 1] @ np.maximum(g, 0.0)
        return g

    g0 = trace.preacts[a - 1]
    cols = []
    for k in range(len(g0)):
        e = np.zeros_like(g0)
        e[k] = h
        cols.append((run(g0 + e) - run(g0 - e)) / (2 * h))
    return np.array(cols).T


def test_jacobian_vs_finite_differences():
    checked = 0
    for seed in range(50):
        net = init_mlp([5, 7, 6, 3], seed)
        x = make_rng(1000 + seed).standard_normal(5)
        tr = forward_trace(net, x)
        if min(np.abs(g).min() for g in tr.preacts[:-1]) < 1e-4:
            continue
        for a, b in [(1, 2), (1, 3), (2, 3)]:
            J = interlayer_jacobian(tr, net, a, b)
            F = fd_jacobian(net, tr, a, b)
            assert np.linalg.norm(J - F) <= 1e-6 * max(np.linalg.norm(J), 1e-12)
        checked += 1
    assert checked >= 40


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_jacobian_chain_rule(seed):
    net = init_mlp([4, 5, 5, 5, 2], seed)
    tr = forward_trace(net, make_rng(seed).standard_normal(4))
    for a in range(1, 5):
        for mid in range(a, 5):
            for b in range(mid, 5):
                lhs = interlayer_jacobian(tr, net, a, b)
                rhs = interlayer_jacobian(tr, net, mid, b) @ interlayer_jacobian(tr, net, a, mid)
                np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12)


def test_zero_preactivation_is_inactive():
    net = Mlp([np.array([[1.0, -1.0]]), np.array([[2.0]])])
    tr = forward_trace(net, np.array([1.0, 1.0]))
    assert not tr.masks()[0][0]
    assert interlayer_jacobian(tr, net, 1, 2)[0, 0] == 0.0


def test_squared_loss_gradient_hand_formula(rng):
    # one layer, zero weights: loss = mean ||0 - t||^2, grad = -2/n sum t x^T
    X = rng.standard_normal((4, 3))
    y = np.array([0, 1, 1, 0])
    net = Mlp([np.zeros((2, 3))])
    loss, (g,) = backprop_grad(net, X, y, "squared")
    T = np.eye(2)[y]
    assert loss == pytest.approx(1.0)
    np.testing.assert_allclose(g, -2.0 / 4 * T.T @ X, rtol=1e-14)


def fd_grads(net, X, y, kind, h=1e-6):
    out = []
    for d, W in enumerate(net.weights):
        G = np.zeros_like(W)
        for idx in np.ndindex(W.shape):
            plus, minus = [w.copy() for w in net.weights], [w.copy() for w in net.weights]
            plus[d][idx] += h
            minus[d][idx] -= h
            G[idx] = (backprop_grad(net.with_weights(plus), X, y, kind)[0]
                      - backprop_grad(net.with_weights(minus), X, y, kind)[0]) / (2 * h)
        out.append(G)
    return out


@pytest.mark.parametrize("kind,k", [("xent", 3), ("squared", 3), ("xent", 1), ("ascent", 1), ("squared", 1)])
def test_backprop_vs_finite_differences(kind, k):
    net = init_mlp([4, 3, k], 4)
    r = make_rng(8)
    X = r.standard_normal((6, 4))
    y = r.integers(0, 3, 6) if k > 1 else np.where(r.random(6) < 0.5, -1, 1)
    _, grads = backprop_grad(net, X, y, kind)
    for g, f in zip(grads, fd_grads(net, X, y, kind)):
        assert np.linalg.norm(g - f) <= 1e-6 * np.linalg.norm(f)


def test_backprop_duplicate_batch_invariance(rng):
    net = init_mlp([4, 5, 3], 1)
    X = rng.standard_normal((5, 4))
    y = np.array([0, 1, 2, 1, 0])
    l1, g1 = backprop_grad(net, X, y, "xent")
    l2, g2 = backprop_grad(net, np.vstack([X, X]), np.concatenate([y, y]), "xent")
    assert l1 == pytest.approx(l2, rel=1e-14)
    for a, b in zip(g1, g2):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)


def test_backprop_unknown_loss(rng):
    with pytest.raises(InvalidInput):
        backprop_grad(init_mlp([2, 2], 0), rng.standard_normal((2, 2)), [0, 1], "hinge")
    with pytest.raises(InvalidInput):
        backprop_grad(init_mlp([2, 2], 0), rng.standard_normal((2, 2)), [0, 1], "ascent")


def test_checkpoint_roundtrip_and_layout(tmp_path):
    net = init_mlp([3, 4, 2], 5)
    net.weights[0] += 1.0
    p = tmp_path / "net.glab"
    save_checkpoint(net, p)
    raw = p.read_bytes()
    assert raw[:4] == b"GLAB"
    assert np.frombuffer(raw[4:12], "<u4").tolist() == [1, 2]
    assert np.frombuffer(raw[12:24], "<u4").tolist() == [3, 4, 2]
    assert len(raw) == 24 + 8 * 2 * (12 + 8)
    assert np.frombuffer(raw[24:32], "<f8")[0] == net.weights[0][0, 0]
    back = load_checkpoint(p)
    for a, b in zip(back.weights + back.init, net.weights + net.init):
        np.testing.assert_array_equal(a, b)
    p.write_bytes(raw[:-3])
    with pytest.raises(InvalidInput, match="byte"):
        load_checkpoint(p)
    p.write_bytes(b"NOPE" + raw[4:])
    with pytest.raises(InvalidInput):
        load_checkpoint(p)
