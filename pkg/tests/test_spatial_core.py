import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phasecod import spatial_core as sc
from phasecod import tensor_core as tc
from phasecod.errors import OddChannelCount
from phasecod.layers import Conv, Mlp, gate_conv, identity_conv


def _conv(x, c):
    return tc.conv2d(x, c.weight, c.bias, c.stride, c.padding, c.dilation, c.groups)


def _sig(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def _mlp(v, m):
    return m.fc2.astype(float) @ np.maximum(m.fc1.astype(float) @ v + m.b1, 0) + m.b2


def _gelu(x):
    x = np.asarray(x, dtype=np.float64)
    return 0.5 * x * (1 + np.tanh(np.sqrt(2 / np.pi) * (x + 0.044715 * x**3)))


def _randomize_biases(p, r):
    def cb(c):
        return Conv(c.weight, r.normal(0, 0.1, c.weight.shape[0]).astype(np.float32), c.stride, c.padding,
                    c.dilation, c.groups)
    m = p.channel_attention
    return sc.ScsmParams(
        spatial_attention=cb(p.spatial_attention),
        channel_attention=Mlp(m.fc1, m.fc2, r.normal(0, 0.1, m.b1.shape).astype(np.float32),
                              r.normal(0, 0.1, m.b2.shape).astype(np.float32)),
        spa_in=cb(p.spa_in), dw_conv=cb(p.dw_conv), spa_out=cb(p.spa_out),
        aspp=sc.AsppParams(tuple(cb(b) for b in p.aspp.branches), cb(p.aspp.merge)),
    )


def scsm_by_hand(f, p):
    sa_in = np.stack([f.mean(axis=0), f.max(axis=0)])
    sa = f * _sig(_conv(sa_in, p.spatial_attention))
    ca_gate = _sig(_mlp(f.mean(axis=(1, 2)), p.channel_attention) + _mlp(f.max(axis=(1, 2)), p.channel_attention))
    ca = f * ca_gate[:, None, None]
    v = _conv(_conv((sa + ca).astype(np.float32), p.spa_in), p.dw_conv)
    c = f.shape[0]
    f4 = _conv((_gelu(v[:c]) * v[c:]).astype(np.float32), p.spa_out) + f
    branches = np.concatenate([_conv(f4, b) for b in p.aspp.branches])
    return _conv(branches, p.aspp.merge)


def _params(seed, c=4):
    r = np.random.default_rng(seed)
    return _randomize_biases(sc.init_scsm(r, c, reduction=2), r)


# ---------------------------------------------------------------------------
# attention


def test_spatial_attention_zero_conv_halves(rng):
    p = sc.init_scsm(rng, 4)
    p = sc.ScsmParams(gate_conv(2, 1, 0.0), *[getattr(p, n) for n in ("channel_attention", "spa_in", "dw_conv",
                                                                         "spa_out", "aspp")])
    f = rng.standard_normal((4, 6, 6)).astype(np.float32)
    np.testing.assert_allclose(sc.spatial_attention(f, p), f / 2, rtol=1e-6)


def test_spatial_attention_open_gate_is_identity(rng):
    f = rng.standard_normal((4, 6, 6)).astype(np.float32)
    np.testing.assert_allclose(f * sc.spatial_gate(f, gate_conv(2, 1, 40.0)), f, rtol=1e-6)


def test_channel_attention_zero_mlp_halves(rng):
    zero = Mlp(np.zeros((1, 4), np.float32), np.zeros((4, 1), np.float32))
    f = rng.standard_normal((4, 6, 6)).astype(np.float32)
    np.testing.assert_allclose(f * sc.channel_gate(f, zero)[:, None, None], f / 2, rtol=1e-6)


def test_channel_gate_follows_channel_means():
    f = np.stack([np.full((4, 4), 0.2), np.full((4, 4), 0.9)]).astype(np.float32)
    ident = Mlp(np.eye(2, dtype=np.float32), np.eye(2, dtype=np.float32))
    gate = sc.channel_gate(f, ident)
    # avg == max per channel, so gate = sigmoid(2 * mean)
    np.testing.assert_allclose(gate, [1 / (1 + np.exp(-0.4)), 1 / (1 + np.exp(-1.8))], rtol=1e-6)
    assert gate[1] > gate[0]


def test_attention_recomposition():
    for seed in range(20):
        p = _params(seed)
        f = np.random.default_rng(seed).standard_normal((4, 8, 8)).astype(np.float32)
        sa_in = np.stack([f.mean(axis=0), f.max(axis=0)])
        np.testing.assert_allclose(sc.spatial_attention(f, p), f * _sig(_conv(sa_in, p.spatial_attention)),
                                   atol=1e-6)
        m = p.channel_attention
        g = _sig(_mlp(f.mean(axis=(1, 2)), m) + _mlp(f.max(axis=(1, 2)), m))
        np.testing.assert_allclose(sc.channel_attention(f, p), f * g[:, None, None], atol=1e-6)


@given(seed=st.integers(0, 10_000), scale=st.floats(0.01, 1e4))
def test_gates_in_open_unit_interval(seed, scale):
    r = np.random.default_rng(seed)
    p = sc.init_scsm(r, 4)
    f = (r.standard_normal((4, 5, 5)) * scale).astype(np.float32)
    for g in (sc.spatial_gate(f, p.spatial_attention), sc.channel_gate(f, p.channel_attention)):
        assert np.all((g > 0) & (g < 1))


# ---------------------------------------------------------------------------
# ASPP


def _identity_aspp(c):
    branches = tuple(identity_conv(c, 3, dilation=r) for r in sc.ASPP_RATES)
    merge = np.concatenate([np.eye(c)] * 3, axis=1)[:, :, None, None] / 3.0
    return sc.AsppParams(branches, Conv(merge.astype(np.float32), np.zeros(c, np.float32)))


def test_aspp_identity_configuration(rng):
    f = rng.standard_normal((3, 9, 9)).astype(np.float32)
    np.testing.assert_allclose(sc.aspp(f, _identity_aspp(3)), f, atol=1e-6)


def test_aspp_constant_in_constant_out():
    out = sc.aspp(np.full((2, 8, 8), 1.7, np.float32), _identity_aspp(2))
    np.testing.assert_allclose(out, 1.7, atol=1e-6)


def test_aspp_recomposition():
    for seed in range(20):
        p = _params(seed).aspp
        f = np.random.default_rng(seed).standard_normal((4, 8, 8)).astype(np.float32)
        want = _conv(np.concatenate([_conv(f, b) for b in p.branches]), p.merge)
        np.testing.assert_allclose(sc.aspp(f, p), want, atol=1e-6)


def test_aspp_dilation_matches_padding():
    p = sc.init_aspp(np.random.default_rng(0), 2)
    assert [(b.dilation, b.padding) for b in p.branches] == [(1, 1), (2, 2), (4, 4)]


# ---------------------------------------------------------------------------
# SCSM


def test_split_halves_exact():
    v = np.arange(6 * 2 * 2, dtype=np.float32).reshape(6, 2, 2)
    a, b = sc.split_halves(v)
    np.testing.assert_array_equal(a, v[:3])
    np.testing.assert_array_equal(b, v[3:])
    with pytest.raises(OddChannelCount):
        sc.split_halves(np.zeros((3, 2, 2)))


def test_scsm_zero_in_zero_out():
    p = sc.init_scsm(np.random.default_rng(0), 4)
    np.testing.assert_array_equal(sc.scsm_forward(np.zeros((4, 8, 8)), p), 0)


def test_scsm_shape_contract():
    p = sc.init_scsm(np.random.default_rng(0), 8)
    out = sc.scsm_forward(np.random.default_rng(1).standard_normal((8, 32, 32)), p)
    assert out.shape == (8, 32, 32)


def test_scsm_recomposition():
    for seed in range(20):
        p = _params(seed)
        f = np.random.default_rng(seed).standard_normal((4, 8, 8)).astype(np.float32)
        np.testing.assert_allclose(sc.scsm_forward(f, p), scsm_by_hand(f, p), atol=1e-5)


def test_scsm_open_gates_identity_projections_reduce():
    c = 2
    stack = np.concatenate([np.eye(c), np.eye(c)])[:, :, None, None].astype(np.float32)
    p = sc.ScsmParams(
        spatial_attention=gate_conv(2, 1, 40.0),
        channel_attention=Mlp(np.zeros((1, c), np.float32), np.zeros((c, 1), np.float32),
                              np.zeros(1, np.float32), np.full(c, 40.0, np.float32)),
        spa_in=Conv(stack, np.zeros(2 * c, np.float32)),
        dw_conv=Conv(identity_conv(2 * c, 3).weight[np.arange(2 * c), np.arange(2 * c)][:, None],
                     np.zeros(2 * c, np.float32), padding=1, groups=2 * c),
        spa_out=identity_conv(c),
        aspp=_identity_aspp(c),
    )
    f = np.random.default_rng(4).standard_normal((c, 6, 6)).astype(np.float32)
    # u = 2f, both halves equal 2f, so f4 = gelu(2f) * 2f + f and ASPP is the identity
    want = _gelu(2 * f) * 2 * f + f
    np.testing.assert_allclose(sc.scsm_forward(f, p), want, atol=1e-5)


@given(seed=st.integers(0, 10_000), c=st.sampled_from([2, 4, 8]), h=st.integers(4, 12), w=st.integers(4, 12))
def test_scsm_preserves_shape(seed, c, h, w):
    r = np.random.default_rng(seed)
    p = sc.init_scsm(r, c, reduction=2)
    assert sc.scsm_forward(r.standard_normal((c, h, w)), p).shape == (c, h, w)
