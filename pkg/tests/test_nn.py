import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from grcnet.errors import NonFinite, ShapeMismatch
from grcnet.nn import (
    Conv2d,
    ConvParams,
    CotLayer,
    CotParams,
    GRCNet,
    InceptionBlock,
    InceptionParams,
    MLPHead,
    ModelConfig,
    ResidualUnit,
    backward,
    conv2d,
    cot_forward,
    softmax_cross_entropy,
)
from grcnet.nn import checkpoint, ops
from grcnet.nn.gradcheck import check_layer, numeric_grad, relative_error
from oracles import naive_avg_pool3, naive_conv2d, naive_cot, randomize, relu

TOY = ModelConfig(
    input_size=(8, 8, 1), stem_channels=4, inception_branch_widths=(2, 2, 2, 2), mlp_hidden=6
)


def conv_ref(x, p: ConvParams):
    return naive_conv2d(x, p.kernel, p.bias, p.stride, p.padding)


# convolution -------------------------------------------------------------------


def test_conv_identity_1x1(rng):
    x = rng.standard_normal((1, 5, 5, 1))
    p = ConvParams(np.ones((1, 1, 1, 1)), np.zeros(1))
    np.testing.assert_array_equal(conv2d(x, p), x)


def test_conv_ones_3x3_on_one_hot():
    x = np.zeros((1, 5, 5, 1))
    x[0, 2, 2, 0] = 1
    p = ConvParams(np.ones((3, 3, 1, 1)), np.zeros(1), padding=1)
    y = conv2d(x, p)[0, :, :, 0]
    expected = np.zeros((5, 5))
    expected[1:4, 1:4] = 1
    np.testing.assert_array_equal(y, expected)


def test_conv_output_shape():
    p = ConvParams(np.zeros((3, 3, 1, 8)), np.zeros(8), stride=1, padding=1)
    assert conv2d(np.zeros((2, 64, 64, 1)), p).shape == (2, 64, 64, 8)


@settings(max_examples=40, deadline=None)
@given(
    k=st.sampled_from([1, 2, 3, 5]),
    stride=st.integers(1, 2),
    pad=st.integers(0, 2),
    cin=st.integers(1, 3),
    cout=st.integers(1, 3),
    hw=st.integers(5, 7),
    seed=st.integers(0, 2**16),
)
def test_conv_matches_naive(k, stride, pad, cin, cout, hw, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((2, hw, hw, cin))
    p = ConvParams(rng.standard_normal((k, k, cin, cout)), rng.standard_normal(cout), stride, pad)
    np.testing.assert_allclose(conv2d(x, p), conv_ref(x, p), rtol=1e-10, atol=1e-10)


def test_conv_translation_equivariance(rng):
    x = np.zeros((1, 12, 12, 2))
    x[0, 4:7, 3:6, :] = rng.standard_normal((3, 3, 2))
    p = ConvParams(rng.standard_normal((3, 3, 2, 3)), np.zeros(3), padding=1)
    shifted = np.roll(x, (2, 3), axis=(1, 2))
    np.testing.assert_allclose(
        conv2d(shifted, p), np.roll(conv2d(x, p), (2, 3), axis=(1, 2)), atol=1e-12
    )


def test_conv_rejects_channel_mismatch():
    p = ConvParams(np.zeros((3, 3, 2, 1)), np.zeros(1), padding=1)
    with pytest.raises(ShapeMismatch):
        conv2d(np.zeros((1, 4, 4, 3)), p)


def test_avg_pool_matches_naive(rng):
    x = rng.standard_normal((2, 5, 6, 3))
    y, _ = ops.avg_pool3_forward(x)
    np.testing.assert_allclose(y, naive_avg_pool3(x), atol=1e-12)


# CoT ---------------------------------------------------------------------------


def test_cot_zero_params_give_zero_output_and_uniform_weights():
    layer = CotLayer(CotParams.zeros(8))
    x = np.random.default_rng(0).standard_normal((1, 5, 5, 8))
    assert layer.forward(x).shape == x.shape
    np.testing.assert_array_equal(layer.forward(x), 0.0)
    np.testing.assert_allclose(layer.attention, 1 / 9, atol=1e-15)


@pytest.mark.parametrize("channels, heads", [(4, None), (8, None), (8, 1), (6, 3)])
def test_cot_shape_and_weight_normalization(rng, channels, heads):
    layer = randomize(CotLayer.init(rng, channels, heads=heads), rng, 1.0)
    x = rng.standard_normal((2, 6, 5, channels))
    assert layer.forward(x).shape == x.shape
    np.testing.assert_allclose(layer.attention.sum(axis=3), 1.0, rtol=0, atol=1e-9)
    assert np.all(layer.attention >= 0)


@pytest.mark.parametrize("case", range(5))
def test_cot_matches_naive(case):
    rng = np.random.default_rng(100 + case)
    c = int(rng.choice([4, 8]))
    p = CotParams.init(rng, c)
    layer = randomize(CotLayer(p), rng)
    x = rng.standard_normal((1, 5, 4, c))
    out = layer.forward(x)
    ref_out, ref_dyn, ref_w = naive_cot(x, p)
    np.testing.assert_allclose(layer.dynamic, ref_dyn, atol=1e-9)
    np.testing.assert_allclose(layer.attention, ref_w, atol=1e-9)
    np.testing.assert_allclose(out, ref_out, atol=1e-9)
    np.testing.assert_allclose(cot_forward(x, p), out, atol=1e-12)


def test_cot_heads_must_divide_channels():
    with pytest.raises(ShapeMismatch):
        CotLayer.init(np.random.default_rng(0), 6, heads=4)


def test_cot_rejects_nonfinite(rng):
    layer = CotLayer.init(rng, 4)
    x = np.zeros((1, 4, 4, 4))
    x[0, 1, 1, 0] = np.nan
    with pytest.raises(NonFinite):
        layer.forward(x)


# blocks against naive compositions ---------------------------------------------


def test_residual_unit_matches_composition(rng):
    unit = randomize(ResidualUnit.init(rng, 3, 3), rng)
    layers = dict(unit.branch.children)
    p1, p2 = layers["conv1"].conv_params, layers["conv2"].conv_params
    x = rng.standard_normal((2, 5, 5, 3))
    expected = relu(x + conv_ref(relu(conv_ref(x, p1)), p2))
    np.testing.assert_allclose(unit.forward(x), expected, atol=1e-10)


def test_residual_unit_projection_when_widths_differ(rng):
    unit = ResidualUnit.init(rng, 2, 5)
    assert unit.proj is not None
    assert unit.forward(rng.standard_normal((1, 4, 4, 2))).shape == (1, 4, 4, 5)


def test_inception_matches_composition(rng):
    p = InceptionParams.init(rng, 3, (2, 3, 1, 2))
    block = randomize(InceptionBlock(p), rng)
    x = rng.standard_normal((1, 6, 6, 3))
    b1 = relu(conv_ref(x, p.b1))
    b2 = relu(conv_ref(relu(conv_ref(x, p.b2_reduce)), p.b2_conv))
    b3 = relu(conv_ref(relu(conv_ref(relu(conv_ref(x, p.b3_reduce)), p.b3_conv1)), p.b3_conv2))
    b4 = relu(conv_ref(naive_avg_pool3(x), p.b4_proj))
    expected = np.concatenate([b1, b2, b3, b4], axis=3)
    out = block.forward(x)
    assert out.shape == (1, 6, 6, 8)
    np.testing.assert_allclose(out, expected, atol=1e-10)


def test_mlp_head_matches_composition(rng):
    head = randomize(MLPHead.init(rng, 4, 6, 5), rng)
    x = rng.standard_normal((3, 5, 5, 4))
    pooled = x.mean(axis=(1, 2))
    hw, hb = head.hidden.params["weight"], head.hidden.params["bias"]
    ow, ob = head.out.params["weight"], head.out.params["bias"]
    np.testing.assert_allclose(head.forward(x), relu(pooled @ hw + hb) @ ow + ob, atol=1e-12)


# gradients ---------------------------------------------------------------------

GRAD_TOL = 1e-4


@pytest.mark.parametrize(
    "make, shape",
    [
        (lambda r: Conv2d.init(r, 3, 2, 3), (2, 5, 5, 2)),
        (lambda r: Conv2d.init(r, 3, 2, 2, stride=2), (1, 6, 6, 2)),
        (lambda r: ResidualUnit.init(r, 3, 3, affine=True), (1, 5, 5, 3)),
        (lambda r: ResidualUnit.init(r, 2, 4), (1, 4, 4, 2)),
        (lambda r: InceptionBlock.init(r, 3, (2, 2, 2, 2)), (1, 5, 5, 3)),
        (lambda r: MLPHead.init(r, 4, 6, 5), (2, 4, 4, 4)),
        (lambda r: CotLayer.init(r, 4), (1, 5, 5, 4)),
        (lambda r: CotLayer.init(r, 8, heads=2), (1, 4, 4, 8)),
    ],
    ids=["conv", "conv_stride2", "residual_affine", "residual_proj", "inception", "head", "cot", "cot_2heads"],
)
def test_layer_gradients_match_finite_differences(make, shape):
    rng = np.random.default_rng(5)
    layer = randomize(make(rng), rng)
    errors = check_layer(layer, rng.standard_normal(shape), rng)
    worst = max(errors, key=errors.get)
    assert errors[worst] <= GRAD_TOL, (worst, errors[worst])


def test_loss_examples():
    loss, _ = softmax_cross_entropy(np.zeros(5), 2)
    assert loss == pytest.approx(math.log(5), abs=1e-12)
    z = np.zeros(5)
    z[3] = 1000.0
    loss, grad = softmax_cross_entropy(z, 3)
    assert loss < 1e-12 and np.all(np.isfinite(grad))
    np.testing.assert_allclose(grad, 0.0, atol=1e-12)
    loss, _ = softmax_cross_entropy(-z, 3)
    assert loss == pytest.approx(1000.0 + math.log(4), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**16), label=st.integers(0, 4))
def test_loss_gradient_is_softmax_minus_onehot(seed, label):
    z = np.random.default_rng(seed).standard_normal(5) * 3
    loss, grad = softmax_cross_entropy(z, label)
    p = np.exp(z - z.max())
    p /= p.sum()
    np.testing.assert_allclose(grad, p - np.eye(5)[label], atol=1e-12)
    num = numeric_grad(lambda: softmax_cross_entropy(z, label)[0], z)
    assert relative_error(grad, num) <= GRAD_TOL
    assert loss >= 0 and abs(grad.sum()) < 1e-12


def test_full_toy_model_gradient(rng):
    model = randomize(GRCNet(TOY), rng, 0.3)
    x = rng.standard_normal((2, 8, 8))
    y = np.array([1, 3])
    grads = backward(model, x, y)

    def loss():
        return float(softmax_cross_entropy(model.forward(x), y)[0].sum())

    params = model.parameters()
    for name in ("stem.0.kernel", "global.0.attn_expand.kernel", "head.out.bias"):
        assert relative_error(grads[name], numeric_grad(loss, params[name])) <= GRAD_TOL, name


# model -------------------------------------------------------------------------


def test_model_output_shape_and_determinism(rng):
    x = rng.standard_normal((3, 8, 8))
    a, b = GRCNet(TOY), GRCNet(TOY)
    la, lb = a.forward(x), b.forward(x)
    assert la.shape == (3, 5)
    np.testing.assert_array_equal(la, lb)
    assert a.num_parameters() == sum(p.size for p in a.parameters().values())


def test_model_default_config_shape():
    model = GRCNet(ModelConfig(), dtype=np.float32)
    x = np.random.default_rng(0).uniform(-1, 1, (2, 64, 64)).astype(np.float32)
    assert model.forward(x).shape == (2, 5)


def test_model_batch_permutation_equivariance(rng):
    model = GRCNet(TOY)
    x = rng.standard_normal((4, 8, 8))
    perm = np.array([2, 0, 3, 1])
    np.testing.assert_allclose(model.forward(x[perm]), model.forward(x)[perm], atol=1e-12)


def test_duplicated_item_doubles_gradient(rng):
    model = randomize(GRCNet(TOY), rng, 0.3)
    x = rng.standard_normal((1, 8, 8))
    single = backward(model, x, [2])
    double = backward(model, np.concatenate([x, x]), [2, 2])
    for name in single:
        np.testing.assert_allclose(double[name], 2 * single[name], rtol=1e-9, atol=1e-12)


def test_confident_correct_prediction_has_near_zero_gradient(rng):
    model = GRCNet(TOY)
    model.head.out.params["bias"][:] = [0, 0, 50, 0, 0]
    model.head.out.params["weight"][:] = 0
    grads = backward(model, rng.standard_normal((2, 8, 8)), [2, 2])
    assert max(float(np.abs(g).max()) for g in grads.values()) < 1e-15


def test_model_rejects_wrong_input_size():
    with pytest.raises(ShapeMismatch):
        GRCNet(TOY).forward(np.zeros((1, 16, 16)))


def test_checkpoint_round_trip(rng):
    model = randomize(GRCNet(TOY), rng)
    clone = checkpoint.loads(checkpoint.dumps(model))
    assert clone.cfg == model.cfg
    for (name, a), (name_b, b) in zip(model.named_parameters(), clone.named_parameters()):
        assert name == name_b
        np.testing.assert_array_equal(a, b)
    x = rng.standard_normal((2, 8, 8))
    np.testing.assert_array_equal(clone.forward(x), model.forward(x))
    assert checkpoint.dumps(clone) == checkpoint.dumps(model)
