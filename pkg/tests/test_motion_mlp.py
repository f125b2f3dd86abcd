import math

import numpy as np
import pytest
from scipy.special import erf

from voskit.boxes import BBox, Motion
from voskit.gradcheck import central_diff, max_err
from voskit.motion_mlp import (
    LAYER_SIZES,
    Adam,
    MotionPredictor,
    cv_dataset_loss,
    dataset_loss,
    extract_triples,
    gelu,
    gelu_grad,
    init_params,
    mlp_backward,
    mlp_forward,
    pt_loss,
    smooth_l1,
    train_pt,
)
from voskit.rng import Rng


# --- activation ---


def test_gelu_fixed_points_and_limits():
    assert gelu(np.array([0.0]))[0] == 0.0
    assert abs(gelu(np.array([10.0]))[0] - 10.0) < 1e-6
    assert abs(gelu(np.array([-10.0]))[0]) < 1e-6


def test_gelu_close_to_exact_gaussian_form():
    # the tanh form approximates x * Phi(x) to a few 1e-3 absolute
    x = np.linspace(-5, 5, 101)
    exact = x * 0.5 * (1.0 + erf(x / math.sqrt(2.0)))
    assert np.max(np.abs(gelu(x) - exact)) < 5e-3


def test_gelu_grad_matches_fd():
    x = np.linspace(-4, 4, 33)
    numeric = np.array(
        [central_diff(lambda v: float(gelu(v)[0]), np.array([xi]))[0] for xi in x]
    )
    assert max_err(gelu_grad(x), numeric) < 1e-7


# --- initialization ---


def test_init_shapes_and_zero_output_layer():
    params = init_params(0)
    assert len(params) == len(LAYER_SIZES) - 1 == 5
    for i, layer in enumerate(params):
        assert layer["weight"].shape == (LAYER_SIZES[i], LAYER_SIZES[i + 1])
        assert layer["bias"].shape == (LAYER_SIZES[i + 1],)
        assert np.all(layer["bias"] == 0.0)
    assert np.all(params[-1]["weight"] == 0.0)
    assert np.any(params[0]["weight"] != 0.0)


def test_init_he_uniform_bounds():
    params = init_params(3)
    for layer in params[:-1]:
        bound = math.sqrt(6.0 / layer["weight"].shape[0])
        assert np.all(np.abs(layer["weight"]) <= bound)
        assert layer["weight"].std() > 0.1 * bound


def test_init_is_deterministic_per_seed():
    a, b, c = init_params(7), init_params(7), init_params(8)
    for la, lb in zip(a, b):
        assert np.array_equal(la["weight"], lb["weight"])
    assert not np.array_equal(a[0]["weight"], c[0]["weight"])


# --- forward ---


def forward_loops(params, x):
    """Independent scalar-loop recomputation of the forward pass."""
    h = list(x)
    coeff = math.sqrt(2.0 / math.pi)
    for i, layer in enumerate(params):
        weight, bias = layer["weight"], layer["bias"]
        z = []
        for k in range(weight.shape[1]):
            acc = bias[k]
            for j in range(weight.shape[0]):
                acc += h[j] * weight[j, k]
            z.append(acc)
        if i < len(params) - 1:
            z = [0.5 * v * (1.0 + math.tanh(coeff * (v + 0.044715 * v**3))) for v in z]
        h = z
    return np.array(h)


def test_forward_matches_loop_oracle():
    params = init_params(1)
    # give the output layer real values so the check is not trivially zero
    rng = Rng(9)
    params[-1]["weight"] = rng.uniform_range(-0.5, 0.5, 256).reshape(64, 4)
    params[-1]["bias"] = rng.uniform_range(-0.1, 0.1, 4)
    for seed in range(5):
        x = Rng(seed).uniform_range(-1.0, 1.0, 4)
        out, _ = mlp_forward(params, x)
        assert np.allclose(out, forward_loops(params, x), atol=1e-12)


def test_forward_batch_matches_single():
    params = init_params(2)
    params[-1]["weight"] = Rng(4).uniform_range(-0.5, 0.5, 256).reshape(64, 4)
    xs = Rng(5).uniform_range(-1, 1, 12).reshape(3, 4)
    batch_out, _ = mlp_forward(params, xs)
    for i in range(3):
        single, _ = mlp_forward(params, xs[i])
        assert np.allclose(batch_out[i], single, atol=1e-14)


def test_forward_rejects_bad_width():
    with pytest.raises(ValueError):
        mlp_forward(init_params(0), np.zeros(5))


def test_zero_init_network_outputs_zero_motion():
    model = MotionPredictor.for_frame(480, 854)
    for seed in range(5):
        motion = Motion(*Rng(seed).uniform_range(-20, 20, 4))
        out = model.predict_motion(motion)
        assert out.as_tuple() == (0.0, 0.0, 0.0, 0.0)


# --- backward ---


def test_backward_zero_upstream_gives_zero_grads():
    params = init_params(0)
    x = np.ones(4)
    _, cache = mlp_forward(params, x)
    grads = mlp_backward(params, cache, np.zeros(4))
    for g in grads:
        assert np.all(g["weight"] == 0.0) and np.all(g["bias"] == 0.0)


def test_backward_first_layer_fd_spot_check():
    params = init_params(11)
    rng = Rng(12)
    params[-1]["weight"] = rng.uniform_range(-0.5, 0.5, 256).reshape(64, 4)
    x = rng.uniform_range(-1, 1, 4)
    c = rng.uniform_range(-1, 1, 4)
    _, cache = mlp_forward(params, x)
    analytic = mlp_backward(params, cache, c)

    def scalar(_arr):
        out, _ = mlp_forward(params, x)
        return float(np.sum(out * c))

    numeric_w0 = central_diff(scalar, params[0]["weight"])
    numeric_b0 = central_diff(scalar, params[0]["bias"])
    assert max_err(analytic[0]["weight"], numeric_w0) < 1e-5
    assert max_err(analytic[0]["bias"], numeric_b0) < 1e-5


def test_backward_batch_is_sum_of_singles():
    params = init_params(3)
    params[-1]["weight"] = Rng(6).uniform_range(-0.5, 0.5, 256).reshape(64, 4)
    xs = Rng(7).uniform_range(-1, 1, 8).reshape(2, 4)
    cs = Rng(8).uniform_range(-1, 1, 8).reshape(2, 4)
    _, cache = mlp_forward(params, xs)
    batch = mlp_backward(params, cache, cs)
    singles = []
    for i in range(2):
        _, c1 = mlp_forward(params, xs[i])
        singles.append(mlp_backward(params, c1, cs[i]))
    for layer in range(len(params)):
        summed = singles[0][layer]["weight"] + singles[1][layer]["weight"]
        assert np.allclose(batch[layer]["weight"], summed, atol=1e-12)


# --- Adam ---


def test_adam_first_step_is_signed_lr():
    params = [{"weight": np.zeros((2, 2)), "bias": np.zeros(2)}]
    grads = [{"weight": np.array([[1.0, -2.0], [0.5, 0.0]]), "bias": np.array([3.0, -1.0])}]
    opt = Adam(lr=0.01)
    opt.step(params, grads)
    expected = -0.01 * np.sign(grads[0]["weight"])
    expected[1, 1] = 0.0  # zero gradient -> no movement
    assert np.allclose(params[0]["weight"], expected, atol=1e-6)
    assert np.allclose(params[0]["bias"], -0.01 * np.sign(grads[0]["bias"]), atol=1e-6)


def test_adam_zero_grad_is_noop_without_decay():
    params = [{"weight": np.full((2, 2), 0.7), "bias": np.zeros(2)}]
    opt = Adam()
    opt.step(params, [{"weight": np.zeros((2, 2)), "bias": np.zeros(2)}])
    assert np.all(params[0]["weight"] == 0.7)


def test_adam_decoupled_weight_decay_shrinks_params():
    params = [{"weight": np.full((2, 2), 1.0), "bias": np.zeros(2)}]
    opt = Adam(lr=0.1, weight_decay=0.5)
    opt.step(params, [{"weight": np.zeros((2, 2)), "bias": np.zeros(2)}])
    assert np.allclose(params[0]["weight"], 1.0 - 0.1 * 0.5, atol=1e-12)


# --- losses over motions ---


def test_smooth_l1_values_and_grads():
    value, grad = smooth_l1(np.array([0.0, 0.5, 2.0, -2.0]))
    assert np.allclose(value, [0.0, 0.125, 1.5, 1.5])
    assert np.allclose(grad, [0.0, 0.5, 1.0, -1.0])


def test_pt_loss_zero_at_exact_match():
    prev = BBox(10, 10, 20, 20)
    t = np.array([2.0, 1.0, 0.0, 0.0])
    value, grad = pt_loss(t, t, prev)
    assert value == 0.0
    assert np.allclose(grad, 0.0)


def test_pt_loss_small_box_penalty_doubles():
    prev = BBox(10, 10, 20, 20)
    target = np.array([0.0, 0.0, 4.0, 4.0])  # target grows the box
    pred_small = np.array([0.0, 0.0, 1.0, 1.0])  # prediction grows it less
    pred_big = np.array([0.0, 0.0, 7.0, 7.0])  # overshoot by the same margin
    v_small, _ = pt_loss(pred_small, target, prev, lambda_small=2.0)
    v_big, _ = pt_loss(pred_big, target, prev, lambda_small=2.0)
    assert abs(v_small - 2.0 * v_big) < 1e-12
    v_neutral, _ = pt_loss(pred_small, target, prev, lambda_small=1.0)
    assert abs(v_small - 2.0 * v_neutral) < 1e-12


def test_pt_loss_gradient_fd_both_sides_of_gate():
    prev = BBox(0, 0, 10, 10)
    target = np.array([1.0, -1.0, 2.0, 0.5])
    # components stay clear of the Huber kink at |diff| = 1, where the
    # second derivative jumps and central differences lose accuracy
    for pred in (
        np.array([0.5, 0.2, -1.0, 0.1]),  # smaller box than target
        np.array([2.2, 1.5, 4.0, 2.5]),  # larger box than target
    ):
        _, analytic = pt_loss(pred, target, prev)
        numeric = central_diff(lambda p: pt_loss(p, target, prev)[0], pred.copy())
        assert max_err(analytic, numeric) < 1e-6


def test_pt_loss_validates_inputs():
    with pytest.raises(ValueError):
        pt_loss(np.zeros(3), np.zeros(4), BBox(0, 0, 5, 5))
    with pytest.raises(ValueError):
        pt_loss(np.zeros(4), np.zeros(4), BBox(0, 0, 5, 5), lambda_small=0.5)


# --- training data extraction ---


def test_extract_triples_counts_and_values():
    boxes = [BBox(0, 0, 5, 5), BBox(2, 1, 5, 5), BBox(4, 2, 5, 5), BBox(6, 3, 5, 5)]
    triples = extract_triples({1: boxes})
    assert len(triples) == 2
    t_in, t_out, prev = triples[0]
    assert np.allclose(t_in, [2, 1, 0, 0])
    assert np.allclose(t_out, [2, 1, 0, 0])
    assert prev == boxes[1]


def test_extract_triples_gaps_break_runs():
    boxes = [BBox(0, 0, 5, 5), BBox(1, 0, 5, 5), None, BBox(3, 0, 5, 5), BBox(4, 0, 5, 5)]
    assert extract_triples({1: boxes}) == []
    boxes.append(BBox(5, 0, 5, 5))
    assert len(extract_triples({1: boxes})) == 1


def test_extract_triples_visits_objects_in_sorted_order():
    track = [BBox(0, 0, 5, 5), BBox(1, 0, 5, 5), BBox(2, 0, 5, 5)]
    track_b = [BBox(0, 0, 5, 5), BBox(0, 1, 5, 5), BBox(0, 2, 5, 5)]
    triples = extract_triples({2: track, 1: track_b})
    assert np.allclose(triples[0][0], [0, 1, 0, 0])  # object 1 first
    assert np.allclose(triples[1][0], [1, 0, 0, 0])


# --- training ---


def cv_triples(n=40, seed=0):
    rng = Rng(seed)
    triples = []
    for _ in range(n):
        v = rng.uniform_range(-6, 6, 2)
        x, y = rng.uniform_range(50, 400, 2)
        boxes = [BBox(x + v[0] * k, y + v[1] * k, 30, 24) for k in range(3)]
        triples.extend(extract_triples({1: boxes}))
    return triples


def test_train_learns_identity_on_constant_velocity():
    triples = cv_triples()
    model = MotionPredictor.for_frame(480, 854)
    before = dataset_loss(model, triples)
    history = train_pt(model, triples, epochs=40, seed=0)
    after = dataset_loss(model, triples)
    assert after < before / 10.0
    assert history[-1] < history[0]
    # prediction now tracks the input motion closely
    m = model.predict_motion(Motion(4.0, -2.0, 0.0, 0.0))
    assert abs(m.dx - 4.0) < 1.0 and abs(m.dy + 2.0) < 1.0


def test_train_is_bitwise_deterministic():
    t = cv_triples(10)
    m1 = MotionPredictor.for_frame(100, 100, seed=3)
    m2 = MotionPredictor.for_frame(100, 100, seed=3)
    train_pt(m1, t, epochs=3, seed=9)
    train_pt(m2, t, epochs=3, seed=9)
    for la, lb in zip(m1.params, m2.params):
        assert np.array_equal(la["weight"], lb["weight"])
        assert np.array_equal(la["bias"], lb["bias"])


def test_train_zero_epochs_is_noop():
    t = cv_triples(5)
    model = MotionPredictor.for_frame(100, 100, seed=1)
    reference = [layer["weight"].copy() for layer in model.params]
    history = train_pt(model, t, epochs=0)
    assert history == []
    for layer, ref in zip(model.params, reference):
        assert np.array_equal(layer["weight"], ref)


def test_train_rejects_bad_arguments():
    model = MotionPredictor.for_frame(100, 100)
    with pytest.raises(ValueError):
        train_pt(model, [], epochs=-1)
    with pytest.raises(ValueError):
        train_pt(model, [], batch=0)


def test_cv_baseline_loss_zero_on_constant_velocity():
    assert cv_dataset_loss(cv_triples(10)) < 1e-12


# --- predictor plumbing ---


def test_for_frame_scale_is_tenth_of_diagonal():
    model = MotionPredictor.for_frame(480, 854)
    assert abs(model.scale - 0.1 * math.hypot(480, 854)) < 1e-12
    with pytest.raises(ValueError):
        MotionPredictor(scale=0.0)


def test_param_items_roundtrip():
    model = MotionPredictor.for_frame(120, 200, seed=5)
    train_pt(model, cv_triples(5), epochs=2)
    items = dict(model.param_items())
    assert "pt.norm.scale" in items
    clone = MotionPredictor.from_param_items(items)
    assert clone.scale == model.scale
    m = Motion(3.0, 1.0, 0.5, -0.5)
    assert np.allclose(
        clone.predict_motion(m).as_tuple(), model.predict_motion(m).as_tuple(), atol=1e-12
    )


def test_from_param_items_validates():
    model = MotionPredictor.for_frame(120, 200)
    items = dict(model.param_items())
    del items["pt.layer2.bias"]
    with pytest.raises(ValueError):
        MotionPredictor.from_param_items(items)
    items = dict(model.param_items())
    items["pt.layer1.weight"] = np.zeros((3, 3))
    with pytest.raises(ValueError):
        MotionPredictor.from_param_items(items)
    with pytest.raises(ValueError):
        MotionPredictor.from_param_items({})
