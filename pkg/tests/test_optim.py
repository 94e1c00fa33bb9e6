"""Optimizer template: presets, schedules, clipping, state accounting."""

import math

import numpy as np
import pytest

from snsm.linalg import FrameKind
from snsm.optim import (
    ConstantSchedule,
    CosineWarmup,
    NonFiniteGradientError,
    Optimizer,
    lr_at,
    make_preset,
)


def _run_stream(preset_name, shapes, T=50, lr=0.01, seed=0, tags=None, **kw):
    spec = make_preset(preset_name, lr=lr, **kw)
    opt = Optimizer(spec, shapes, tags=tags, total_steps=T)
    rng = np.random.default_rng(seed)
    params = [np.zeros(s) for s in shapes]
    history = []
    for t in range(1, T + 1):
        grads = [rng.standard_normal(s) for s in shapes]
        params = opt.step(params, grads, t)
        history.append([p.copy() for p in params])
    return history


def test_sgd_hand_example():
    opt = Optimizer(make_preset("SGD", lr=1.0), [(2,)], total_steps=1)
    (x,) = opt.step([np.zeros(2)], [np.array([1.0, 2.0])], 1)
    np.testing.assert_array_equal(x, [-1.0, -2.0])


def test_sgdm_matches_reference():
    T = 30
    hist = _run_stream("SGDm", [(6,)], T=T, lr=0.05, seed=3)
    rng = np.random.default_rng(3)
    x = np.zeros(6)
    m = np.zeros(6)
    for t in range(T):
        g = rng.standard_normal(6)
        m = 0.9 * m + 0.1 * g
        x = x - 0.05 * m
        np.testing.assert_allclose(hist[t][0], x, atol=1e-12)


def test_adam_matches_reference():
    T = 40
    hist = _run_stream("Adam", [(5,)], T=T, lr=0.01, seed=7)
    rng = np.random.default_rng(7)
    x, m, v = np.zeros(5), np.zeros(5), np.zeros(5)
    b1, b2, eps = 0.9, 0.999, 1e-8
    for t in range(1, T + 1):
        g = rng.standard_normal(5)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        vh = v / (1 - b2 ** t)
        x = x - 0.01 * m / (np.sqrt(vh) + eps)
        np.testing.assert_allclose(hist[t - 1][0], x, atol=1e-12)


def test_adagradnorm_matches_reference():
    T = 25
    hist = _run_stream("AdaGradNorm", [(4,)], T=T, lr=0.1, seed=11)
    rng = np.random.default_rng(11)
    x = np.zeros(4)
    b2 = (1e-6) ** 2
    for t in range(T):
        g = rng.standard_normal(4)
        b2 += g @ g
        x = x - 0.1 * g / math.sqrt(b2)
        np.testing.assert_allclose(hist[t][0], x, atol=1e-13)


def test_snsm_composite_one_step_by_hand():
    # identity frame + c=1 subset on a 2x2 parameter: direction is the EMA
    # momentum, denominator the shared root accumulated squared norm
    spec = make_preset("AdaGradSNSM", lr=1.0, rank=2, refresh_gap=0,
                       frame_kind=FrameKind.IDENTITY, subset_rule="norm")
    opt = Optimizer(spec, [(2, 2)], total_steps=1)
    g = np.array([[3.0, 0.0], [0.0, 4.0]])
    (x,) = opt.step([np.zeros((2, 2))], [g], 1)
    denom = math.sqrt((1e-6) ** 2 + 25.0)
    np.testing.assert_allclose(x, -(0.1 * g) / denom, atol=1e-12)


def test_full_rank_subspace_ema_matches_adam():
    T = 20
    hist_a = _run_stream("Adam", [(4, 3)], T=T, lr=0.01, seed=5)
    hist_b = _run_stream("AdamSNSM", [(4, 3)], T=T, lr=0.01, seed=5, rank=4,
                         refresh_gap=0, frame_kind=FrameKind.IDENTITY,
                         subset_rule="coord")
    for a, b in zip(hist_a, hist_b):
        np.testing.assert_allclose(a[0], b[0], atol=1e-12)


def test_transposed_parameter_orientation():
    # m < n: frames act over the column dimension; both orientations run
    hist = _run_stream("AdamSNSM", [(3, 8)], T=10, rank=2,
                       frame_kind=FrameKind.GAUSSIAN_ORTHO, refresh_gap=5)
    assert hist[-1][0].shape == (3, 8)
    assert np.all(np.isfinite(hist[-1][0]))


def test_non_linear_tag_falls_back():
    spec = make_preset("AdamSNSM", rank=2)
    opt = Optimizer(spec, [(8, 4), (8, 4)], tags=["linear", "embedding"],
                    total_steps=10)
    lin, emb = opt.slots
    assert lin.sm_state is not None and lin.sn_state is not None
    assert emb.sm_state is None and emb.v_buf is not None  # plain Adam path


def test_nan_gradient_rejected():
    opt = Optimizer(make_preset("SGD"), [(2,)], total_steps=5)
    x = [np.zeros(2)]
    with pytest.raises(NonFiniteGradientError):
        opt.step(x, [np.array([1.0, np.nan])], 1)
    with pytest.raises(NonFiniteGradientError):
        opt.step(x, [np.array([np.inf, 0.0])], 1)


def test_shape_mismatch_rejected():
    opt = Optimizer(make_preset("SGD"), [(2,)], total_steps=5)
    with pytest.raises(ValueError):
        opt.step([np.zeros(3)], [np.zeros(3)], 1)


def test_global_norm_clipping():
    spec = make_preset("SGD", lr=1.0, clip_norm=1.0)
    opt = Optimizer(spec, [(2,), (2,)], total_steps=1)
    grads = [np.array([3.0, 0.0]), np.array([0.0, 4.0])]  # joint norm 5
    xs = opt.step([np.zeros(2), np.zeros(2)], grads, 1)
    moved = np.concatenate([-x for x in xs])
    assert np.linalg.norm(moved) <= 1.0 + 1e-12
    np.testing.assert_allclose(moved, [0.6, 0.0, 0.0, 0.8], atol=1e-12)


def test_decoupled_weight_decay():
    spec = make_preset("SGD", lr=0.1, weight_decay=0.5)
    opt = Optimizer(spec, [(1,)], total_steps=1)
    (x,) = opt.step([np.array([2.0])], [np.array([0.0])], 1)
    np.testing.assert_allclose(x, [2.0 - 0.1 * 0.5 * 2.0])


def test_unknown_preset():
    with pytest.raises(ValueError):
        make_preset("Shampoo")


# ---------------------------------------------------------------------------
# schedules

def test_constant_schedule():
    for t in (1, 50, 100):
        assert lr_at(ConstantSchedule(), 0.3, t, 100) == 0.3


def test_cosine_warmup_boundaries():
    sched = CosineWarmup(warmup_frac=0.1, floor_frac=0.1)
    T = 1000
    assert np.isclose(lr_at(sched, 1.0, 100, T), 1.0)  # warmup end: exactly max
    assert np.isclose(lr_at(sched, 1.0, 50, T), 0.5)  # linear ramp
    assert np.isclose(lr_at(sched, 1.0, T, T), 0.1)  # decayed to 10%
    mid = lr_at(sched, 1.0, 550, T)
    assert np.isclose(mid, 0.1 + 0.45 * (1 + math.cos(math.pi * 0.5)))


def test_lr_at_out_of_range():
    with pytest.raises(ValueError):
        lr_at(ConstantSchedule(), 1.0, 0, 10)
    with pytest.raises(ValueError):
        lr_at(ConstantSchedule(), 1.0, 11, 10)


# ---------------------------------------------------------------------------
# state accounting

@pytest.mark.parametrize("shapes", [[(512, 128)], [(512, 128), (2048, 1024)]])
def test_state_size_formulas(shapes):
    r = 4
    expect = {
        "Adam": sum(2 * m * n for m, n in shapes),
        "AdamSN": sum(m * n + max(m, n) for m, n in shapes),
        "RMSPropSN": sum(max(m, n) for m, n in shapes),
        "AdamSNSM": sum(r * min(m, n) + max(m, n) for m, n in shapes),
        "GaLore": sum(2 * r * min(m, n) for m, n in shapes),
        "SGD": 0,
    }
    for name, total in expect.items():
        opt = Optimizer(make_preset(name, rank=r), shapes, total_steps=1)
        assert opt.state_size().total == total, name


def test_state_size_frame_reported_separately():
    opt = Optimizer(make_preset("AdamSNSM", rank=4), [(512, 128)], total_steps=1)
    ss = opt.state_size()
    assert ss.frame_elements == 4 * 512
    assert "frame" not in ss.breakdown


def test_state_size_skips_singletons():
    # AdaGradNorm keeps one scalar accumulator: excluded from the count
    opt = Optimizer(make_preset("AdaGradNorm"), [(64,)], total_steps=1)
    assert opt.state_size().total == 0


def test_state_size_constant_over_steps():
    opt = Optimizer(make_preset("AdamSN"), [(16, 8)], total_steps=10)
    before = opt.state_size().total
    params = [np.zeros((16, 8))]
    rng = np.random.default_rng(0)
    for t in range(1, 6):
        params = opt.step(params, [rng.standard_normal((16, 8))], t)
    assert opt.state_size().total == before
