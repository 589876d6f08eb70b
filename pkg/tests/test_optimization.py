import math

import numpy as np
import pytest
import torch

from oarseg.errors import InvalidConfig, LabelOutOfRange, ShapeMismatch
from oarseg.optim import (
    LossConfig,
    SchedulerConfig,
    ce_loss,
    combined_loss,
    dice_loss,
    lr_at,
    make_optimizer,
    read_lr_trace,
    set_lr,
    write_lr_trace,
)

from oracles import lr_oracle

# ------------------------------------------------------------------ losses


def _peaked_logits(target, n_classes, margin=20.0):
    eye = torch.eye(n_classes, dtype=torch.float64) * margin
    return eye[target].movedim(-1, 1).contiguous()


def test_dice_loss_perfect_prediction():
    target = torch.randint(0, 3, (2, 6, 6))
    logits = _peaked_logits(target, 3)
    assert float(dice_loss(logits, target)) <= 1e-3


def test_dice_loss_uniform_logits_matches_hand_formula():
    # 2 classes, balanced 2x2 target, uniform logits -> p = 0.5 everywhere
    target = torch.tensor([[[0, 1], [0, 1]]])
    logits = torch.zeros((1, 2, 2, 2), dtype=torch.float64)
    smooth = 1e-5
    cfg = LossConfig(dice_weight=1, ce_weight=0, smooth=smooth)
    # foreground class: intersect = 0.5 * 2, denominator = 0.5 * 4 + 2
    want = 1.0 - (2 * 0.5 * 2 + smooth) / (0.5 * 4 + 2 + smooth)
    assert float(dice_loss(logits, target, cfg)) == pytest.approx(want, abs=1e-12)


def test_dice_loss_brute_force_scalar_oracle():
    rng = np.random.default_rng(0)
    logits_np = rng.uniform(-2, 2, size=(1, 3, 2, 2))
    target_np = rng.integers(0, 3, size=(1, 2, 2))
    smooth = 1e-5
    # scalar reimplementation: softmax and per-class sums via explicit loops
    exps = np.exp(logits_np)
    probs = exps / exps.sum(axis=1, keepdims=True)
    scores = []
    for c in (1, 2):
        inter = denom = 0.0
        for b in range(1):
            for i in range(2):
                for j in range(2):
                    t = 1.0 if target_np[b, i, j] == c else 0.0
                    inter += probs[b, c, i, j] * t
                    denom += probs[b, c, i, j] + t
        scores.append((2 * inter + smooth) / (denom + smooth))
    want = 1.0 - np.mean(scores)
    got = dice_loss(torch.from_numpy(logits_np), torch.from_numpy(target_np))
    assert float(got) == pytest.approx(want, rel=1e-10)


def test_dice_loss_empty_foreground_stays_finite():
    target = torch.zeros((1, 4, 4), dtype=torch.long)
    logits = torch.randn((1, 2, 4, 4), dtype=torch.float64)
    loss = float(dice_loss(logits, target))
    assert 0.0 <= loss <= 1.0 and math.isfinite(loss)


def test_dice_loss_bounds_random():
    rng = torch.Generator().manual_seed(0)
    for _ in range(20):
        logits = torch.randn((2, 4, 5, 5), generator=rng, dtype=torch.float64) * 3
        target = torch.randint(0, 4, (2, 5, 5), generator=rng)
        val = float(dice_loss(logits, target))
        assert 0.0 <= val <= 1.0


def test_ce_loss_perfect_and_uniform():
    target = torch.randint(0, 4, (2, 5, 5))
    assert float(ce_loss(_peaked_logits(target, 4), target)) <= 1e-3
    uniform = torch.zeros((2, 4, 5, 5), dtype=torch.float64)
    assert float(ce_loss(uniform, target)) == pytest.approx(math.log(4), abs=1e-6)


def test_ce_loss_brute_force_oracle():
    rng = np.random.default_rng(1)
    logits_np = rng.uniform(-2, 2, size=(2, 3, 4, 4))
    target_np = rng.integers(0, 3, size=(2, 4, 4))
    total = 0.0
    for b in range(2):
        for i in range(4):
            for j in range(4):
                z = logits_np[b, :, i, j]
                log_softmax = z - (np.log(np.sum(np.exp(z - z.max()))) + z.max())
                total += -log_softmax[target_np[b, i, j]]
    want = total / (2 * 4 * 4)
    got = ce_loss(torch.from_numpy(logits_np), torch.from_numpy(target_np))
    assert float(got) == pytest.approx(want, rel=1e-10)


def test_combined_loss_degenerate_weights_bitwise():
    rng = torch.Generator().manual_seed(2)
    logits = torch.randn((2, 3, 6, 6), generator=rng, dtype=torch.float64)
    target = torch.randint(0, 3, (2, 6, 6), generator=rng)
    dice_only = LossConfig(dice_weight=1.0, ce_weight=0.0)
    ce_only = LossConfig(dice_weight=0.0, ce_weight=1.0)
    assert torch.equal(combined_loss(logits, target, dice_only), dice_loss(logits, target, dice_only))
    assert torch.equal(combined_loss(logits, target, ce_only), ce_loss(logits, target))


def test_combined_loss_weighted_sum():
    rng = torch.Generator().manual_seed(3)
    logits = torch.randn((1, 3, 4, 4), generator=rng, dtype=torch.float64)
    target = torch.randint(0, 3, (1, 4, 4), generator=rng)
    cfg = LossConfig(dice_weight=0.4, ce_weight=0.6)
    d = dice_loss(logits, target, cfg)
    c = ce_loss(logits, target)
    assert torch.equal(combined_loss(logits, target, cfg), 0.4 * d + 0.6 * c)
    # reference arithmetic: terms 0.5 and 1.0 weight to 0.8
    assert 0.4 * 0.5 + 0.6 * 1.0 == pytest.approx(0.8)


def test_combined_loss_monotone_in_ce_weight():
    rng = torch.Generator().manual_seed(4)
    logits = torch.randn((1, 3, 5, 5), generator=rng, dtype=torch.float64)
    target = torch.randint(0, 3, (1, 5, 5), generator=rng)
    assert float(ce_loss(logits, target)) > 0
    lo = combined_loss(logits, target, LossConfig(dice_weight=0.4, ce_weight=0.6))
    hi = combined_loss(logits, target, LossConfig(dice_weight=0.4, ce_weight=0.9))
    assert float(hi) > float(lo)


def test_loss_shape_and_label_errors():
    logits = torch.zeros((1, 3, 4, 4))
    with pytest.raises(ShapeMismatch):
        dice_loss(logits, torch.zeros((1, 5, 5), dtype=torch.long))
    with pytest.raises(LabelOutOfRange):
        ce_loss(logits, torch.full((1, 4, 4), 3, dtype=torch.long))


def test_loss_config_validation():
    with pytest.raises(InvalidConfig):
        LossConfig(dice_weight=0.0, ce_weight=0.0)
    with pytest.raises(InvalidConfig):
        LossConfig(smooth=0.0)
    with pytest.raises(InvalidConfig):
        LossConfig(dice_weight=-0.1)


def test_dice_loss_gradcheck():
    rng = torch.Generator().manual_seed(5)
    logits = torch.randn((1, 2, 3, 3), generator=rng, dtype=torch.float64, requires_grad=True)
    target = torch.randint(0, 2, (1, 3, 3), generator=rng)
    assert torch.autograd.gradcheck(lambda z: dice_loss(z, target), (logits,))


# --------------------------------------------------------------- scheduler


def test_lr_spot_values_exact():
    tri = SchedulerConfig(policy="triangular", step_size=100)
    assert lr_at(tri, 0) == 0.001
    assert lr_at(tri, 100) == 0.006
    tri2 = SchedulerConfig(policy="triangular2", step_size=100)
    assert lr_at(tri2, 300) == 0.0035  # second-cycle peak: halved amplitude


def test_lr_matches_closed_form_oracle():
    for policy in ("constant", "triangular", "triangular2", "exp_range"):
        cfg = SchedulerConfig(policy=policy, step_size=37, gamma=0.9995)
        for t in range(0, 500):
            assert lr_at(cfg, t) == lr_oracle(policy, 0.001, 0.006, 37, 0.9995, t)


def test_lr_triangular_periodicity():
    cfg = SchedulerConfig(policy="triangular", step_size=8)
    for t in range(100):
        assert lr_at(cfg, t) == lr_at(cfg, t + 2 * 8)


def test_lr_triangular2_peaks_halve():
    s = 16
    cfg = SchedulerConfig(policy="triangular2", step_size=s)
    for k in (1, 2, 3, 4):
        peak = lr_at(cfg, (2 * k - 1) * s)
        assert peak == pytest.approx(0.001 + 0.005 / 2 ** (k - 1), abs=1e-15)


def test_lr_exp_range_bounded_by_triangular_envelope():
    s, gamma = 11, 0.999
    exp_cfg = SchedulerConfig(policy="exp_range", step_size=s, gamma=gamma)
    tri_cfg = SchedulerConfig(policy="triangular", step_size=s)
    for t in range(400):
        exp_lr, tri_lr = lr_at(exp_cfg, t), lr_at(tri_cfg, t)
        assert exp_lr <= tri_lr + 1e-18
        assert exp_lr - 0.001 <= (tri_lr - 0.001) * gamma**t + 1e-18


def test_lr_constant_policy():
    cfg = SchedulerConfig(policy="constant", base_lr=0.002, max_lr=0.002)
    assert all(lr_at(cfg, t) == 0.002 for t in range(0, 2000, 37))


def test_scheduler_config_validation():
    with pytest.raises(InvalidConfig):
        SchedulerConfig(policy="cosine")
    with pytest.raises(InvalidConfig):
        SchedulerConfig(base_lr=0.01, max_lr=0.001)
    with pytest.raises(InvalidConfig):
        SchedulerConfig(step_size=0)
    with pytest.raises(InvalidConfig):
        SchedulerConfig(gamma=0.0)


def test_lr_trace_roundtrip(tmp_path):
    cfg = SchedulerConfig(policy="exp_range", step_size=5)
    path = tmp_path / "trace.csv"
    write_lr_trace(cfg, 50, path)
    trace = read_lr_trace(path)
    assert len(trace) == 50
    assert all(lr == lr_at(cfg, t) for t, lr in trace)


# --------------------------------------------------------------- optimizer


def test_adam_descends_scalar_quadratic():
    w = torch.tensor([1.0], requires_grad=True)
    opt = make_optimizer([w], lr0=0.1)
    loss = (w**2).sum()
    loss.backward()
    opt.step()
    assert abs(float(w.detach())) < 1.0


def test_adam_zero_gradient_keeps_parameters():
    w = torch.tensor([0.5, -0.5], requires_grad=True)
    before = w.detach().clone()
    opt = make_optimizer([w], lr0=0.1)
    w.grad = torch.zeros_like(w)
    opt.step()
    assert torch.equal(w.detach(), before)


def test_adam_converges_on_2d_quadratic():
    w = torch.tensor([1.0, -1.5], requires_grad=True)
    target = torch.tensor([0.3, 0.7])
    opt = make_optimizer([w], lr0=0.05)
    for _ in range(200):
        opt.zero_grad()
        loss = ((w - target) ** 2).sum()
        loss.backward()
        opt.step()
    assert float(((w.detach() - target) ** 2).sum()) < 1e-3


def test_set_lr_updates_groups():
    w = torch.tensor([1.0], requires_grad=True)
    opt = make_optimizer([w], lr0=0.1)
    set_lr(opt, 0.004)
    assert all(g["lr"] == 0.004 for g in opt.param_groups)


def test_make_optimizer_rejects_bad_lr():
    with pytest.raises(InvalidConfig):
        make_optimizer([torch.tensor([1.0], requires_grad=True)], lr0=0.0)
