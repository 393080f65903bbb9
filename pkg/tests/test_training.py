import math
import random
import statistics

import pytest

from hoikit.training import (
    RATIO_TOKEN,
    TokenLogProbs,
    group_advantages,
    grpo_objective,
    sft_loss,
)


def seq(values, mask=None):
    return TokenLogProbs(values, mask if mask is not None else [1] * len(values))


def test_token_log_probs_validation():
    with pytest.raises(ValueError):
        TokenLogProbs([0.1, 0.2], [1])
    with pytest.raises(ValueError):
        TokenLogProbs([0.1], [2])
    s = seq([-1.0, -2.0, -3.0], [1, 0, 1])
    assert s.masked_sum() == -4.0
    assert s.masked_count() == 2


def test_group_advantages_known_values():
    assert group_advantages([0.0, 1.0]) == pytest.approx([-1.0, 1.0])
    adv = group_advantages([1.0, 2.0, 3.0, 4.0])
    mean = 2.5
    std = statistics.pstdev([1.0, 2.0, 3.0, 4.0])
    assert adv == pytest.approx([(r - mean) / std for r in [1.0, 2.0, 3.0, 4.0]])


def test_group_advantages_constant_group_is_zero():
    assert group_advantages([0.7, 0.7, 0.7, 0.7]) == [0.0, 0.0, 0.0, 0.0]


def test_group_advantages_sum_to_zero_and_affine_invariance():
    rng = random.Random(3)
    for _ in range(100):
        rewards = [rng.uniform(0, 3.8) for _ in range(rng.randint(2, 16))]
        adv = group_advantages(rewards)
        assert sum(adv) == pytest.approx(0.0, abs=1e-9)
        if statistics.pstdev(rewards) > 1e-6:
            scaled = [2.5 * r + 1.0 for r in rewards]
            assert group_advantages(scaled) == pytest.approx(adv)


def test_group_advantages_rejects_tiny_groups_and_bad_values():
    with pytest.raises(ValueError):
        group_advantages([1.0])
    with pytest.raises(ValueError):
        group_advantages([])
    with pytest.raises(ValueError):
        group_advantages([1.0, float("nan")])


def naive_objective(new, old, ref, advantages, epsilon_clip=0.2, beta=0.04):
    """Direct transcription of the sequence-ratio objective for cross-checking."""
    total = 0.0
    for s_new, s_old, s_ref, adv in zip(new, old, ref, advantages):
        log_ratio = s_new.masked_sum() - s_old.masked_sum()
        s1 = math.exp(log_ratio)
        s2 = min(max(s1, 1 - epsilon_clip), 1 + epsilon_clip)
        surrogate = 0.0 if adv == 0 else min(s1 * adv, s2 * adv)
        diffs = [
            (vr - vn)
            for vn, vr, m in zip(s_new.values, s_ref.values, s_new.mask)
            if m
        ]
        kl = sum(math.exp(d) - d - 1 for d in diffs) / len(diffs) if diffs else 0.0
        total += surrogate - beta * kl
    return -total / len(new)


def random_group(rng, g=None):
    g = g or rng.randint(2, 6)
    new, old, ref = [], [], []
    for _ in range(g):
        n = rng.randint(1, 12)
        mask = [rng.randint(0, 1) for _ in range(n)]
        new.append(seq([rng.uniform(-3, 0) for _ in range(n)], mask))
        old.append(seq([rng.uniform(-3, 0) for _ in range(n)], mask))
        ref.append(seq([rng.uniform(-3, 0) for _ in range(n)], mask))
    advantages = group_advantages([rng.uniform(0, 3.8) for _ in range(g)])
    return new, old, ref, advantages


def test_objective_matches_naive_recomputation():
    rng = random.Random(11)
    for _ in range(200):
        new, old, ref, adv = random_group(rng)
        got = grpo_objective(new, old, ref, adv)
        want = naive_objective(new, old, ref, adv)
        assert got == pytest.approx(want, abs=1e-12)


def test_objective_spot_values():
    # Single masked token, log-ratio ln 2, advantage pinned manually via a
    # two-sample group where rewards 0 and 1 give advantages -1 and +1.
    new = [seq([math.log(2.0)]), seq([0.0])]
    old = [seq([0.0]), seq([0.0])]
    ref = [seq([0.0]), seq([0.0])]
    adv = group_advantages([1.0, 0.0])
    assert adv == pytest.approx([1.0, -1.0])
    # Sample 1: s1 = 2, clipped to 1.2, advantage 1 -> min(2, 1.2) = 1.2.
    # KL term: exp(-ln 2) + ln 2 - 1 = 0.5 + ln 2 - 1.
    kl_1 = 0.5 + math.log(2.0) - 1.0
    # Sample 2: identical distributions, surrogate = -1, kl = 0.
    want = -((1.2 - 0.04 * kl_1) + (-1.0)) / 2
    assert grpo_objective(new, old, ref, adv) == pytest.approx(want)


def test_zero_advantage_contributes_nothing_even_at_extreme_ratios():
    new = [seq([500.0]), seq([0.0])]
    old = [seq([0.0]), seq([0.0])]
    ref = [seq([500.0]), seq([0.0])]
    got = grpo_objective(new, old, ref, [0.0, 0.0], beta=0.0)
    assert got == 0.0


def test_identical_policies_reduce_to_mean_negative_advantage_times_one():
    # When new == old == ref, every ratio is 1 and KL is 0, so the objective
    # is -mean(advantage), which group normalization makes 0.
    rng = random.Random(5)
    for _ in range(50):
        n = rng.randint(2, 8)
        probs = [seq([rng.uniform(-2, 0) for _ in range(4)]) for _ in range(n)]
        adv = group_advantages([rng.uniform(0, 3.8) for _ in range(n)])
        assert grpo_objective(probs, probs, probs, adv) == pytest.approx(0.0, abs=1e-9)


def test_clip_is_continuous_at_boundary():
    eps = 0.2
    old = [seq([0.0]), seq([0.0])]
    adv = [1.0, -1.0]
    lo = grpo_objective([seq([math.log(1.2 - 1e-9)]), seq([0.0])], old, old, adv, beta=0.0)
    hi = grpo_objective([seq([math.log(1.2 + 1e-9)]), seq([0.0])], old, old, adv, beta=0.0)
    assert lo == pytest.approx(hi, abs=1e-6)
    # Past the boundary the surrogate saturates for positive advantage.
    far = grpo_objective([seq([math.log(5.0)]), seq([0.0])], old, old, adv, beta=0.0)
    assert far == pytest.approx(hi, abs=1e-6)
    assert abs(far - (-(1 + eps) / 2 - (-1.0) / 2)) < 1e-9


def test_kl_penalty_is_nonnegative_and_zero_only_at_equality():
    rng = random.Random(9)
    for _ in range(100):
        n = rng.randint(1, 8)
        mask = [1] * n
        a = seq([rng.uniform(-3, 0) for _ in range(n)], mask)
        b = seq([rng.uniform(-3, 0) for _ in range(n)], mask)
        with_kl = grpo_objective([a, a], [a, a], [b, b], [0.0, 0.0], beta=1.0)
        assert with_kl >= -1e-12
        at_equality = grpo_objective([a, a], [a, a], [a, a], [0.0, 0.0], beta=1.0)
        assert at_equality == 0.0


def test_token_ratio_mode_differs_but_agrees_on_single_token():
    new = [seq([math.log(2.0)]), seq([0.0])]
    old = [seq([0.0]), seq([0.0])]
    adv = [1.0, -1.0]
    a = grpo_objective(new, old, old, adv, beta=0.0)
    b = grpo_objective(new, old, old, adv, beta=0.0, ratio_mode=RATIO_TOKEN)
    assert a == pytest.approx(b)
    with pytest.raises(ValueError):
        grpo_objective(new, old, old, adv, ratio_mode="word")


def test_mask_mismatch_rejected():
    a = seq([-1.0, -2.0], [1, 0])
    b = seq([-1.0, -2.0], [0, 1])
    with pytest.raises(ValueError):
        grpo_objective([a, a], [b, a], [a, a], [0.0, 0.0])
    short = seq([-1.0])
    with pytest.raises(ValueError):
        grpo_objective([a, a], [short, a], [a, a], [0.0, 0.0])


def test_sft_loss_known_value():
    # Two segments of one masked token each, both at probability 1/2.
    r = seq([math.log(0.5)])
    a = seq([math.log(0.5)])
    assert sft_loss(r, a) == pytest.approx(math.log(2.0))
    assert sft_loss(r, a, normalize=False) == pytest.approx(2 * math.log(2.0))


def test_sft_loss_additivity_and_masking():
    r = seq([-1.0, -2.0, -99.0], [1, 1, 0])
    a = seq([-3.0, -88.0], [1, 0])
    assert sft_loss(r, a, normalize=False) == pytest.approx(6.0)
    assert sft_loss(r, a) == pytest.approx(2.0)


def test_sft_loss_empty_mask_is_zero():
    r = seq([-1.0], [0])
    a = seq([-1.0], [0])
    assert sft_loss(r, a) == 0.0


def test_sft_loss_matches_naive_loop():
    rng = random.Random(13)
    for _ in range(100):
        n, m = rng.randint(1, 10), rng.randint(1, 10)
        rv = [rng.uniform(-4, 0) for _ in range(n)]
        rm = [rng.randint(0, 1) for _ in range(n)]
        av = [rng.uniform(-4, 0) for _ in range(m)]
        am = [rng.randint(0, 1) for _ in range(m)]
        total = -sum(v for v, k in zip(rv, rm) if k) - sum(v for v, k in zip(av, am) if k)
        count = sum(rm) + sum(am)
        want = total / count if count else 0.0
        assert sft_loss(seq(rv, rm), seq(av, am)) == pytest.approx(want)
