"""Group-relative advantage normalization, clipped policy objective, and the
supervised distillation loss.

Everything here is plain numeric work over caller-supplied per-token log
probabilities; no autodiff or parameters. The clip range and KL coefficient
defaults (0.2 and 0.04) are conventional choices, configurable because no
single canonical value exists.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

DEFAULT_GROUP_SIZE = 4
DEFAULT_EPSILON_CLIP = 0.2
DEFAULT_KL_BETA = 0.04
STD_FLOOR = 1e-8

RATIO_SEQUENCE = "sequence"
RATIO_TOKEN = "token"

# math.exp overflows past ~709.78; treat anything larger as infinite.
_EXP_MAX = 709.0


def _safe_exp(x: float) -> float:
    return math.exp(x) if x < _EXP_MAX else math.inf


@dataclass(frozen=True)
class TokenLogProbs:
    """Per-token log-probabilities with a 0/1 inclusion mask."""

    values: tuple[float, ...]
    mask: tuple[int, ...]

    def __init__(self, values: Sequence[float], mask: Sequence[int]):
        values = tuple(float(v) for v in values)
        mask = tuple(int(m) for m in mask)
        if len(values) != len(mask):
            raise ValueError(f"values ({len(values)}) and mask ({len(mask)}) lengths differ")
        for m in mask:
            if m not in (0, 1):
                raise ValueError(f"mask entries must be 0 or 1, got {m}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)

    def masked_values(self) -> list[float]:
        return [v for v, m in zip(self.values, self.mask) if m]

    def masked_sum(self) -> float:
        return sum(self.masked_values())

    def masked_count(self) -> int:
        return sum(self.mask)


def group_advantages(rewards: Sequence[float]) -> list[float]:
    """Rewards centered and scaled within their group.

    Uses the population standard deviation; a near-constant group (std below
    1e-8) yields all-zero advantages instead of amplified noise.
    """
    g = len(rewards)
    if g < 2:
        raise ValueError(f"need at least 2 rewards in a group, got {g}")
    values = [float(r) for r in rewards]
    for r in values:
        if not math.isfinite(r):
            raise ValueError(f"non-finite reward {r!r}")
    mean = sum(values) / g
    variance = sum((r - mean) ** 2 for r in values) / g
    std = math.sqrt(variance)
    if std < STD_FLOOR:
        return [0.0] * g
    return [(r - mean) / std for r in values]


def _check_aligned(new: TokenLogProbs, old: TokenLogProbs, ref: TokenLogProbs, index: int) -> None:
    if not (len(new.values) == len(old.values) == len(ref.values)):
        raise ValueError(f"sample {index}: sequence lengths differ")
    if not (new.mask == old.mask == ref.mask):
        raise ValueError(f"sample {index}: masks differ across policies")
    for name, seq in (("new", new), ("old", old), ("ref", ref)):
        for v in seq.masked_values():
            if not math.isfinite(v):
                raise ValueError(f"sample {index}: non-finite {name} log-prob {v!r}")


def _clipped_surrogate(log_ratio: float, advantage: float, epsilon_clip: float) -> float:
    if advantage == 0.0:
        return 0.0
    s1 = _safe_exp(log_ratio)
    s2 = min(max(s1, 1.0 - epsilon_clip), 1.0 + epsilon_clip)
    return min(s1 * advantage, s2 * advantage)


def _kl_penalty(new: TokenLogProbs, ref: TokenLogProbs) -> float:
    """Non-negative per-sample KL estimate, averaged over masked tokens."""
    total = 0.0
    count = 0
    for v_new, v_ref, m in zip(new.values, ref.values, new.mask):
        if not m:
            continue
        diff = v_ref - v_new
        total += _safe_exp(diff) - diff - 1.0
        count += 1
    return total / count if count else 0.0


def grpo_objective(
    new: Sequence[TokenLogProbs],
    old: Sequence[TokenLogProbs],
    ref: Sequence[TokenLogProbs],
    advantages: Sequence[float],
    epsilon_clip: float = DEFAULT_EPSILON_CLIP,
    beta: float = DEFAULT_KL_BETA,
    ratio_mode: str = RATIO_SEQUENCE,
) -> float:
    """Negative clipped-surrogate objective with KL penalty, averaged over the group.

    The probability ratio is taken at the sequence level by default (summed
    masked log-ratio per sample); ratio_mode="token" switches to per-token
    ratios averaged over masked positions.
    """
    if ratio_mode not in (RATIO_SEQUENCE, RATIO_TOKEN):
        raise ValueError(f"unknown ratio_mode {ratio_mode!r}")
    g = len(new)
    if not (g == len(old) == len(ref) == len(advantages)):
        raise ValueError("new, old, ref, and advantages must have equal group size")
    if g == 0:
        raise ValueError("empty group")
    if not epsilon_clip >= 0.0:
        raise ValueError(f"epsilon_clip must be non-negative, got {epsilon_clip!r}")

    total = 0.0
    for index, (seq_new, seq_old, seq_ref, adv) in enumerate(zip(new, old, ref, advantages)):
        if not math.isfinite(adv):
            raise ValueError(f"sample {index}: non-finite advantage {adv!r}")
        _check_aligned(seq_new, seq_old, seq_ref, index)
        if ratio_mode == RATIO_SEQUENCE:
            log_ratio = seq_new.masked_sum() - seq_old.masked_sum()
            surrogate = _clipped_surrogate(log_ratio, adv, epsilon_clip)
        else:
            parts = []
            for v_new, v_old, m in zip(seq_new.values, seq_old.values, seq_new.mask):
                if not m:
                    continue
                parts.append(_clipped_surrogate(v_new - v_old, adv, epsilon_clip))
            surrogate = sum(parts) / len(parts) if parts else 0.0
        total += surrogate - beta * _kl_penalty(seq_new, seq_ref)
    return -total / g


def sft_loss(reasoning: TokenLogProbs, answer: TokenLogProbs, normalize: bool = True) -> float:
    """Negative log-likelihood of the reasoning and answer segments.

    By default the summed loss is divided by the total masked token count;
    normalize=False returns the raw sum. Zero masked tokens yield 0.
    """
    total = -(reasoning.masked_sum() + answer.masked_sum())
    if not normalize:
        return total
    count = reasoning.masked_count() + answer.masked_count()
    return total / count if count else 0.0
