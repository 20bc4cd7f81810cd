"""Recompute the frozen reference numbers with arbitrary precision."""

import mpmath as mp
import pytest

from oracle_values import COTH_SQRT2_OVER_4, GAMMA_REF, S_AT_COTH_1, S_FREE_REF

mp.mp.dps = 40


def mp_entropy(delta):
    a, b = (delta + 1) / 2, (delta - 1) / 2
    return a * mp.log(a) - (b * mp.log(b) if b > 0 else 0)


def mp_decay_rate(m, h, beta, k):
    w = mp.sqrt(k * k + m * m)
    log_term = mp.log((1 - mp.exp(-beta * (w + k) / 2)) / (1 - mp.exp(-beta * (w - k) / 2)))
    return h**2 / (32 * mp.pi * w) + h**2 / (16 * mp.pi * k * beta * w) * log_term


@pytest.mark.parametrize(
    "frozen, exact",
    [
        (S_AT_COTH_1, lambda: mp_entropy(mp.coth(1))),
        (COTH_SQRT2_OVER_4, lambda: mp.coth(mp.sqrt(2) / 4)),
        (S_FREE_REF, lambda: mp_entropy(mp.coth(mp.sqrt(2) / 4))),
        (GAMMA_REF, lambda: mp_decay_rate(1, 3, mp.mpf(1) / 2, 1)),
    ],
)
def test_frozen_value_matches_high_precision(frozen, exact):
    assert abs(frozen - float(exact())) < 1e-15
