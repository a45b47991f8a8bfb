import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nctrunc import seq
from nctrunc.errors import InvalidArgument


def alternating(n):
    return np.tile([1.0, 0.0], n // 2 + 1)[:n]


# ---------------------------------------------------------------- cesaro


def test_cesaro_constant_fixed():
    assert np.array_equal(seq.cesaro(np.ones(50)), np.ones(50))


def test_cesaro_alternating_at_999():
    # partial sum of 1,0,1,0,... up to index 999 is 500
    assert seq.cesaro(alternating(1000))[999] == 0.5


def test_cesaro_single():
    assert seq.cesaro([7.0]).tolist() == [7.0]


@pytest.mark.parametrize("fn", [seq.cesaro, seq.log_mean, seq.log_mean_tail])
def test_rejects_empty_and_nonfinite(fn):
    with pytest.raises(InvalidArgument):
        fn([])
    with pytest.raises(InvalidArgument):
        fn([1.0, math.nan])
    with pytest.raises(InvalidArgument):
        fn(np.ones((2, 2)))


# ---------------------------------------------------------------- log mean


def test_log_mean_of_ones_is_harmonic_ratio():
    n = 10_000
    out = seq.log_mean(np.ones(n + 1))
    harmonic = math.fsum(1.0 / k for k in range(1, n + 2))
    assert out[n] == pytest.approx(harmonic / math.log(n + 2), rel=1e-13)
    assert abs(out[n] - 1.0) < 0.08


def test_log_mean_zero():
    assert not np.any(seq.log_mean(np.zeros(10)))


def test_log_mean_alternating_raw_bias():
    # split even/odd harmonic sums: raw mean is (H_even part)/log, biased by
    # log(2)/2 / log(n+2) above 1/2
    n = 10_000
    raw = seq.log_mean(alternating(n + 1))[n]
    even = math.fsum(1.0 / (k + 1) for k in range(0, n + 1, 2))
    assert raw == pytest.approx(even / math.log(n + 2), rel=1e-13)
    assert abs(raw - 0.5) > 0.05
    # the normalised tail mean removes the head bias
    assert abs(seq.log_mean_tail(alternating(n + 1))[n] - 0.5) < 0.05


def test_log_mean_tail_window_none_is_normalised_log_mean():
    x = np.random.default_rng(1).uniform(-1, 1, 500)
    k = np.arange(500)
    ref = np.cumsum(x / (k + 1)) / np.cumsum(1.0 / (k + 1))
    assert np.allclose(seq.log_mean_tail(x, "none"), ref, rtol=0, atol=1e-13)


def test_window_starts():
    s = seq.window_starts(10_001, "sqrt")
    assert s[0] == 0 and s[3] == 1 and s[8] == 2 and s[10_000] == 99
    assert seq.window_starts(5, "none").tolist() == [0] * 5
    with pytest.raises(InvalidArgument):
        seq.window_starts(5, "bogus")
    with pytest.raises(InvalidArgument):
        seq.window_starts(5, 1.5)


# ---------------------------------------------------------------- gap


def test_gap_alternating_decays():
    x = alternating(10_001)
    assert seq.log_cesaro_gap(x, 1000) > seq.log_cesaro_gap(x, 10_000)


def test_gap_constant_is_zero():
    x = np.full(2000, 3.25)
    for n in (0, 10, 1999):
        assert seq.log_cesaro_gap(x, n) <= 1e-12 * (n + 1)


def test_gap_signed_sequence():
    k = np.arange(10_001.0)
    x = (-1.0) ** k * k / (k + 1)
    assert seq.log_cesaro_gap(x, 10_000) < 0.05


def test_gap_index_out_of_range():
    with pytest.raises(InvalidArgument):
        seq.log_cesaro_gap(np.ones(5), 5)


# ---------------------------------------------------------------- surrogate


def test_surrogate_convergent():
    n = np.arange(10_001)
    sur = seq.omega_surrogate(1.0 / (n + 1) + 3.0, [1000, 5000, 10_000])
    assert sur.value == pytest.approx(3.0, abs=1e-3)
    assert sur.measurable and sur.drift >= 0


def test_surrogate_oscillating_raw():
    sur = seq.omega_surrogate(alternating(10_001), [1000, 1001, 10_000])
    assert sur.drift == 1.0 and not sur.measurable


def test_surrogate_errors():
    with pytest.raises(InvalidArgument):
        seq.omega_surrogate(np.ones(10), [])
    with pytest.raises(InvalidArgument):
        seq.omega_surrogate(np.ones(10), [5, 3])
    with pytest.raises(InvalidArgument):
        seq.omega_surrogate(np.ones(10), [10])


def test_surrogate_circle_cos_diagonal(circle):
    diag = circle.mult([1, 0, 1]).diagonal(10_001)
    sur = seq.omega_surrogate(seq.log_mean_tail(diag), [1000, 10_000])
    assert abs(sur.value) < 1e-2 and sur.measurable


def test_abel_mean_constant():
    assert seq.abel_mean(np.ones(5000), 0.9) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(InvalidArgument):
        seq.abel_mean(np.ones(3), 1.0)


def test_shift_right():
    assert seq.shift_right([1.0, 2.0, 3.0]).tolist() == [0.0, 1.0, 2.0]


# ---------------------------------------------------------------- resampling


def test_resample_constant_even_checkpoints():
    n = 2001
    res = seq.resample_on_checkpoints(np.ones(n), lambda m: m + 1, np.arange(0, n, 2))
    assert res.difference <= 2.0 / (n - 1)


def test_resample_circle_cos(circle):
    diag = circle.mult([1, 0, 1]).diagonal(2001).real
    ks = [circle.counting(lam) - 1 for lam in range(1, 1001)]
    res = seq.resample_on_checkpoints(diag, lambda m: m + 1, ks)
    assert res.difference < 0.01


def test_resample_zero():
    res = seq.resample_on_checkpoints(np.zeros(100), lambda m: m + 1, [10, 50, 99])
    assert res.difference == 0.0


def test_resample_rejects_bad_checkpoints():
    with pytest.raises(InvalidArgument):
        seq.resample_on_checkpoints(np.ones(10), lambda m: m + 1, [3, 3, 5])
    with pytest.raises(InvalidArgument):
        seq.resample_on_checkpoints(np.ones(10), lambda m: 5 - m, [3, 5])


# ---------------------------------------------------------------- properties


@settings(max_examples=100, deadline=None, derandomize=True)
@given(
    seed=st.integers(0, 2**32 - 1),
    c=st.floats(-5, 5),
    a=st.floats(0.01, 3.0),
    p=st.floats(0.2, 2.0),
)
def test_regularity(seed, c, a, p):
    """Convergent x: transforms sit within the transformed tail majorant."""
    n = 10_001
    k = np.arange(n, dtype=np.float64)
    tail = a * (k + 1.0) ** (-p)
    signs = np.random.default_rng(seed).uniform(-1, 1, n)
    x = c + signs * tail
    for transform in (seq.cesaro, seq.log_mean_tail):
        bound = transform(tail)[-1]
        err = abs(transform(x)[-1] - c)
        assert err <= 10 * bound + 1e-12 * (abs(c) + 1)


@settings(max_examples=100, deadline=None, derandomize=True)
@given(c=st.floats(-1e6, 1e6), n=st.integers(1, 3000))
def test_fixed_points(c, n):
    x = np.full(n, c)
    idx = np.arange(n)
    tol = 1e-12 * (idx + 1) * max(abs(c), 1.0)
    assert np.all(np.abs(seq.cesaro(x) - c) <= tol)
    assert np.all(np.abs(seq.log_mean_tail(x) - c) <= tol)


def test_log_to_cesaro_random_bounded():
    gaps_lo, gaps_hi = [], []
    for s in range(100):
        x = np.random.default_rng(s).uniform(-1, 1, 10_001)
        gaps_lo.append(seq.log_cesaro_gap(x, 100))
        gaps_hi.append(seq.log_cesaro_gap(x, 10_000))
    decayed = sum(h <= lo for lo, h in zip(gaps_lo, gaps_hi))
    assert decayed >= 95
    assert np.median(gaps_hi) < np.median(gaps_lo)


@settings(max_examples=100, deadline=None, derandomize=True)
@given(
    seed=st.integers(0, 2**32 - 1),
    gaps=st.lists(st.integers(1, 40), min_size=5, max_size=60),
)
def test_resampling_bounded_by_hypotheses(seed, gaps):
    ks = np.cumsum(gaps)
    a = np.random.default_rng(seed).uniform(-1, 1, int(ks[-1]) + 1)
    res = seq.resample_on_checkpoints(a, lambda m: m + 1.0, ks)
    half = seq.top_half(int(ks[-1]) + 1)
    bound = res.block_defect + res.ratio_defect * np.max(np.abs(res.direct[half]))
    assert res.difference <= bound + 1e-12


def test_resampling_shrinks_when_hypotheses_hold():
    rng = np.random.default_rng(7)
    diffs = []
    for n in (1000, 10_000, 100_000):
        a = rng.uniform(-1, 1, n + 1)
        ks = np.arange(0, n + 1, 5)
        res = seq.resample_on_checkpoints(a, lambda m: m + 1.0, ks)
        assert res.hypotheses_hold
        diffs.append(res.difference)
    assert diffs[0] > diffs[1] > diffs[2]


def test_transforms_deterministic():
    x = np.random.default_rng(3).normal(size=50_000)
    assert np.array_equal(seq.log_mean_tail(x), seq.log_mean_tail(x.copy()))
    assert np.array_equal(seq.cesaro(x), seq.cesaro(x.copy()))
