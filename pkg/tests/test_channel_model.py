import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uwnetloc.channel_model import (
    D_MIN,
    ChannelModel,
    GainSample,
    estimate_distance,
    estimate_noise_variance,
    fit_linear_model,
    gain_at,
    sample_distance,
    sample_gain,
)
from uwnetloc.errors import DegenerateFit, InvalidDistance

A, B = -8.5, -54.85


def normal_equations(d, g):
    """Closed-form 2x2 normal-equations solve, independent of the fit code."""
    n = len(d)
    sd, sg = sum(d), sum(g)
    sdd = sum(x * x for x in d)
    sdg = sum(x * y for x, y in zip(d, g))
    det = n * sdd - sd * sd
    a = (n * sdg - sd * sg) / det
    b = (sdd * sg - sd * sdg) / det
    return a, b


def test_noiseless_line_recovered():
    samples = [GainSample(d, A * d + B) for d in (1.0, 2.0, 3.0)]
    m = fit_linear_model(samples)
    assert m.slope_a == pytest.approx(A, abs=1e-9)
    assert m.intercept_b == pytest.approx(B, abs=1e-9)
    assert m.noise_var == pytest.approx(0.0, abs=1e-18)


def test_noisy_fit_matches_normal_equations():
    rng = np.random.default_rng(3)
    d = rng.uniform(0.5, 10, 50)
    g = A * d + B + rng.normal(0, 1.1, 50)
    m = fit_linear_model([GainSample(x, y) for x, y in zip(d, g)])
    a, b = normal_equations(d.tolist(), g.tolist())
    assert m.slope_a == pytest.approx(a, abs=1e-9)
    assert m.intercept_b == pytest.approx(b, abs=1e-9)


def test_degenerate_fit():
    with pytest.raises(DegenerateFit):
        fit_linear_model([GainSample(2.0, -70), GainSample(2.0, -71)])
    with pytest.raises(DegenerateFit):
        fit_linear_model([GainSample(2.0, -70)])


def test_noise_variance_hand_values():
    m = ChannelModel(A, B, 0.0)
    on_line = [GainSample(d, A * d + B) for d in (1.0, 4.0)]
    assert estimate_noise_variance(on_line, m) == 0.0
    off = [GainSample(1.0, A + B + 1.0), GainSample(2.0, 2 * A + B - 1.0)]
    assert estimate_noise_variance(off, m) == pytest.approx(1.0, abs=1e-12)


def test_default_constants():
    m = ChannelModel()
    assert (m.slope_a, m.intercept_b, m.noise_var) == (-8.5, -54.85, 1.15)


@pytest.mark.parametrize("d, expected", [(2.0, -71.85), (10.0, -139.85)])
def test_gain_at(d, expected):
    assert gain_at(ChannelModel(A, B, 0), d) == pytest.approx(expected, abs=1e-12)


def test_gain_at_near_zero_is_intercept():
    assert gain_at(ChannelModel(A, B, 0), 1e-12) == pytest.approx(B, abs=1e-9)


def test_gain_at_rejects_nonpositive():
    with pytest.raises(InvalidDistance):
        gain_at(ChannelModel(), 0.0)


def test_estimate_distance_examples():
    m = ChannelModel(A, B, 0)
    assert estimate_distance(m, 20.0, 20.0 + gain_at(m, 5.0)) == pytest.approx(5.0, abs=1e-12)
    assert estimate_distance(m, 20.0, 20.0 + B) == pytest.approx(0.0, abs=1e-12)
    assert estimate_distance(m, 20.0, -94.35) == pytest.approx(7.0, abs=1e-12)


def test_sample_gain():
    m0 = ChannelModel(A, B, 0.0)
    rng = np.random.default_rng(0)
    assert sample_gain(m0, 3.0, rng) == gain_at(m0, 3.0)
    m = ChannelModel(A, B, 1.15)
    draws = sample_gain(m, np.full(100_000, 4.0), np.random.default_rng(1))
    assert np.var(draws) == pytest.approx(1.15, abs=0.05)
    again = sample_gain(m, np.full(100_000, 4.0), np.random.default_rng(1))
    assert np.array_equal(draws, again)


def test_sample_distance():
    rng = np.random.default_rng(0)
    assert sample_distance(3.0, 0.0, rng) == 3.0
    draws = sample_distance(np.full(100_000, 20.0), 0.63, np.random.default_rng(2))
    assert np.std(draws) == pytest.approx(0.63, abs=0.02)
    assert sample_distance(0.1, 1000.0, np.random.default_rng(5)) >= D_MIN
    clamped = sample_distance(np.full(1000, 0.1), 1000.0, np.random.default_rng(5))
    assert clamped.min() == D_MIN


@settings(max_examples=200, deadline=None)
@given(
    a=st.floats(-20, -0.5),
    b=st.floats(-100, -10),
    d=st.floats(0.01, 50),
    p=st.floats(-10, 30),
)
def test_round_trip(a, b, d, p):
    m = ChannelModel(a, b, 0.0)
    assert estimate_distance(m, p, p + gain_at(m, d)) == pytest.approx(d, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31), shift=st.floats(-50, 50))
def test_fit_shift_consistent(seed, shift):
    rng = np.random.default_rng(seed)
    d = rng.uniform(0.5, 10, 20)
    g = A * d + B + rng.normal(0, 1, 20)
    m1 = fit_linear_model([GainSample(x, y) for x, y in zip(d, g)])
    m2 = fit_linear_model([GainSample(x, y + shift) for x, y in zip(d, g)])
    assert m2.slope_a == pytest.approx(m1.slope_a, abs=1e-9)
    assert m2.intercept_b == pytest.approx(m1.intercept_b + shift, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_fit_is_least_squares_optimal(seed):
    rng = np.random.default_rng(seed)
    d = rng.uniform(0.5, 10, 15)
    g = A * d + B + rng.normal(0, 1, 15)
    samples = [GainSample(x, y) for x, y in zip(d, g)]
    best = fit_linear_model(samples)
    v = estimate_noise_variance(samples, best)
    for da, db in rng.normal(0, 0.5, (20, 2)):
        other = ChannelModel(best.slope_a + da, best.intercept_b + db, 0.0)
        assert v <= estimate_noise_variance(samples, other) + 1e-12
