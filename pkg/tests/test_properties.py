import json

import numpy as np
from hypothesis import given, settings, strategies as st

from flashest.binning import (
    BinBoundaries,
    Histogram,
    equal_probability_bins,
    measure_histogram,
    merged_bin_count,
)
from flashest.channel_model import (
    ChannelParams,
    LevelLayout,
    bin_probability,
    conditional_pdf,
    level_noise,
)
from flashest.estimation import CostContext, cost, residual_vector

FAST = settings(max_examples=60, deadline=None)


@st.composite
def channel_params(draw):
    sigma_p = draw(st.floats(0.01, 0.2))
    return ChannelParams(
        lam=draw(st.floats(1e-4, 0.3)),
        sigma_p=sigma_p,
        sigma_e=draw(st.floats(sigma_p, 0.6)),
        gamma_sigma_r=draw(st.floats(0.0, 0.1)),
        gamma_mu_r=draw(st.floats(-0.8, 0.0)),
    )


@st.composite
def layouts(draw):
    n = draw(st.integers(1, 5))
    gaps = draw(st.lists(st.floats(0.3, 2.0), min_size=n - 1, max_size=n - 1))
    levels = tuple(np.concatenate(([0.0], np.cumsum(gaps))).tolist())
    counts = tuple(draw(st.lists(st.integers(1, 1000), min_size=n, max_size=n)))
    return LevelLayout(levels, counts)


ordered_triples = st.lists(st.floats(-3.0, 6.0), min_size=3, max_size=3, unique=True).map(sorted)


@FAST
@given(channel_params(), layouts(), ordered_triples, st.data())
def test_bin_probability_is_additive_and_bounded(params, layout, abc, data):
    k = data.draw(st.integers(0, len(layout.levels) - 1))
    a, b, c = abc
    pab = bin_probability(params, layout, k, a, b)
    pbc = bin_probability(params, layout, k, b, c)
    assert 0.0 <= pab <= 1.0 and 0.0 <= pbc <= 1.0
    assert abs(pab + pbc - bin_probability(params, layout, k, a, c)) <= 1e-12


@FAST
@given(channel_params(), st.floats(0.0, 4.0), st.floats(-50.0, 50.0))
def test_pdf_finite_and_non_negative(params, x, z):
    spec = level_noise(params, x, 0.0)
    v = float(conditional_pdf(params, x, 0.0, x + spec.mu_r + z * spec.sigma))
    assert np.isfinite(v) and v >= 0.0
    assert spec.sigma >= min(params.sigma_p, params.sigma_e)


@settings(max_examples=25, deadline=None)
@given(channel_params(), layouts(), st.integers(2, 12))
def test_equal_probability_cuts_increase(params, layout, M):
    cuts = equal_probability_bins(params, layout, M).cuts
    assert len(cuts) == M - 1
    assert all(b > a for a, b in zip(cuts, cuts[1:]))


@FAST
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=30), st.floats(1e-6, 0.5))
def test_merged_bin_count_bounds(probs, threshold):
    n = merged_bin_count(probs, threshold)
    assert 1 <= n <= len(probs)
    if all(p >= threshold for p in probs):
        assert n == len(probs)


@FAST
@given(
    st.lists(st.floats(-10, 10), max_size=200),
    st.lists(st.floats(-5, 5), min_size=1, max_size=12, unique=True),
)
def test_histogram_partitions_samples(samples, cuts):
    bins = BinBoundaries(tuple(sorted(cuts)))
    hist = measure_histogram(samples, bins)
    assert hist.M == bins.M and hist.total == len(samples)
    assert BinBoundaries.from_dict(json.loads(json.dumps(bins.to_dict()))) == bins


@settings(max_examples=30, deadline=None)
@given(channel_params(), channel_params())
def test_cost_is_residual_norm_and_residual_sums_to_zero(truth, guess):
    layout = LevelLayout.default(cells=10_000)
    bins = equal_probability_bins(truth, layout, 6)
    counts = measure_histogram(np.linspace(-2, 5, 10_000), bins).counts
    ctx = CostContext(Histogram(counts), bins, layout)
    g = residual_vector(guess, ctx)
    assert cost(guess, ctx) == float(g @ g)
    assert abs(g.sum()) < 1e-12


@FAST
@given(channel_params())
def test_params_dict_round_trip(params):
    assert ChannelParams.from_dict(json.loads(json.dumps(params.to_dict()))) == params
