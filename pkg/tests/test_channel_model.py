import json
import math

import numpy as np
import pytest
from scipy import integrate, stats

from flashest.channel_model import (
    ChannelParams,
    LevelLayout,
    bin_probability,
    conditional_cdf,
    conditional_pdf,
    emg_pdf,
    level_noise,
    load_config,
    mixture_cdf,
    mixture_pdf,
    mixture_quantile,
    sample_reads,
    save_config,
)

from oracles import convolved_pdf

TRUTH = ChannelParams(lam=0.0099, sigma_p=0.05, sigma_e=0.35, gamma_sigma_r=0.0617, gamma_mu_r=-0.5882)


def random_params(rng):
    sigma_p = rng.uniform(0.01, 0.2)
    return ChannelParams(
        lam=rng.uniform(1e-3, 0.3),
        sigma_p=sigma_p,
        sigma_e=rng.uniform(sigma_p, 0.6),
        gamma_sigma_r=rng.uniform(0.0, 0.1),
        gamma_mu_r=rng.uniform(-0.8, 0.0),
    )


# ---------------------------------------------------------------------------
# parameter and layout validation
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "field,value",
    [("lam", 0.0), ("lam", -1.0), ("sigma_p", 0.0), ("sigma_e", -0.1), ("gamma_sigma_r", -1e-3),
     ("lam", math.nan), ("gamma_mu_r", math.inf)],
)
def test_invalid_params_rejected(field, value):
    values = TRUTH.to_dict()
    key = "lambda" if field == "lam" else field
    values[key] = value
    with pytest.raises(ValueError):
        ChannelParams.from_dict(values)


def test_soft_violations_warn_but_construct():
    p = ChannelParams(lam=0.01, sigma_p=0.4, sigma_e=0.3, gamma_sigma_r=0.05, gamma_mu_r=0.2)
    assert len(p.soft_violations()) == 2
    with pytest.warns(UserWarning):
        p.warn_if_implausible()
    assert TRUTH.soft_violations() == []


def test_layout_validation():
    with pytest.raises(ValueError):
        LevelLayout((1.0, 0.0), (1, 1))
    with pytest.raises(ValueError):
        LevelLayout((0.0, 1.0), (1,))
    with pytest.raises(ValueError):
        LevelLayout((0.0,), (-1,))
    layout = LevelLayout.default(cells=10, levels=(0.0, 1.0, 2.0))
    assert layout.counts == (4, 3, 3) and layout.total == 10 and layout.x0 == 0.0


def test_config_round_trip(tmp_path):
    path = tmp_path / "channel.json"
    layout = LevelLayout((0.0, 1.5), (7, 9))
    save_config(path, TRUTH, layout)
    data = json.loads(path.read_text())
    assert set(data) == {"lambda", "sigma_p", "sigma_e", "gamma_sigma_r", "gamma_mu_r", "levels", "counts"}
    assert load_config(path) == (TRUTH, layout)


# ---------------------------------------------------------------------------
# level_noise
# ---------------------------------------------------------------------------


def test_level_noise_erased_state_is_exact():
    spec = level_noise(TRUTH, 0.7, 0.7)
    assert spec.mu_r == 0.0 and spec.sigma_r == 0.0
    assert spec.sigma == TRUTH.sigma_e


def test_level_noise_unit_spacing_reference_values():
    spec = level_noise(TRUTH, 1.0, 0.0)
    assert spec.mu_r == pytest.approx(-0.5882, abs=1e-15)
    assert spec.sigma_r == pytest.approx(0.0617, abs=1e-15)
    assert spec.sigma == pytest.approx(math.hypot(0.05, 0.0617), rel=1e-15)


def test_level_noise_direct_evaluation():
    p = ChannelParams(lam=0.01, sigma_p=0.05, sigma_e=0.3, gamma_sigma_r=0.04, gamma_mu_r=-0.5)
    spec = level_noise(p, 4.0, 0.0)
    assert spec.mu_r == pytest.approx(-2.0, abs=1e-15)
    assert spec.sigma_r == pytest.approx(0.08, abs=1e-15)


def test_level_noise_rejects_x_below_x0():
    with pytest.raises(ValueError):
        level_noise(TRUTH, -0.1, 0.0)


def test_level_noise_sigma_lower_bound():
    rng = np.random.default_rng(1)
    for _ in range(200):
        p = random_params(rng)
        x = rng.uniform(0, 4)
        assert level_noise(p, x, 0.0).sigma >= min(p.sigma_p, p.sigma_e)


# ---------------------------------------------------------------------------
# conditional density
# ---------------------------------------------------------------------------


def test_matches_scipy_exponnorm():
    rng = np.random.default_rng(2)
    for _ in range(50):
        p = random_params(rng)
        x = rng.uniform(0.1, 3)
        spec = level_noise(p, x, 0.0)
        loc = x + spec.mu_r
        y = loc + rng.uniform(-5, 5, size=20) * spec.sigma
        ref = stats.exponnorm.pdf(y, p.lam / spec.sigma, loc=loc, scale=spec.sigma)
        np.testing.assert_allclose(conditional_pdf(p, x, 0.0, y), ref, rtol=1e-9)


@pytest.mark.parametrize("x", [0.0, 1.0, 3.0])
def test_conditional_pdf_matches_convolution_oracle(x):
    spec = level_noise(TRUTH, x, 0.0)
    loc = x + spec.mu_r
    y = np.linspace(loc - 8 * spec.sigma, loc + 8 * spec.sigma + 8 * TRUTH.lam, 41)
    got = conditional_pdf(TRUTH, x, 0.0, y)
    want = np.array([convolved_pdf(TRUTH.lam, loc, spec.sigma, v) for v in y])
    assert np.max(np.abs(got / want - 1)) < 1e-5


def test_erased_state_point_value_matches_oracle():
    got = float(conditional_pdf(TRUTH, 0.0, 0.0, 0.0))
    want = convolved_pdf(TRUTH.lam, 0.0, TRUTH.sigma_e, 0.0)
    assert got == pytest.approx(want, rel=1e-6)


def test_normalization_by_quadrature():
    f = lambda y: float(conditional_pdf(TRUTH, 2.0, 0.0, y))
    total, _ = integrate.quad(f, -np.inf, np.inf, points=None, limit=200)
    assert total == pytest.approx(1.0, abs=1e-9)


def test_moments():
    x = 2.0
    spec = level_noise(TRUTH, x, 0.0)
    f = lambda y, k: y**k * float(conditional_pdf(TRUTH, x, 0.0, y))
    lo, hi = x + spec.mu_r - 30 * spec.sigma, x + spec.mu_r + 30 * spec.sigma + 60 * TRUTH.lam
    mean = integrate.quad(f, lo, hi, args=(1,), epsabs=1e-13, limit=200)[0]
    second = integrate.quad(f, lo, hi, args=(2,), epsabs=1e-13, limit=200)[0]
    assert mean == pytest.approx(x + spec.mu_r + TRUTH.lam, abs=1e-9)
    assert second - mean**2 == pytest.approx(spec.sigma**2 + TRUTH.lam**2, rel=1e-7)


def test_stable_fifty_sigma_into_tails():
    p = ChannelParams(lam=1e-4, sigma_p=0.05, sigma_e=0.35, gamma_sigma_r=0.0617, gamma_mu_r=-0.5882)
    for params in (p, TRUTH):
        for x in (0.0, 1.0, 3.0):
            spec = level_noise(params, x, 0.0)
            loc = x + spec.mu_r
            y = loc + np.linspace(-50, 50, 2001) * spec.sigma
            v = conditional_pdf(params, x, 0.0, y)
            assert np.all(np.isfinite(v)) and np.all(v >= 0)
            c = conditional_cdf(params, x, 0.0, y)
            assert np.all(np.isfinite(c)) and np.all((c >= 0) & (c <= 1))
            assert np.all(np.diff(c) >= -1e-15)


def test_tiny_lambda_reduces_to_gaussian():
    spec = level_noise(TRUTH, 0.0, 0.0)
    y = np.linspace(-2, 2, 101)
    v = emg_pdf(y, 0.0, spec.sigma, 1e-12)
    np.testing.assert_allclose(v, stats.norm.pdf(y, scale=spec.sigma), rtol=1e-8, atol=1e-300)


# ---------------------------------------------------------------------------
# bin probabilities
# ---------------------------------------------------------------------------


def test_bin_probability_full_line_is_one():
    layout = LevelLayout.default()
    for k in range(4):
        assert bin_probability(TRUTH, layout, k, -np.inf, np.inf) == pytest.approx(1.0, abs=1e-15)


def test_bin_probability_partition_sums_to_one():
    layout = LevelLayout.default()
    edges = np.concatenate(([-np.inf], np.linspace(-1, 4, 17), [np.inf]))
    for k in range(4):
        total = sum(bin_probability(TRUTH, layout, k, a, b) for a, b in zip(edges, edges[1:]))
        assert total == pytest.approx(1.0, abs=1e-9)


def test_bin_probability_gaussian_limit():
    sigma = TRUTH.sigma_e
    p = ChannelParams(lam=1e-6 * sigma, sigma_p=0.05, sigma_e=sigma, gamma_sigma_r=0.0617, gamma_mu_r=-0.5882)
    layout = LevelLayout.default()
    for z in (-3.0, -1.0, 0.0, 0.5, 2.0):
        got = bin_probability(p, layout, 0, -np.inf, z * sigma)
        assert got == pytest.approx(stats.norm.cdf(z), abs=1e-4)


def test_bin_probability_additivity():
    layout = LevelLayout.default()
    rng = np.random.default_rng(3)
    for _ in range(200):
        a, b, c = np.sort(rng.uniform(-1.5, 4.0, size=3))
        k = int(rng.integers(0, 4))
        left = bin_probability(TRUTH, layout, k, a, b) + bin_probability(TRUTH, layout, k, b, c)
        assert left == pytest.approx(bin_probability(TRUTH, layout, k, a, c), abs=1e-12)


def test_bin_probability_rejects_reversed_bounds():
    layout = LevelLayout.default()
    with pytest.raises(ValueError):
        bin_probability(TRUTH, layout, 0, 1.0, 0.5)
    with pytest.raises(ValueError):
        bin_probability(TRUTH, layout, 0, 1.0, 1.0)


# ---------------------------------------------------------------------------
# mixture
# ---------------------------------------------------------------------------


def test_single_level_mixture_is_conditional():
    layout = LevelLayout((0.5,), (100,))
    y = np.linspace(-1, 2, 31)
    np.testing.assert_array_equal(mixture_pdf(TRUTH, layout, y), conditional_pdf(TRUTH, 0.5, 0.5, y))


def test_equal_count_mixture_is_average():
    layout = LevelLayout.default(cells=400)
    y = np.linspace(-1, 4, 51)
    avg = sum(conditional_pdf(TRUTH, x, 0.0, y) for x in layout.levels) / 4
    np.testing.assert_allclose(mixture_pdf(TRUTH, layout, y), avg, rtol=1e-14)


def test_mixture_integrates_to_one():
    layout = LevelLayout.default()
    f = lambda y: float(mixture_pdf(TRUTH, layout, y))
    total = integrate.quad(f, -6, 8, points=[-0.6, 0.4, 1.2, 1.3, 2.2], limit=400, epsabs=1e-12)[0]
    assert total == pytest.approx(1.0, abs=1e-9)


def test_empty_layout_rejected():
    with pytest.raises(ValueError):
        mixture_pdf(TRUTH, LevelLayout((0.0, 1.0), (0, 0)), 0.0)


def test_mixture_quantile_inverts_cdf():
    layout = LevelLayout.default()
    for p in (1e-6, 0.1, 0.5, 0.9, 1 - 1e-6):
        q = mixture_quantile(TRUTH, layout, p)
        assert float(mixture_cdf(TRUTH, layout, q)) == pytest.approx(p, abs=1e-12)


# ---------------------------------------------------------------------------
# sampler
# ---------------------------------------------------------------------------


def test_sampler_deterministic():
    layout = LevelLayout.default(cells=1000)
    a = sample_reads(TRUTH, layout, 42)
    b = sample_reads(TRUTH, layout, 42)
    np.testing.assert_array_equal(a.y, b.y)
    np.testing.assert_array_equal(a.level_index, b.level_index)
    assert not np.array_equal(a.y, sample_reads(TRUTH, layout, 43).y)


def test_sampler_level_counts():
    layout = LevelLayout((0.0, 1.0, 2.0), (5, 0, 7))
    reads = sample_reads(TRUTH, layout, 0)
    assert np.bincount(reads.level_index, minlength=3).tolist() == [5, 0, 7]


@pytest.mark.parametrize("x", [0.0, 2.0])
def test_sample_mean_clt_bound(x):
    n = 1_000_000
    layout = LevelLayout((0.0, 2.0), (n, 0) if x == 0.0 else (0, n))
    reads = sample_reads(TRUTH, layout, 7)
    spec = level_noise(TRUTH, x, 0.0)
    mean = x + spec.mu_r + TRUTH.lam
    bound = 5 * math.sqrt((spec.sigma**2 + TRUTH.lam**2) / n)
    assert abs(reads.y.mean() - mean) < bound
    assert reads.y.var() == pytest.approx(spec.sigma**2 + TRUTH.lam**2, rel=0.01)


def test_sampler_ks_single_level():
    n = 1_000_000
    layout = LevelLayout((0.0, 1.0), (0, n))
    reads = sample_reads(TRUTH, layout, 11)
    ks = stats.kstest(reads.y, lambda y: conditional_cdf(TRUTH, 1.0, 0.0, y)).statistic
    assert ks < 2 / math.sqrt(n)


def test_sampler_ks_mixture():
    layout = LevelLayout.default()
    reads = sample_reads(TRUTH, layout, 12)
    ks = stats.kstest(reads.y, lambda y: mixture_cdf(TRUTH, layout, y)).statistic
    assert ks < 2 / math.sqrt(layout.total)
