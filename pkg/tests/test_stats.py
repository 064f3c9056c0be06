import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mergelab.errors import DomainError
from mergelab.stats import (DensityEstimate, divergence_matrices, js_divergence,
                            kde, silverman_bandwidth, summarize)


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------

def test_all_equal_samples():
    s = summarize([4.2] * 12)
    assert s.iqr == 0.0
    assert s.outlier_values == ()
    assert s.q1 == s.median == s.q3 == 4.2


def test_known_outlier_case():
    # reference quantiles by hand (linear interpolation between ranks):
    # sorted = 1..9, 100; q1 at rank 2.25 -> 3.25; q3 at rank 6.75 -> 7.75;
    # fences with M=3: [3.25 - 13.5, 7.75 + 13.5] = [-10.25, 21.25]
    samples = list(range(1, 10)) + [100]
    s = summarize(samples, fence_multiplier=3.0)
    assert s.q1 == pytest.approx(3.25)
    assert s.q3 == pytest.approx(7.75)
    assert s.lower_fence == pytest.approx(-10.25)
    assert s.upper_fence == pytest.approx(21.25)
    assert s.outlier_values == (100.0,)
    assert s.whisker_high == 9.0


def test_single_sample():
    s = summarize([7.5])
    assert s.q1 == s.median == s.q3 == 7.5
    assert s.n == 1


def test_empty_sample_is_domain_error():
    with pytest.raises(DomainError):
        summarize([])
    with pytest.raises(DomainError):
        summarize([float("nan")])


@settings(max_examples=40, deadline=None)
@given(xs=st.lists(st.floats(-1e4, 1e4), min_size=2, max_size=60),
       scale=st.floats(0.1, 50.0), seed=st.integers(0, 2 ** 16))
def test_summary_permutation_invariant_and_scale_equivariant(xs, scale, seed):
    rng = np.random.default_rng(seed)
    shuffled = list(xs)
    rng.shuffle(shuffled)
    a, b = summarize(xs), summarize(shuffled)
    assert (a.q1, a.median, a.q3) == (b.q1, b.median, b.q3)

    scaled = summarize([scale * x for x in xs])
    assert scaled.median == pytest.approx(scale * a.median,
                                          rel=1e-9, abs=1e-9 * scale)
    assert scaled.iqr == pytest.approx(scale * a.iqr, rel=1e-9, abs=1e-9 * scale)


def test_outliers_reproducible_from_fences():
    rng = np.random.default_rng(9)
    samples = np.concatenate([rng.normal(0, 1, 200), [40.0, -35.0]])
    s = summarize(samples)
    recomputed = sorted(v for v in samples
                        if v < s.lower_fence or v > s.upper_fence)
    assert list(s.outlier_values) == recomputed


# ---------------------------------------------------------------------------
# KDE
# ---------------------------------------------------------------------------

def test_kde_standard_normal_density_at_zero(rng):
    x = rng.standard_normal(10_000)
    d = kde(x)
    i = int(np.argmin(np.abs(d.grid)))
    want = 1.0 / math.sqrt(2.0 * math.pi)      # 0.3989...
    assert d.values[i] == pytest.approx(want, abs=0.02)


def test_kde_below_minimum_is_masked():
    assert kde([1.0, 2.0, 3.0, 4.0]) is None


def test_kde_constant_samples_integrate_to_one():
    d = kde([3.0] * 50)
    assert d is not None
    assert np.trapezoid(d.values, d.grid) == pytest.approx(1.0, abs=1e-6)
    assert np.all(d.values >= 0.0)


def test_kde_normalization_generic(rng):
    d = kde(rng.uniform(0, 5, 500))
    assert np.trapezoid(d.values, d.grid) == pytest.approx(1.0, abs=1e-6)


# ---------------------------------------------------------------------------
# JS divergence
# ---------------------------------------------------------------------------

def test_js_identical_samples_is_zero(rng):
    x = rng.normal(3.0, 1.5, 400)
    assert js_divergence(x, x.copy()) == pytest.approx(0.0, abs=1e-6)


def _analytic_disjoint_js():
    """Direct integration of the analytic mixture for two narrow, far
    Gaussians: each KL term integrates f*log2(f/((f+g)/2)) ~ f*log2(2) = 1."""
    grid = np.linspace(-1.0, 101.0, 400_001)
    f = np.exp(-0.5 * ((grid - 0.0) / 0.1) ** 2) / (0.1 * math.sqrt(2 * math.pi))
    g = np.exp(-0.5 * ((grid - 100.0) / 0.1) ** 2) / (0.1 * math.sqrt(2 * math.pi))
    m = np.maximum(0.5 * (f + g), 1e-300)
    fs = np.maximum(f, 1e-300)
    gs = np.maximum(g, 1e-300)
    kl_f = np.trapezoid(f * np.log2(fs / m), grid)
    kl_g = np.trapezoid(g * np.log2(gs / m), grid)
    return 0.5 * kl_f + 0.5 * kl_g


def test_js_far_gaussians_reach_one(rng):
    want = _analytic_disjoint_js()
    assert want == pytest.approx(1.0, abs=1e-6)
    f = rng.normal(0.0, 0.1, 4000)
    g = rng.normal(100.0, 0.1, 4000)
    val = js_divergence(f, g)
    assert val == pytest.approx(1.0, abs=1e-3)


def test_js_symmetry_exact(rng):
    f = rng.normal(0.0, 1.0, 300)
    g = rng.normal(0.8, 1.3, 300)
    assert abs(js_divergence(f, g) - js_divergence(g, f)) < 1e-12


def test_js_bounds(rng):
    for shift in (0.0, 0.5, 3.0, 50.0):
        val = js_divergence(rng.normal(0, 1, 500), rng.normal(shift, 1, 500))
        assert -1e-12 <= val <= 1.0 + 1e-9


def test_js_monotone_in_separation(rng):
    vals = []
    base = rng.normal(0.0, 1.0, 10_000)
    for shift in (0.0, 0.5, 1.0, 2.0, 4.0):
        vals.append(js_divergence(base, rng.normal(shift, 1.0, 10_000)))
    diffs = np.diff(vals)
    assert np.all(diffs > -1e-3)


def test_js_masks_small_samples(rng):
    assert js_divergence([1, 2, 3, 4], rng.normal(0, 1, 100)) is None


# ---------------------------------------------------------------------------
# Divergence matrices
# ---------------------------------------------------------------------------

def _indicator_frame(rng):
    rows = []
    pops = {"A": rng.normal(0, 1, 60), "B": rng.normal(0, 1, 60),
            "C": rng.normal(8, 1, 60), "D": rng.normal(0.2, 1, 3)}
    for scen, vals in pops.items():
        for v in vals:
            rows.append({"location_id": 2, "distance_threshold": 100.0,
                         "vehicle_class": "car", "scenario": scen, "speed": v})
    return pd.DataFrame(rows)


def test_divergence_matrix_masking_and_separation(rng):
    df = _indicator_frame(rng)
    mats = divergence_matrices(df, "speed",
                               ["location_id", "distance_threshold"],
                               labels=("A", "B", "C", "D"))
    assert len(mats) == 1
    mat = mats[0]
    ia, ib, ic, idx = (mat.labels.index(k) for k in "ABCD")
    # group D has n < 5: masked row/column
    assert mat.masked[idx, ia] and mat.masked[ia, idx]
    # the shifted group C is strictly the most dissimilar
    assert mat.js[ia, ic] > mat.js[ia, ib]
    assert mat.js[ib, ic] > mat.js[ia, ib]
    # symmetric with a zero diagonal
    assert np.allclose(mat.js, mat.js.T)
    assert np.all(np.diag(mat.js) == 0.0)


def test_divergence_identical_groups_zero(rng):
    vals = rng.normal(0, 1, 80)
    rows = []
    for scen in ("A", "B"):
        for v in vals:
            rows.append({"location_id": 2, "distance_threshold": 100.0,
                         "vehicle_class": "car", "scenario": scen, "speed": v})
    mats = divergence_matrices(pd.DataFrame(rows), "speed",
                               ["location_id", "distance_threshold"],
                               labels=("A", "B"))
    assert mats[0].js[0, 1] == pytest.approx(0.0, abs=1e-6)


def test_divergence_filters_to_cars(rng):
    df = _indicator_frame(rng)
    df["vehicle_class"] = "truck"
    mats = divergence_matrices(df, "speed",
                               ["location_id", "distance_threshold"],
                               labels=("A", "B", "C", "D"))
    assert mats == []
