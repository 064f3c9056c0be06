"""Sample summaries and scenario-population comparison.

Boxplot summaries use quartiles by linear interpolation between closest
ranks and Tukey fences at M times the interquartile range (M = 3 by
default).  Population dissimilarity is the Jensen-Shannon divergence
between Gaussian kernel density estimates, computed with base-2
logarithms so the value range is [0, 1]; groups with fewer than 5 samples
are masked rather than fitted.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DomainError

DEFAULT_FENCE_MULTIPLIER = 3.0
KDE_MIN_SAMPLES = 5
KDE_GRID_POINTS = 512
DENSITY_FLOOR = 1e-12
_BANDWIDTH_RANGE_FLOOR = 1e-6


@dataclass(frozen=True)
class SampleSummary:
    """Five-number summary with outliers outside the Tukey fences."""

    n: int
    q1: float
    median: float
    q3: float
    mean: float
    iqr: float
    fence_multiplier: float
    outlier_values: tuple[float, ...]
    whisker_low: float     # most extreme sample inside the fences
    whisker_high: float

    @property
    def lower_fence(self) -> float:
        return self.q1 - self.fence_multiplier * self.iqr

    @property
    def upper_fence(self) -> float:
        return self.q3 + self.fence_multiplier * self.iqr


def summarize(samples, fence_multiplier: float = DEFAULT_FENCE_MULTIPLIER) -> SampleSummary:
    """Summary statistics of one sample vector (n >= 1)."""
    x = np.asarray(list(samples), dtype=float)
    x = x[np.isfinite(x)]
    if x.size == 0:
        raise DomainError("cannot summarize an empty (or all-non-finite) sample")
    q1, med, q3 = np.quantile(x, [0.25, 0.5, 0.75])  # linear interpolation
    iqr = q3 - q1
    lo = q1 - fence_multiplier * iqr
    hi = q3 + fence_multiplier * iqr
    inside = x[(x >= lo) & (x <= hi)]
    outliers = x[(x < lo) | (x > hi)]
    return SampleSummary(
        n=int(x.size),
        q1=float(q1), median=float(med), q3=float(q3),
        mean=float(np.mean(x)), iqr=float(iqr),
        fence_multiplier=float(fence_multiplier),
        outlier_values=tuple(sorted(float(v) for v in outliers)),
        whisker_low=float(np.min(inside)) if inside.size else float(q1),
        whisker_high=float(np.max(inside)) if inside.size else float(q3),
    )


# ---------------------------------------------------------------------------
# Density estimation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DensityEstimate:
    grid: np.ndarray
    values: np.ndarray
    bandwidth: float


def silverman_bandwidth(x: np.ndarray) -> float:
    """h = 1.06 * sigma_hat * n^(-1/5) with the robust spread estimate
    sigma_hat = min(std, iqr/1.349), floored against degenerate samples."""
    n = x.size
    std = float(np.std(x, ddof=1)) if n > 1 else 0.0
    q1, q3 = np.quantile(x, [0.25, 0.75])
    iqr = float(q3 - q1)
    sigma = min(std, iqr / 1.349) if iqr > 0 else std
    h = 1.06 * sigma * n ** (-0.2)
    rng = float(np.max(x) - np.min(x))
    floor = _BANDWIDTH_RANGE_FLOOR * rng if rng > 0 else 0.0
    # Constant samples degenerate to a point mass: keep a tiny positive width.
    absolute_floor = 1e-9 * max(1.0, float(np.max(np.abs(x))) if n else 1.0)
    return max(h, floor, absolute_floor)


def kde(samples, grid: np.ndarray | None = None,
        min_n: int = KDE_MIN_SAMPLES) -> DensityEstimate | None:
    """Gaussian KDE normalized to unit trapezoidal integral on its grid.

    Returns None (masked) below ``min_n`` samples.  The default grid has
    512 points spanning the sample range widened by three bandwidths.
    """
    x = np.asarray(list(samples), dtype=float)
    x = x[np.isfinite(x)]
    if x.size < min_n:
        return None
    h = silverman_bandwidth(x)
    if grid is None:
        grid = np.linspace(np.min(x) - 3.0 * h, np.max(x) + 3.0 * h,
                           KDE_GRID_POINTS)
    z = (grid[:, None] - x[None, :]) / h
    values = np.exp(-0.5 * z * z).sum(axis=1) / (x.size * h * math.sqrt(2.0 * math.pi))
    integral = np.trapezoid(values, grid)
    if integral <= 0:
        return None
    return DensityEstimate(grid=grid, values=values / integral, bandwidth=h)


def _kl_base2(f: np.ndarray, g: np.ndarray, grid: np.ndarray) -> float:
    f = np.maximum(f, DENSITY_FLOOR)
    g = np.maximum(g, DENSITY_FLOOR)
    return float(np.trapezoid(f * np.log2(f / g), grid))


def js_divergence(f_samples, g_samples,
                  min_n: int = KDE_MIN_SAMPLES) -> float | None:
    """Jensen-Shannon divergence between two sample populations.

    Both densities are estimated on a common grid spanning the pooled
    sample range plus three bandwidths; KL terms are integrated with the
    trapezoidal rule in log base 2, so identical populations give 0 and
    disjoint ones approach 1.  Returns None when either side is masked.
    """
    f = np.asarray(list(f_samples), dtype=float)
    g = np.asarray(list(g_samples), dtype=float)
    f = f[np.isfinite(f)]
    g = g[np.isfinite(g)]
    if f.size < min_n or g.size < min_n:
        return None
    h = max(silverman_bandwidth(f), silverman_bandwidth(g))
    lo = min(np.min(f), np.min(g)) - 3.0 * h
    hi = max(np.max(f), np.max(g)) + 3.0 * h
    grid = np.linspace(lo, hi, KDE_GRID_POINTS)
    df = kde(f, grid=grid, min_n=min_n)
    dg = kde(g, grid=grid, min_n=min_n)
    if df is None or dg is None:
        return None
    m = 0.5 * (df.values + dg.values)
    return 0.5 * _kl_base2(df.values, m, grid) + 0.5 * _kl_base2(dg.values, m, grid)


# ---------------------------------------------------------------------------
# Divergence matrices
# ---------------------------------------------------------------------------

@dataclass
class DivergenceMatrix:
    """Pairwise JS values of one group's scenario populations."""

    group: dict
    labels: tuple[str, ...]
    js: np.ndarray
    masked: np.ndarray
    sizes: tuple[int, ...] = field(default_factory=tuple)

    def to_rows(self) -> list[dict]:
        rows = []
        for i, a in enumerate(self.labels):
            for j, b in enumerate(self.labels):
                rows.append({**self.group,
                             "scenario_i": a, "scenario_j": b,
                             "js": "" if self.masked[i, j] else float(self.js[i, j]),
                             "n_i": self.sizes[i], "n_j": self.sizes[j],
                             "masked": bool(self.masked[i, j])})
        return rows


def divergence_matrix(populations: dict[str, np.ndarray], group: dict,
                      min_n: int = KDE_MIN_SAMPLES) -> DivergenceMatrix:
    """Symmetric JS matrix over scenario populations; small groups masked."""
    labels = tuple(populations.keys())
    k = len(labels)
    js = np.zeros((k, k))
    masked = np.zeros((k, k), dtype=bool)
    sizes = tuple(int(len(populations[lab])) for lab in labels)
    for i, j in itertools.combinations(range(k), 2):
        val = js_divergence(populations[labels[i]], populations[labels[j]], min_n)
        if val is None:
            masked[i, j] = masked[j, i] = True
        else:
            js[i, j] = js[j, i] = val
    for i in range(k):
        if sizes[i] < min_n:
            masked[i, :] = masked[:, i] = True
            masked[i, i] = True
        # The diagonal is zero by definition and never masked for fitted groups.
    return DivergenceMatrix(group=group, labels=labels, js=js, masked=masked,
                            sizes=sizes)


def divergence_matrices(table: pd.DataFrame, value_col: str,
                        group_cols: list[str], scenario_col: str = "scenario",
                        labels: tuple[str, ...] | None = None,
                        vehicle_classes: tuple[str, ...] = ("car",),
                        min_n: int = KDE_MIN_SAMPLES) -> list[DivergenceMatrix]:
    """One matrix per group of an indicator table joined with labels.

    Only the listed vehicle classes enter (cars by default: the sparse
    truck/van groups rarely reach the sample minimum).
    """
    df = table
    if "vehicle_class" in df.columns and vehicle_classes:
        df = df[df["vehicle_class"].isin(vehicle_classes)]
    df = df[np.isfinite(pd.to_numeric(df[value_col], errors="coerce"))]
    out: list[DivergenceMatrix] = []
    if df.empty:
        return out
    all_labels = labels or tuple(sorted(df[scenario_col].unique()))
    for key, sub in df.groupby(group_cols, sort=True):
        key = key if isinstance(key, tuple) else (key,)
        group = dict(zip(group_cols, (_plain(k) for k in key)))
        group["indicator"] = value_col
        pops = {lab: pd.to_numeric(
                    sub.loc[sub[scenario_col] == lab, value_col],
                    errors="coerce").dropna().to_numpy()
                for lab in all_labels}
        out.append(divergence_matrix(pops, group, min_n))
    return out


def _plain(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value
