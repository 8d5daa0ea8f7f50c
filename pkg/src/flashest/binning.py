"""Read-voltage bin placement and discretization metrics.

Three placement strategies are provided: equal-width, equal-probability
(quantiles of the predicted read distribution) and maximum mutual
information between stored level and observed bin.  Bins are described by
their finite interior cuts; the outermost bins extend to -inf and +inf.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from .channel_model import (
    ChannelParams,
    LevelLayout,
    bin_probability_matrix,
    emg_cdf,
    level_locations,
    mixture_cdf,
    mixture_pdf,
    mixture_quantile,
)

__all__ = [
    "BinBoundaries",
    "Histogram",
    "equal_width_bins",
    "model_support",
    "equal_width_bins_for_model",
    "equal_probability_bins",
    "mutual_information",
    "mmi_bins",
    "mixture_bin_probabilities",
    "squared_distance",
    "discretization_error",
    "merged_bin_count",
    "effective_resolution",
    "measure_histogram",
    "make_bins",
    "STRATEGIES",
]

STRATEGIES = ("equal_width", "equal_probability", "mmi")


@dataclass(frozen=True)
class BinBoundaries:
    """Interior cut points; the outer bins extend to -inf and +inf.

    No cuts at all is allowed and describes the single bin holding every
    read; the placement strategies always produce at least two bins.
    """

    cuts: tuple[float, ...]

    def __post_init__(self):
        cuts = tuple(float(c) for c in self.cuts)
        object.__setattr__(self, "cuts", cuts)
        if not all(math.isfinite(c) for c in cuts):
            raise ValueError(f"cuts must be finite, got {cuts}")
        if any(b <= a for a, b in zip(cuts, cuts[1:])):
            raise ValueError(f"cuts must be strictly increasing, got {cuts}")

    @property
    def M(self) -> int:
        return len(self.cuts) + 1

    @property
    def edges(self) -> np.ndarray:
        """All ``M + 1`` boundaries including the infinite ends."""
        return np.concatenate(([-np.inf], self.cuts, [np.inf]))

    def to_dict(self) -> dict:
        return {"cuts": list(self.cuts), "M": self.M}

    @classmethod
    def from_dict(cls, data: dict) -> "BinBoundaries":
        bins = cls(tuple(data["cuts"]))
        if "M" in data and int(data["M"]) != bins.M:
            raise ValueError(f"M={data['M']} inconsistent with {len(bins.cuts)} cuts")
        return bins

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load_json(cls, path) -> "BinBoundaries":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class Histogram:
    """Per-bin cell counts.

    Measured histograms hold integers; analytic references built from
    expected counts hold floats.
    """

    counts: tuple

    def __post_init__(self):
        counts = tuple(
            int(c) if float(c).is_integer() and not isinstance(c, float) else float(c)
            for c in self.counts
        )
        if any(not math.isfinite(c) or c < 0 for c in counts):
            raise ValueError("histogram counts must be finite and non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self):
        return sum(self.counts)

    @property
    def M(self) -> int:
        return len(self.counts)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float)

    def write_csv(self, path, bins: BinBoundaries) -> None:
        """Rows of ``bin_index,lo,hi,count``; infinite edges written as ``-inf``/``inf``."""
        if bins.M != self.M:
            raise ValueError(f"histogram has {self.M} bins, boundaries define {bins.M}")
        edges = bins.edges
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_index", "lo", "hi", "count"])
            for i, c in enumerate(self.counts):
                writer.writerow([i, repr(float(edges[i])), repr(float(edges[i + 1])), c])

    @classmethod
    def read_csv(cls, path) -> tuple["Histogram", BinBoundaries]:
        with Path(path).open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        rows.sort(key=lambda r: int(r["bin_index"]))
        counts = [_parse_count(r["count"]) for r in rows]
        cuts = [float(r["hi"]) for r in rows[:-1]]
        return cls(tuple(counts)), BinBoundaries(tuple(cuts))


def _parse_count(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


# ---------------------------------------------------------------------------
# placement strategies
# ---------------------------------------------------------------------------


def equal_width_bins(support_lo: float, support_hi: float, M: int) -> BinBoundaries:
    """``M - 1`` evenly spaced cuts across ``[support_lo, support_hi]``."""
    if M < 2:
        raise ValueError(f"need M >= 2 bins, got {M}")
    if not support_lo < support_hi:
        raise ValueError(f"empty support [{support_lo}, {support_hi}]")
    i = np.arange(1, M)
    return BinBoundaries(tuple(support_lo + (support_hi - support_lo) * i / M))


def model_support(params: ChannelParams, layout: LevelLayout, tail: float = 1e-4):
    return (
        mixture_quantile(params, layout, tail),
        mixture_quantile(params, layout, 1.0 - tail),
    )


def equal_width_bins_for_model(
    params: ChannelParams, layout: LevelLayout, M: int, tail: float = 1e-4
) -> BinBoundaries:
    """Equal-width bins spanning the ``tail`` / ``1 - tail`` mixture quantiles."""
    return equal_width_bins(*model_support(params, layout, tail), M)


def equal_probability_bins(params: ChannelParams, layout: LevelLayout, M: int) -> BinBoundaries:
    """Cuts at the ``i / M`` quantiles of the predicted read distribution.

    The prediction uses ``params`` as currently believed (nominal values or a
    previous estimate): the reads have to be placed before any data exist.
    """
    if M < 2:
        raise ValueError(f"need M >= 2 bins, got {M}")
    return BinBoundaries(tuple(mixture_quantile(params, layout, i / M) for i in range(1, M)))


def mutual_information(params: ChannelParams, layout: LevelLayout, bins: BinBoundaries) -> float:
    """I(level; bin) in bits, with level prior given by the layout counts."""
    prior = layout.weights
    joint = prior[:, None] * bin_probability_matrix(params.as_array(), layout.levels, bins.cuts)
    return _mi_from_joint(joint)


def _mi_from_joint(joint: np.ndarray) -> float:
    px = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    denom = px * pb
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(joint > 0, joint * np.log2(joint / denom), 0.0)
    return float(terms.sum())


def mmi_bins(
    params: ChannelParams,
    layout: LevelLayout,
    M: int,
    grid_size: int = 2000,
    tail: float = 1e-6,
) -> BinBoundaries:
    """Cuts maximizing I(level; bin) over a uniform grid of candidate voltages.

    The objective is a sum of per-bin terms, so the optimal contiguous
    partition is found exactly (on the grid) by dynamic programming in
    ``O(grid_size**2 * M)``.  The grid spans the ``tail`` / ``1 - tail``
    mixture quantiles.
    """
    if M < 2:
        raise ValueError(f"need M >= 2 bins, got {M}")
    if grid_size < 10 * M:
        raise ValueError(f"grid_size must be >= 10*M = {10 * M}, got {grid_size}")
    prior = layout.weights
    if np.count_nonzero(prior) <= 1:
        # every partition carries zero information
        return equal_probability_bins(params, layout, M)

    grid = np.linspace(*model_support(params, layout, tail), grid_size)
    _, best_cuts = _mmi_dp(params, layout, grid, M)
    return BinBoundaries(tuple(grid[best_cuts]))


def _mmi_dp(params: ChannelParams, layout: LevelLayout, grid: np.ndarray, M: int):
    """Return (max MI in bits, indices into ``grid`` of the M-1 cuts)."""
    prior = layout.weights
    loc, sigma = level_locations(params.as_array(), layout.levels)
    G = grid.size
    # cumulative level-joint mass at each boundary position 0..G+1
    cdf = emg_cdf(grid[None, :], loc[:, None], sigma[:, None], params.lam)
    cum = np.concatenate([np.zeros((len(prior), 1)), cdf, np.ones((len(prior), 1))], axis=1)
    cum *= prior[:, None]

    # weight[a, b]: MI contribution of a bin spanning boundary a to boundary b
    n = G + 2

    def level_mass(k):
        m = cum[k][None, :] - cum[k][:, None]
        return np.clip(m, 0.0, None, out=m)

    pb = sum(level_mass(k) for k in range(len(prior)))
    weight = np.zeros((n, n))
    for k in range(len(prior)):
        if prior[k] == 0:
            continue
        mass = level_mass(k)
        with np.errstate(divide="ignore", invalid="ignore"):
            weight += np.where(mass > 0, mass * np.log2(mass / (prior[k] * pb)), 0.0)
    weight[np.tri(n, dtype=bool)] = -np.inf

    # best[j]: best value of partitioning boundary 0..j into m bins
    best = weight[0].copy()
    back = []
    for _ in range(M - 1):
        total = best[:, None] + weight
        arg = np.argmax(total, axis=0)
        back.append(arg)
        best = total[arg, np.arange(n)]
    value = best[n - 1]

    cuts = []
    j = n - 1
    for arg in reversed(back):
        j = int(arg[j])
        cuts.append(j)
    cuts.reverse()
    # boundary j corresponds to grid[j - 1]
    return float(value), np.asarray(cuts) - 1


# ---------------------------------------------------------------------------
# discretization metrics
# ---------------------------------------------------------------------------


def mixture_bin_probabilities(params: ChannelParams, layout: LevelLayout, bins: BinBoundaries):
    """Induced bin probabilities ``H_i`` of the aggregate distribution."""
    P = bin_probability_matrix(params.as_array(), layout.levels, bins.cuts)
    return layout.weights @ P


def squared_distance(
    pdf: Callable[[float], float],
    edges: Sequence[float],
    probs: Sequence[float],
    epsabs: float = 1e-10,
    breakpoints: Sequence[float] = (),
) -> float:
    """Sum over bins of the integrated squared gap between ``pdf`` and the
    histogram density ``probs[i] / (edges[i+1] - edges[i])``.

    ``edges`` must be finite.
    """
    edges = np.asarray(edges, dtype=float)
    total = 0.0
    for i, h in enumerate(probs):
        lo, hi = edges[i], edges[i + 1]
        density = h / (hi - lo)
        pts = [p for p in breakpoints if lo < p < hi]
        val, _ = quad(
            lambda y: (pdf(y) - density) ** 2,
            lo,
            hi,
            epsabs=epsabs,
            epsrel=1e-10,
            limit=200,
            points=pts or None,
        )
        total += val
    return total


def discretization_error(
    params: ChannelParams,
    layout: LevelLayout,
    bins: BinBoundaries,
    tail: float = 1e-9,
) -> float:
    """Squared distance between the aggregate read density and its histogram.

    The two semi-infinite bins are truncated at the ``tail`` and ``1 - tail``
    mixture quantiles, and those truncation points also serve as the edges
    that set the outer bins' histogram density.  ``H_i`` keeps the full
    (untruncated) bin probability.  A cut lying beyond a truncation point
    pushes that point just past the cut, so every bin keeps positive width.
    """
    lo, hi = model_support(params, layout, tail)
    cuts = np.asarray(bins.cuts)
    if cuts.size:
        span = cuts[-1] - cuts[0] if cuts.size > 1 else 1.0
        lo = min(lo, cuts[0] - 1e-6 * span)
        hi = max(hi, cuts[-1] + 1e-6 * span)
    edges = np.concatenate(([lo], cuts, [hi]))
    probs = mixture_bin_probabilities(params, layout, bins)
    loc, _ = level_locations(params.as_array(), layout.levels)

    def pdf(y):
        return float(mixture_pdf(params, layout, y))

    return squared_distance(pdf, edges, probs, breakpoints=tuple(loc))


def merged_bin_count(probs: Sequence[float], threshold: float = 1e-4) -> int:
    """Bins left after collapsing each run of adjacent sub-threshold bins into one."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    count = 0
    in_run = False
    for p in probs:
        small = p < threshold
        if not (small and in_run):
            count += 1
        in_run = small
    return count


def effective_resolution(
    params: ChannelParams, layout: LevelLayout, bins: BinBoundaries, threshold: float = 1e-4
) -> int:
    return merged_bin_count(mixture_bin_probabilities(params, layout, bins), threshold)


def measure_histogram(samples, bins: BinBoundaries) -> Histogram:
    """Count reads with ``q_i < y <= q_{i+1}`` for every bin."""
    y = np.asarray(samples, dtype=float).ravel()
    idx = np.searchsorted(np.asarray(bins.cuts), y, side="left")
    return Histogram(tuple(np.bincount(idx, minlength=bins.M).tolist()))


def make_bins(
    strategy: str,
    params: ChannelParams,
    layout: LevelLayout,
    M: int,
    grid_size: int = 2000,
) -> BinBoundaries:
    if strategy == "equal_width":
        return equal_width_bins_for_model(params, layout, M)
    if strategy == "equal_probability":
        return equal_probability_bins(params, layout, M)
    if strategy == "mmi":
        return mmi_bins(params, layout, M, grid_size=grid_size)
    raise ValueError(f"unknown bin strategy {strategy!r}; expected one of {STRATEGIES}")
