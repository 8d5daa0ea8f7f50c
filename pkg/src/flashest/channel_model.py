"""Flash read-channel model: programming, wear-out and retention noise.

A cell written to intended threshold ``x`` is read back as

    y = x + n_p + n_w + n_r

with Gaussian programming noise ``n_p``, one-sided exponential wear-out
noise ``n_w`` (scale ``lambda``) and Gaussian retention noise ``n_r`` whose
mean and spread grow with the programmed charge ``x - x0``.  The Gaussian
parts combine, so each level's read distribution is an exponentially
modified Gaussian (EMG) with location ``x + mu_r``, Gaussian spread
``sigma`` and exponential scale ``lambda``.

All density and CDF evaluations go through :func:`_emg_tail`, which never
forms ``exp(sigma**2 / (2 lambda**2))`` explicitly.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfcx, ndtr

__all__ = [
    "PARAM_NAMES",
    "ChannelParams",
    "LevelLayout",
    "LevelNoiseSpec",
    "Reads",
    "level_noise",
    "level_locations",
    "emg_pdf",
    "emg_cdf",
    "emg_sf",
    "conditional_pdf",
    "conditional_cdf",
    "bin_probability",
    "bin_probability_matrix",
    "mixture_pdf",
    "mixture_cdf",
    "mixture_sf",
    "mixture_quantile",
    "sample_reads",
    "load_config",
    "save_config",
]

PARAM_NAMES = ("lambda", "sigma_p", "sigma_e", "gamma_sigma_r", "gamma_mu_r")

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ChannelParams:
    """The five level-independent channel parameters.

    ``lam`` is the wear-out exponential scale (``lambda`` in config files,
    renamed because ``lambda`` is a Python keyword).
    """

    lam: float
    sigma_p: float
    sigma_e: float
    gamma_sigma_r: float
    gamma_mu_r: float

    def __post_init__(self):
        values = self.as_array()
        if not np.all(np.isfinite(values)):
            raise ValueError(f"channel parameters must be finite, got {values.tolist()}")
        if self.lam <= 0 or self.sigma_p <= 0 or self.sigma_e <= 0:
            raise ValueError(
                "lambda, sigma_p and sigma_e must be positive "
                f"(got {self.lam}, {self.sigma_p}, {self.sigma_e})"
            )
        if self.gamma_sigma_r < 0:
            raise ValueError(f"gamma_sigma_r must be >= 0, got {self.gamma_sigma_r}")

    def soft_violations(self) -> list[str]:
        """Physically implausible but numerically usable settings."""
        problems = []
        if self.sigma_e <= self.sigma_p:
            problems.append(
                f"sigma_e ({self.sigma_e}) should exceed sigma_p ({self.sigma_p})"
            )
        if self.gamma_mu_r > 0:
            problems.append(
                f"gamma_mu_r ({self.gamma_mu_r}) is positive; retention normally "
                "shifts thresholds down"
            )
        return problems

    def warn_if_implausible(self, context: str = "") -> None:
        for msg in self.soft_violations():
            warnings.warn(f"{context}{msg}", stacklevel=2)

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.lam, self.sigma_p, self.sigma_e, self.gamma_sigma_r, self.gamma_mu_r],
            dtype=float,
        )

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "ChannelParams":
        values = [float(v) for v in values]
        if len(values) != 5:
            raise ValueError(f"expected 5 parameters, got {len(values)}")
        return cls(*values)

    def to_dict(self) -> dict[str, float]:
        return dict(zip(PARAM_NAMES, (float(v) for v in self.as_array())))

    @classmethod
    def from_dict(cls, data: dict) -> "ChannelParams":
        missing = [k for k in PARAM_NAMES if k not in data]
        if missing:
            raise KeyError(f"missing channel parameter(s): {', '.join(missing)}")
        return cls.from_array([data[k] for k in PARAM_NAMES])


@dataclass(frozen=True)
class LevelLayout:
    """Intended threshold voltages (``levels[0]`` is the erased state) and
    the number of cells written to each."""

    levels: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        levels = tuple(float(v) for v in self.levels)
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "counts", counts)
        if len(levels) == 0:
            raise ValueError("layout needs at least one level")
        if len(levels) != len(counts):
            raise ValueError(
                f"levels ({len(levels)}) and counts ({len(counts)}) differ in length"
            )
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ValueError(f"levels must be strictly increasing, got {levels}")
        if any(c < 0 for c in counts):
            raise ValueError(f"counts must be non-negative, got {counts}")

    @property
    def x0(self) -> float:
        return self.levels[0]

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def weights(self) -> np.ndarray:
        total = self.total
        if total <= 0:
            raise ValueError("layout has no cells")
        return np.asarray(self.counts, dtype=float) / total

    @classmethod
    def default(cls, cells: int = 1_000_000, levels: Sequence[float] = (0.0, 1.0, 2.0, 3.0)):
        """Equal-occupancy layout; leftover cells go to the lowest levels."""
        n = len(levels)
        base, extra = divmod(int(cells), n)
        counts = tuple(base + (1 if i < extra else 0) for i in range(n))
        return cls(tuple(levels), counts)

    def to_dict(self) -> dict:
        return {"levels": list(self.levels), "counts": list(self.counts)}

    @classmethod
    def from_dict(cls, data: dict) -> "LevelLayout":
        return cls(tuple(data["levels"]), tuple(data["counts"]))


class LevelNoiseSpec(NamedTuple):
    mu_r: float
    sigma_r: float
    sigma: float


class Reads(NamedTuple):
    level_index: np.ndarray
    y: np.ndarray


def level_noise(params: ChannelParams, x: float, x0: float) -> LevelNoiseSpec:
    """Retention shift and combined Gaussian spread for intended threshold ``x``."""
    d = float(x) - float(x0)
    if d < 0:
        raise ValueError(f"intended threshold {x} lies below the erased state {x0}")
    mu_r = params.gamma_mu_r * d
    sigma_r = params.gamma_sigma_r * math.sqrt(d)
    prog = params.sigma_e if d == 0 else params.sigma_p
    return LevelNoiseSpec(mu_r, sigma_r, math.hypot(prog, sigma_r))


def level_locations(theta, levels) -> tuple[np.ndarray, np.ndarray]:
    """Per-level EMG location ``x + mu_r`` and Gaussian spread ``sigma``.

    ``theta`` is the raw parameter vector in :data:`PARAM_NAMES` order; no
    validation is done here so solvers can call it in their inner loop.
    """
    _, sigma_p, sigma_e, g_sr, g_mr = np.asarray(theta, dtype=float)
    levels = np.asarray(levels, dtype=float)
    d = levels - levels[0]
    sigma_r = g_sr * np.sqrt(d)
    prog = np.where(d == 0, sigma_e, sigma_p)
    return levels + g_mr * d, np.hypot(prog, sigma_r)


# ---------------------------------------------------------------------------
# exponentially modified Gaussian, stable forms
# ---------------------------------------------------------------------------


def _emg_tail(z, k):
    """``exp(k**2/2 - z*k) * Phi(z - k)``, i.e. ``lambda * pdf``.

    ``z`` is the standardized read ``(y - loc) / sigma`` and ``k`` the ratio
    ``sigma / lambda``.  For ``z <= k`` the scaled complementary error
    function absorbs the large exponent; otherwise the exponent is already
    non-positive.
    """
    z, k = np.broadcast_arrays(np.asarray(z, dtype=float), np.asarray(k, dtype=float))
    u = k - z
    out = np.empty(z.shape, dtype=float)
    left = u >= 0
    out[left] = 0.5 * erfcx(u[left] / _SQRT2) * np.exp(-0.5 * z[left] ** 2)
    right = ~left
    zr, kr = z[right], k[right]
    with np.errstate(over="ignore"):
        out[right] = np.exp(-kr * (zr - 0.5 * kr)) * ndtr(zr - kr)
    # y = +-inf
    out[np.isinf(z)] = 0.0
    return out


def emg_pdf(y, loc, sigma, lam):
    z = (np.asarray(y, dtype=float) - loc) / sigma
    return _emg_tail(z, sigma / lam) / lam


def emg_cdf(y, loc, sigma, lam):
    z = (np.asarray(y, dtype=float) - loc) / sigma
    # the difference cancels deep in the left tail; keep it a probability
    return np.clip(ndtr(z) - _emg_tail(z, sigma / lam), 0.0, 1.0)


def emg_sf(y, loc, sigma, lam):
    z = (np.asarray(y, dtype=float) - loc) / sigma
    return np.clip(ndtr(-z) + _emg_tail(z, sigma / lam), 0.0, 1.0)


def _emg_interval(a, b, loc, sigma, lam):
    """P(a < Y <= b), differencing whichever of CDF/SF keeps precision."""
    za = (np.asarray(a, dtype=float) - loc) / sigma
    zb = (np.asarray(b, dtype=float) - loc) / sigma
    k = sigma / lam
    ta, tb = _emg_tail(za, k), _emg_tail(zb, k)
    lower = (ndtr(zb) - tb) - (ndtr(za) - ta)
    upper = (ndtr(-za) + ta) - (ndtr(-zb) + tb)
    return np.clip(np.where(za > 0, upper, lower), 0.0, 1.0)


# ---------------------------------------------------------------------------
# per-level and mixture quantities
# ---------------------------------------------------------------------------


def _level_emg(params: ChannelParams, x: float, x0: float):
    spec = level_noise(params, x, x0)
    return x + spec.mu_r, spec.sigma, params.lam


def conditional_pdf(params: ChannelParams, x: float, x0: float, y):
    """Read-voltage density ``f(y | x)``; vectorized over ``y``."""
    return emg_pdf(y, *_level_emg(params, x, x0))


def conditional_cdf(params: ChannelParams, x: float, x0: float, y):
    return emg_cdf(y, *_level_emg(params, x, x0))


def bin_probability(
    params: ChannelParams, layout: LevelLayout, level_index: int, q_lo: float, q_hi: float
) -> float:
    """Probability that a cell of level ``level_index`` reads in ``(q_lo, q_hi]``."""
    if not q_lo < q_hi:
        raise ValueError(f"bin bounds must satisfy q_lo < q_hi, got ({q_lo}, {q_hi})")
    loc, sigma, lam = _level_emg(params, layout.levels[level_index], layout.x0)
    return float(_emg_interval(q_lo, q_hi, loc, sigma, lam))


def bin_probability_matrix(theta, levels, cuts) -> np.ndarray:
    """``P[k, i]`` = probability that level ``k`` reads into bin ``i``.

    ``cuts`` are the finite interior boundaries; the outer bins are
    semi-infinite, so the result has ``len(cuts) + 1`` columns.
    """
    theta = np.asarray(theta, dtype=float)
    loc, sigma = level_locations(theta, levels)
    edges = np.concatenate(([-np.inf], np.asarray(cuts, dtype=float), [np.inf]))
    return _emg_interval(
        edges[None, :-1], edges[None, 1:], loc[:, None], sigma[:, None], theta[0]
    )


def _mixture_parts(params: ChannelParams, layout: LevelLayout):
    weights = layout.weights
    loc, sigma = level_locations(params.as_array(), layout.levels)
    return weights, loc, sigma, params.lam


def mixture_pdf(params: ChannelParams, layout: LevelLayout, y):
    """Aggregate read density: levels weighted by their cell fractions."""
    w, loc, sigma, lam = _mixture_parts(params, layout)
    y = np.asarray(y, dtype=float)
    return np.tensordot(w, emg_pdf(y[None, ...], _bc(loc, y), _bc(sigma, y), lam), axes=1)


def mixture_cdf(params: ChannelParams, layout: LevelLayout, y):
    w, loc, sigma, lam = _mixture_parts(params, layout)
    y = np.asarray(y, dtype=float)
    return np.tensordot(w, emg_cdf(y[None, ...], _bc(loc, y), _bc(sigma, y), lam), axes=1)


def mixture_sf(params: ChannelParams, layout: LevelLayout, y):
    w, loc, sigma, lam = _mixture_parts(params, layout)
    y = np.asarray(y, dtype=float)
    return np.tensordot(w, emg_sf(y[None, ...], _bc(loc, y), _bc(sigma, y), lam), axes=1)


def _bc(per_level: np.ndarray, y: np.ndarray) -> np.ndarray:
    return per_level.reshape(per_level.shape + (1,) * y.ndim)


def _mixture_bracket(params: ChannelParams, layout: LevelLayout) -> tuple[float, float]:
    _, loc, sigma, lam = _mixture_parts(params, layout)
    return float(np.min(loc - 40 * sigma)), float(np.max(loc + 40 * sigma + 60 * lam))


def mixture_quantile(params: ChannelParams, layout: LevelLayout, p: float) -> float:
    """Inverse of :func:`mixture_cdf` by bracketed root finding.

    Upper quantiles are solved on the survival function so that
    ``p`` close to 1 keeps full relative precision.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {p}")
    lo, hi = _mixture_bracket(params, layout)
    if p <= 0.5:
        def h(y):
            return float(mixture_cdf(params, layout, y)) - p
    else:
        tail = 1.0 - p

        def h(y):
            return tail - float(mixture_sf(params, layout, y))

    flo, fhi = h(lo), h(hi)
    if not (flo < 0 < fhi):
        raise ArithmeticError(
            f"quantile {p} not bracketed by [{lo}, {hi}]: h(lo)={flo:.3g}, h(hi)={fhi:.3g}"
        )
    return brentq(h, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def sample_reads(params: ChannelParams, layout: LevelLayout, seed) -> Reads:
    """Draw one read per cell: ``y = x + n_p + n_w + n_r``.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts.  Cells are
    returned grouped by level in layout order.
    """
    rng = np.random.default_rng(seed)
    idx_parts, y_parts = [], []
    for k, (x, n) in enumerate(zip(layout.levels, layout.counts)):
        spec = level_noise(params, x, layout.x0)
        prog = params.sigma_e if k == 0 else params.sigma_p
        n_p = rng.normal(0.0, prog, n)
        n_w = rng.exponential(params.lam, n)
        n_r = rng.normal(spec.mu_r, spec.sigma_r, n)
        y_parts.append(x + n_p + n_w + n_r)
        idx_parts.append(np.full(n, k, dtype=np.int64))
    return Reads(np.concatenate(idx_parts), np.concatenate(y_parts))


# ---------------------------------------------------------------------------
# JSON config
# ---------------------------------------------------------------------------


def load_config(path) -> tuple[ChannelParams, LevelLayout]:
    """Read ``{lambda, sigma_p, sigma_e, gamma_sigma_r, gamma_mu_r, levels, counts}``."""
    path = Path(path)
    with path.open() as fh:
        data = json.load(fh)
    params = ChannelParams.from_dict(data)
    params.warn_if_implausible(f"{path}: ")
    return params, LevelLayout.from_dict(data)


def save_config(path, params: ChannelParams, layout: LevelLayout) -> None:
    data = {**params.to_dict(), **layout.to_dict()}
    Path(path).write_text(json.dumps(data, indent=2) + "\n")
