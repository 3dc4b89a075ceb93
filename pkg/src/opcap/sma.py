"""SMA operational-risk capital and the legacy BIA/TSA gross-income formulas.

Amounts are in Euro million.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

# (lower BI, BIC at lower BI, marginal coefficient in percent)
BUCKETS = (
    (0.0, 0.0, 11),
    (1000.0, 110.0, 15),
    (3000.0, 410.0, 19),
    (10000.0, 1740.0, 23),
    (30000.0, 6340.0, 29),
)
BUCKET_BOUNDS = (1000.0, 3000.0, 10000.0, 30000.0)

LC_WEIGHTS = (7.0, 7.0, 5.0)
DEFAULT_L = 10.0
DEFAULT_H = 100.0

BIA_ALPHA = 0.15
# corporate finance, trading & sales, retail banking, commercial banking,
# payment & settlement, agency services, asset management, retail brokerage
TSA_BETAS = (0.18, 0.18, 0.12, 0.15, 0.18, 0.15, 0.12, 0.12)


def _check_amount(name, value) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{name} must be finite and nonnegative, got {value!r}")
    return value


def bucket(bi: float) -> int:
    """Bucket 1..5; a boundary value belongs to the lower bucket."""
    bi = _check_amount("bi", bi)
    return 1 + sum(bi > b for b in BUCKET_BOUNDS)


def bic(bi: float) -> float:
    bi = _check_amount("bi", bi)
    lo, base, pct = BUCKETS[bucket(bi) - 1]
    # integer percent keeps the bucket constants exact at the boundaries
    return base + pct * (bi - lo) / 100.0


def k_sma(bi: float, lc: float) -> float:
    """SMA capital: BIC in bucket 1, else 110 + (BIC - 110) ln(e - 1 + LC/BIC)."""
    lc = _check_amount("lc", lc)
    b = bic(bi)
    if bucket(bi) == 1:
        return b
    # ln(e - 1 + r) = 1 + log1p((r - 1)/e), exact at r = 1
    return 110.0 + (b - 110.0) * (1.0 + math.log1p((lc / b - 1.0) / math.e))


@dataclass(frozen=True)
class LossHistory:
    """Per-year individual loss amounts."""

    years: tuple

    def __post_init__(self):
        ys = tuple(np.asarray(y, dtype=float).ravel() for y in self.years)
        if not ys:
            raise ValueError("a loss history needs at least one year")
        for y in ys:
            if np.any(~np.isfinite(y)) or np.any(y <= 0):
                raise ValueError("loss amounts must be positive and finite")
        object.__setattr__(self, "years", ys)

    @classmethod
    def from_lists(cls, years: Iterable[Sequence[float]]) -> "LossHistory":
        return cls(tuple(years))

    @property
    def n_years(self) -> int:
        return len(self.years)


def loss_component(history: LossHistory | Sequence[Sequence[float]], L: float = DEFAULT_L, H: float = DEFAULT_H) -> float:
    """7 x mean annual loss + 7 x mean annual loss above L + 5 x mean annual loss above H.

    Comparisons are strict and the full amount of an exceeding loss counts.
    """
    if not isinstance(history, LossHistory):
        history = LossHistory(tuple(history))
    t = history.n_years
    total = sum(float(y.sum()) for y in history.years)
    above_l = sum(float(y[y > L].sum()) for y in history.years)
    above_h = sum(float(y[y > H].sum()) for y in history.years)
    w1, w2, w3 = LC_WEIGHTS
    return (w1 * total + w2 * above_l + w3 * above_h) / t


def loss_component_from_totals(totals, above_l, above_h) -> float:
    """Loss component from per-year totals (all, above L, above H)."""
    w1, w2, w3 = LC_WEIGHTS
    return w1 * float(np.mean(totals)) + w2 * float(np.mean(above_l)) + w3 * float(np.mean(above_h))


@dataclass(frozen=True)
class SmaInput:
    bi: float
    lc: float

    def __post_init__(self):
        object.__setattr__(self, "bi", _check_amount("bi", self.bi))
        object.__setattr__(self, "lc", _check_amount("lc", self.lc))

    @classmethod
    def from_history(cls, bi: float, history, L: float = DEFAULT_L, H: float = DEFAULT_H) -> "SmaInput":
        return cls(bi, loss_component(history, L, H))

    @property
    def capital(self) -> float:
        return k_sma(self.bi, self.lc)


@dataclass(frozen=True)
class GrossIncomeSeries:
    """Three years of gross income, optionally split over the eight business lines.

    ``by_line`` is an 8 x 3 array: rows are business lines, columns years.
    """

    total: tuple
    by_line: np.ndarray | None = None
    betas: tuple = field(default=TSA_BETAS)

    def __post_init__(self):
        total = tuple(float(v) for v in self.total)
        if len(total) != 3 or not all(math.isfinite(v) for v in total):
            raise ValueError("total gross income needs exactly 3 finite annual values")
        object.__setattr__(self, "total", total)
        betas = tuple(float(b) for b in self.betas)
        if len(betas) != 8:
            raise ValueError("exactly 8 business-line betas are required")
        if any(not 0.12 <= b <= 0.18 for b in betas):
            raise ValueError(f"betas must lie in [0.12, 0.18], got {betas}")
        object.__setattr__(self, "betas", betas)
        if self.by_line is not None:
            m = np.asarray(self.by_line, dtype=float)
            if m.shape != (8, 3) or not np.all(np.isfinite(m)):
                raise ValueError(f"by_line must be a finite 8x3 matrix, got shape {m.shape}")
            object.__setattr__(self, "by_line", m)

    @classmethod
    def from_lines(cls, by_line, betas=TSA_BETAS) -> "GrossIncomeSeries":
        m = np.asarray(by_line, dtype=float)
        return cls(tuple(m.sum(axis=0)) if m.ndim == 2 else (0.0, 0.0, 0.0), m, betas)


def k_bia(gi: GrossIncomeSeries | Sequence[float], alpha: float = BIA_ALPHA) -> float:
    """alpha times the mean gross income over the years where it is positive."""
    total = gi.total if isinstance(gi, GrossIncomeSeries) else tuple(float(v) for v in gi)
    positive = [v for v in total if v > 0]
    if not positive:
        raise ValueError("no year with positive gross income; BIA capital undefined")
    return alpha * sum(positive) / len(positive)


def k_tsa(gi: GrossIncomeSeries) -> float:
    """Mean over three years of max(sum_i beta_i GI_i(year), 0)."""
    if gi.by_line is None:
        raise ValueError("TSA needs gross income by business line")
    weighted = np.asarray(gi.betas) @ gi.by_line
    return float(np.maximum(weighted, 0.0).sum() / 3.0)
