"""Compound Poisson annual-loss models.

Severity parameters are expressed in raw currency units (Euro); results are
reported in ``unit`` multiples of that currency, Euro million by default,
which is the unit of every SMA formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import special, stats

from opcap.distributions import Gamma, Lognormal, Mixture, SeverityDistribution
from opcap.streams import Seed, generator, ordered_map

EURO_MILLION = 1e6

SLA_VARIANTS = ("lognormal_closed_form", "opcar", "corrected")


@dataclass(frozen=True)
class CompoundPoissonModel:
    """Sum of independent Poisson(rate) compound processes."""

    components: tuple

    def __post_init__(self):
        comps = tuple((float(rate), sev) for rate, sev in self.components)
        if not comps:
            raise ValueError("a compound Poisson model needs at least one component")
        for rate, sev in comps:
            if not (math.isfinite(rate) and rate > 0):
                raise ValueError(f"Poisson rates must be positive and finite, got {rate!r}")
            if not isinstance(sev, SeverityDistribution):
                raise TypeError(f"severity must be a SeverityDistribution, got {type(sev).__name__}")
        object.__setattr__(self, "components", comps)

    @classmethod
    def single(cls, rate: float, severity: SeverityDistribution) -> "CompoundPoissonModel":
        return cls(((rate, severity),))

    @classmethod
    def poisson_lognormal(cls, rate: float, mu: float, sigma: float) -> "CompoundPoissonModel":
        return cls.single(rate, Lognormal(mu, sigma))

    @property
    def total_rate(self) -> float:
        return float(sum(rate for rate, _ in self.components))

    def scaled(self, factor: float) -> "CompoundPoissonModel":
        """Same severities with every rate multiplied by ``factor``."""
        return CompoundPoissonModel(tuple((rate * factor, sev) for rate, sev in self.components))

    def __add__(self, other: "CompoundPoissonModel") -> "CompoundPoissonModel":
        return CompoundPoissonModel(self.components + other.components)


def merge(model: CompoundPoissonModel) -> tuple[float, SeverityDistribution]:
    """Collapse the model into one Poisson rate and a mixture severity."""
    if len(model.components) == 1:
        rate, sev = model.components[0]
        return rate, sev
    lam = model.total_rate
    sevs = [sev for _, sev in model.components]
    if all(s == sevs[0] for s in sevs):
        return lam, sevs[0]
    weights = tuple(rate / lam for rate, _ in model.components)
    # renormalize so the weights sum to one in floating point
    total = math.fsum(weights)
    return lam, Mixture(tuple(w / total for w in weights), tuple(sevs))


class AnnualLossSample:
    """Simulated individual losses grouped by year.

    Stored flat: ``losses`` holds all amounts in year order and ``counts``
    the number of losses in each year.
    """

    def __init__(self, counts: np.ndarray, losses: np.ndarray):
        counts = np.asarray(counts, dtype=np.int64)
        losses = np.asarray(losses, dtype=float)
        if counts.ndim != 1 or len(counts) < 1:
            raise ValueError("need at least one year")
        if counts.sum() != len(losses):
            raise ValueError("counts do not match the number of losses")
        if np.any(losses <= 0):
            raise ValueError("loss amounts must be strictly positive")
        self.counts = counts
        self.losses = losses
        self._starts = np.concatenate(([0], np.cumsum(counts)[:-1]))

    @property
    def n_years(self) -> int:
        return len(self.counts)

    def __len__(self) -> int:
        return self.n_years

    def year(self, i: int) -> np.ndarray:
        start = self._starts[i]
        return self.losses[start : start + self.counts[i]]

    @property
    def years(self) -> list[np.ndarray]:
        return [self.year(i) for i in range(self.n_years)]

    def totals(self) -> np.ndarray:
        return _sum_by_year(self.losses, self.counts)

    def exceedance_totals(self, threshold: float) -> np.ndarray:
        """Per-year sum of the losses strictly above ``threshold``."""
        return _sum_by_year(np.where(self.losses > threshold, self.losses, 0.0), self.counts)

    def exceedance_counts(self, threshold: float) -> np.ndarray:
        return _sum_by_year((self.losses > threshold).astype(float), self.counts).astype(np.int64)

    def maxima(self) -> np.ndarray:
        """Largest loss per year (0 for empty years)."""
        out = np.zeros(self.n_years)
        nz = self.counts > 0
        if nz.any():
            out[nz] = np.maximum.reduceat(self.losses, self._starts[nz])
        return out


def _sum_by_year(x: np.ndarray, counts: np.ndarray) -> np.ndarray:
    out = np.zeros(len(counts))
    nz = counts > 0
    if nz.any():
        starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
        out[nz] = np.add.reduceat(x, starts[nz])
    return out


def block_years(model: CompoundPoissonModel) -> int:
    """Years per simulation block: about four million losses, within [64, 65536]."""
    return int(min(65536, max(64, (1 << 22) // int(math.ceil(model.total_rate) + 1))))


def _block_ranges(years: int, size: int) -> list[tuple[int, int, int]]:
    return [(b, start, min(size, years - start)) for b, start in enumerate(range(0, years, size))]


def _simulate_block(model, rng, n):
    counts = np.zeros(n, dtype=np.int64)
    year_ids, parts = [], []
    for rate, sev in model.components:
        c = rng.poisson(rate, n)
        counts += c
        parts.append(sev.sample(rng, int(c.sum())))
        year_ids.append(np.repeat(np.arange(n), c))
    if len(parts) == 1:
        return counts, parts[0]
    order = np.argsort(np.concatenate(year_ids), kind="stable")
    return counts, np.concatenate(parts)[order]


def _block_totals(model, rng, n):
    totals = np.zeros(n)
    for rate, sev in model.components:
        c = rng.poisson(rate, n)
        if isinstance(sev, Gamma) and np.ndim(sev.shape) == 0:
            # a sum of c i.i.d. Gamma(k, s) losses is Gamma(c*k, s); Gamma(0, s) is 0
            totals += rng.gamma(sev.shape * c, sev.scale)
        else:
            totals += _sum_by_year(sev.sample(rng, int(c.sum())), c)
    return totals


def simulate(
    model: CompoundPoissonModel,
    years: int,
    seed: Seed,
    *,
    unit: float = EURO_MILLION,
    threads: int | None = None,
) -> AnnualLossSample:
    """Simulate ``years`` years of individual losses, amounts divided by ``unit``."""
    if years < 1:
        raise ValueError("years must be at least 1")
    size = block_years(model)

    def run(block):
        b, _, n = block
        return _simulate_block(model, generator(seed, b), n)

    results = ordered_map(run, _block_ranges(int(years), size), threads)
    counts = np.concatenate([c for c, _ in results])
    losses = np.concatenate([x for _, x in results]) / unit
    return AnnualLossSample(counts, losses)


def simulate_totals(
    model: CompoundPoissonModel,
    years: int,
    seed: Seed,
    *,
    unit: float = EURO_MILLION,
    threads: int | None = None,
) -> np.ndarray:
    """Annual aggregate losses only; Gamma components are drawn in aggregate."""
    if years < 1:
        raise ValueError("years must be at least 1")
    size = block_years(model)

    def run(block):
        b, _, n = block
        return _block_totals(model, generator(seed, b), n)

    return np.concatenate(ordered_map(run, _block_ranges(int(years), size), threads)) / unit


def annual_loss_mean(model: CompoundPoissonModel, *, unit: float = EURO_MILLION) -> float:
    return math.fsum(rate * float(sev.mean()) for rate, sev in model.components) / unit


def sla_var(
    model: CompoundPoissonModel,
    alpha: float = 0.999,
    variant: str = "corrected",
    *,
    unit: float = EURO_MILLION,
) -> float:
    """Single-loss approximation of the annual-loss quantile at ``alpha``.

    ``corrected``: F^-1(1 - (1-alpha)/lam) + lam*E[X]
    ``opcar``: same quantile term with (lam - 1)*E[X]
    ``lognormal_closed_form``: the corrected form written out for a
    Lognormal severity, exp(mu + sigma*Phi^-1(.)) + lam*exp(mu + sigma^2/2).
    """
    if variant not in SLA_VARIANTS:
        raise ValueError(f"unknown SLA variant {variant!r}; choose from {SLA_VARIANTS}")
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    lam, sev = merge(model)
    tail = (1.0 - alpha) / lam
    if not 0 < tail < 1:
        raise ValueError(f"1 - (1-alpha)/lambda must lie in (0, 1); got lambda={lam!r}")
    if variant == "lognormal_closed_form":
        if not isinstance(sev, Lognormal):
            raise TypeError("lognormal_closed_form needs a single Lognormal severity")
        mu, sigma = float(sev.mu), float(sev.sigma)
        value = math.exp(mu + sigma * special.ndtri(1.0 - tail)) + lam * math.exp(mu + 0.5 * sigma * sigma)
        return value / unit
    mean = float(sev.mean())
    quantile = float(sev.isf(tail))
    body = lam * mean if variant == "corrected" else (lam - 1.0) * mean
    return (quantile + body) / unit


class MonteCarloVaR(NamedTuple):
    value: float
    stderr: float
    years: int


def empirical_var(totals: np.ndarray, alpha: float) -> MonteCarloVaR:
    """The ceil(alpha*n)-th order statistic with a binomial-bracket standard error.

    The standard error is half the distance between the order statistics
    whose ranks bound Binomial(n, alpha) at +/- one standard deviation
    probability levels.
    """
    z = np.asarray(totals, dtype=float)
    n = len(z)
    if n * (1.0 - alpha) < 1.0:
        raise ValueError(f"{n} samples leave no expected tail observation at alpha={alpha}")
    k = min(n, max(1, math.ceil(alpha * n - 1e-9)))
    lo_p, hi_p = stats.norm.cdf([-1.0, 1.0])
    k_lo = int(max(1, stats.binom.ppf(lo_p, n, alpha)))
    k_hi = int(min(n, stats.binom.ppf(hi_p, n, alpha) + 1))
    ranks = sorted({k - 1, k_lo - 1, k_hi - 1})
    part = np.partition(z, ranks)
    return MonteCarloVaR(float(part[k - 1]), 0.5 * float(part[k_hi - 1] - part[k_lo - 1]), n)


def mc_var(
    model: CompoundPoissonModel,
    alpha: float = 0.999,
    years: int = 1_000_000,
    seed: Seed = None,
    *,
    unit: float = EURO_MILLION,
    threads: int | None = None,
) -> MonteCarloVaR:
    """Monte Carlo quantile of the annual loss."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if years * (1.0 - alpha) < 1.0:
        raise ValueError(f"years={years} too few for alpha={alpha}; need at least {math.ceil(1 / (1 - alpha))}")
    return empirical_var(simulate_totals(model, years, seed, unit=unit, threads=threads), alpha)


def long_term_lc(
    model: CompoundPoissonModel,
    L: float = 10.0,
    H: float = 100.0,
    *,
    unit: float = EURO_MILLION,
) -> float:
    """Long-run average of the SMA loss component.

    sum_i lam_i * (7 E[X_i] + 7 E[X_i 1{X_i > L}] + 5 E[X_i 1{X_i > H}]),
    thresholds in reporting units.
    """
    total = 0.0
    for rate, sev in model.components:
        total += rate * (
            7.0 * float(sev.mean())
            + 7.0 * float(sev.partial_expectation(L * unit))
            + 5.0 * float(sev.partial_expectation(H * unit))
        )
    return total / unit


def lognormal_long_term_lc(
    rate: float, mu: float, sigma: float, L: float = 10.0, H: float = 100.0, *, unit: float = EURO_MILLION
) -> float:
    """Closed form of :func:`long_term_lc` for one Poisson-Lognormal process."""
    mean = math.exp(mu + 0.5 * sigma * sigma)
    s2 = sigma * sigma
    tail_l = special.ndtr((s2 + mu - math.log(L * unit)) / sigma)
    tail_h = special.ndtr((s2 + mu - math.log(H * unit)) / sigma)
    return rate * mean * (7.0 + 7.0 * tail_l + 5.0 * tail_h) / unit


def models_from_spec(spec: Sequence[dict]) -> CompoundPoissonModel:
    """Build a model from ``[{"rate": .., "family": .., "params": [..]}, ...]``."""
    from opcap.distributions import make_distribution

    comps = []
    for item in spec:
        try:
            comps.append((float(item["rate"]), make_distribution(item["family"], *item["params"])))
        except KeyError as exc:
            raise ValueError(f"model component missing key {exc}") from None
    return CompoundPoissonModel(tuple(comps))
